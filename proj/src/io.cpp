#include "alseg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "alseg/error.hpp"

namespace alseg::io {
namespace {

using nlohmann::json;

constexpr std::size_t kPreambleBytes = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

[[noreturn]] void malformed(std::string_view context, const std::string& what) {
  throw IoError(std::string(context) + ": " + what);
}

std::string zero_padded(SampleId id) {
  std::string digits = std::to_string(id);
  return std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

json split_to_json(const SplitAssignment& s) {
  return {{"annotated", s.annotated}, {"pool", s.pool}, {"validation", s.validation}, {"test", s.test}};
}

SplitAssignment split_from_json(const json& j) {
  SplitAssignment s;
  j.at("annotated").get_to(s.annotated);
  j.at("pool").get_to(s.pool);
  j.at("validation").get_to(s.validation);
  j.at("test").get_to(s.test);
  return s;
}

std::string checkpoint_entry_name(const char* group, std::size_t layer, const char* part) {
  return std::string(group) + std::string(micronet::layer_spec(layer).name) + "." + part;
}

}  // namespace

std::size_t encoded_size(const Tensor& t) { return kPreambleBytes + 4 * t.rank() + 4 * t.size(); }

void append_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  if (t.rank() == 0 || t.rank() > 255) {
    throw ShapeError("TensorFile: rank must be 1..255, got " + std::to_string(t.rank()));
  }
  out.reserve(out.size() + encoded_size(t));
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  out.push_back(kTensorVersion);
  out.push_back(kDtypeFloat32);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  out.push_back(0);
  for (const std::size_t d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("TensorFile: extent exceeds 2^32-1");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  append_tensor(out, t);
  return out;
}

Tensor decode_tensor_at(std::span<const std::uint8_t> bytes, std::size_t& offset, std::string_view context) {
  if (offset > bytes.size() || bytes.size() - offset < kPreambleBytes) {
    malformed(context, "truncated header");
  }
  const std::uint8_t* p = bytes.data() + offset;
  if (std::memcmp(p, kTensorMagic, 4) != 0) malformed(context, "bad magic (expected ALTN)");
  if (p[4] != kTensorVersion) malformed(context, "unsupported version " + std::to_string(p[4]));
  if (p[5] != kDtypeFloat32) malformed(context, "unsupported dtype " + std::to_string(p[5]));
  const std::size_t ndim = p[6];
  if (ndim == 0) malformed(context, "ndim must be >= 1");
  if (p[7] != 0) malformed(context, "reserved byte must be 0");
  const std::size_t remaining = bytes.size() - offset - kPreambleBytes;
  if (remaining < 4 * ndim) malformed(context, "truncated dims");
  std::vector<std::size_t> dims(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(p + kPreambleBytes + 4 * i);
    if (dims[i] == 0) malformed(context, "zero extent in dim " + std::to_string(i));
    if (dims[i] > (remaining / 4) / count) malformed(context, "payload shorter than dims require");
    count *= dims[i];
  }
  if ((remaining - 4 * ndim) / 4 < count) malformed(context, "payload shorter than dims require");
  const std::uint8_t* payload = p + kPreambleBytes + 4 * ndim;
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(payload + 4 * i));
  offset += kPreambleBytes + 4 * ndim + 4 * count;
  return Tensor(std::move(dims), std::move(values));
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::string_view context) {
  std::size_t offset = 0;
  Tensor t = decode_tensor_at(bytes, offset, context);
  if (offset != bytes.size()) {
    malformed(context, std::to_string(bytes.size() - offset) + " trailing bytes after payload");
  }
  return t;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw IoError("error writing " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const fs::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void save_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const fs::path& path) { return decode_tensor(read_file(path), path.string()); }

// ---- checkpoints -----------------------------------------------------------

fs::path index_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".index.json";
  return p;
}

void save_checkpoint(const fs::path& path, const micronet::ModelParams& params) {
  std::vector<std::uint8_t> blob;
  json entries = json::array();
  auto add = [&](const std::string& name, const Tensor& t) {
    const std::size_t offset = blob.size();
    append_tensor(blob, t);
    entries.push_back({{"name", name}, {"offset", offset}, {"bytes", blob.size() - offset}, {"dims", t.dims()}});
  };
  for (std::size_t l = 0; l < micronet::kLayerCount; ++l) {
    add(checkpoint_entry_name("", l, "weight"), params.layers[l].weight);
    add(checkpoint_entry_name("", l, "bias"), params.layers[l].bias);
  }
  for (std::size_t l = 0; l < micronet::kLayerCount; ++l) {
    add(checkpoint_entry_name("adam.m.", l, "weight"), params.adam.m[l].weight);
    add(checkpoint_entry_name("adam.m.", l, "bias"), params.adam.m[l].bias);
    add(checkpoint_entry_name("adam.v.", l, "weight"), params.adam.v[l].weight);
    add(checkpoint_entry_name("adam.v.", l, "bias"), params.adam.v[l].bias);
  }
  const json index = {
      {"format", "alseg-checkpoint"},
      {"version", 1},
      {"blob", path.filename().string()},
      {"blob_bytes", blob.size()},
      {"n_ch", params.n_ch},
      {"n_cl", params.n_cl},
      {"adam_t", params.adam.t},
      {"tensors", entries},
  };
  write_file(path, blob);
  write_text(index_path(path), index.dump(2) + "\n");
}

micronet::ModelParams load_checkpoint(const fs::path& path) {
  const fs::path ipath = index_path(path);
  json index;
  try {
    index = json::parse(read_text(ipath));
  } catch (const json::exception& e) {
    throw IoError(ipath.string() + ": " + e.what());
  }
  const auto blob = read_file(path);
  try {
    if (index.at("format") != "alseg-checkpoint" || index.at("version") != 1) {
      throw IoError(ipath.string() + ": not an alseg checkpoint index");
    }
    if (index.at("blob_bytes").get<std::size_t>() != blob.size()) {
      throw IoError(path.string() + ": size " + std::to_string(blob.size()) + " does not match index");
    }
    const auto n_ch = index.at("n_ch").get<std::size_t>();
    const auto n_cl = index.at("n_cl").get<std::size_t>();
    micronet::ModelParams params = micronet::init_params(0, n_ch, n_cl);
    params.adam.t = index.at("adam_t").get<std::int64_t>();

    std::size_t expected_offset = 0;
    std::size_t position = 0;
    const json& tensors = index.at("tensors");
    auto next = [&](const std::string& name, Tensor& slot) {
      if (position >= tensors.size()) throw IoError(ipath.string() + ": missing entry " + name);
      const json& e = tensors[position++];
      if (e.at("name") != name) {
        throw IoError(ipath.string() + ": expected entry " + name + ", found " + e.at("name").get<std::string>());
      }
      std::size_t offset = e.at("offset").get<std::size_t>();
      if (offset != expected_offset) throw IoError(ipath.string() + ": entry " + name + " has a bad offset");
      Tensor t = decode_tensor_at(blob, offset, path.string() + ":" + name);
      if (offset - expected_offset != e.at("bytes").get<std::size_t>() ||
          t.dims() != e.at("dims").get<std::vector<std::size_t>>()) {
        throw IoError(ipath.string() + ": entry " + name + " disagrees with the blob");
      }
      if (!t.same_shape(slot)) {
        throw ShapeError(path.string() + ": " + name + " has shape " + shape_string(t.dims()) + ", expected " +
                         shape_string(slot.dims()));
      }
      expected_offset = offset;
      slot = std::move(t);
    };
    for (std::size_t l = 0; l < micronet::kLayerCount; ++l) {
      next(checkpoint_entry_name("", l, "weight"), params.layers[l].weight);
      next(checkpoint_entry_name("", l, "bias"), params.layers[l].bias);
    }
    for (std::size_t l = 0; l < micronet::kLayerCount; ++l) {
      next(checkpoint_entry_name("adam.m.", l, "weight"), params.adam.m[l].weight);
      next(checkpoint_entry_name("adam.m.", l, "bias"), params.adam.m[l].bias);
      next(checkpoint_entry_name("adam.v.", l, "weight"), params.adam.v[l].weight);
      next(checkpoint_entry_name("adam.v.", l, "bias"), params.adam.v[l].bias);
    }
    if (position != tensors.size() || expected_offset != blob.size()) {
      throw IoError(ipath.string() + ": unexpected extra entries");
    }
    return params;
  } catch (const json::exception& e) {
    throw IoError(ipath.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw IoError(ipath.string() + ": " + e.what());
  }
}

// ---- datasets --------------------------------------------------------------

std::string image_file_name(SampleId id) { return zero_padded(id) + ".altn"; }

void save_dataset(const fs::path& dir, const Dataset& dataset) {
  json samples = json::array();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const synthdata::Sample& s = dataset.samples[i];
    if (s.id != static_cast<SampleId>(i)) throw InputError("save_dataset: sample ids must be 0..n-1 in order");
    const std::string name = image_file_name(s.id);
    save_tensor(dir / "images" / name, s.image);
    save_tensor(dir / "labels" / name, s.label);
    samples.push_back({{"id", s.id},
                       {"domain", synthdata::to_string(s.domain)},
                       {"image", "images/" + name},
                       {"label", "labels/" + name}});
  }
  const auto& g = dataset.generator;
  json manifest = {
      {"format", "alseg-dataset"},
      {"version", 1},
      {"seed", dataset.seed},
      {"generator",
       {{"n_samples", g.n_samples},
        {"height", g.height},
        {"width", g.width},
        {"n_classes", g.n_cl},
        {"noise_a", g.noise_a},
        {"noise_b", g.noise_b}}},
      {"samples", samples},
  };
  if (dataset.split) manifest["split"] = split_to_json(*dataset.split);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_text(mpath));
  } catch (const json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
  try {
    if (manifest.at("format") != "alseg-dataset" || manifest.at("version") != 1) {
      throw IoError(mpath.string() + ": not an alseg dataset manifest");
    }
    Dataset d;
    d.seed = manifest.at("seed").get<std::uint64_t>();
    const json& g = manifest.at("generator");
    d.generator.n_samples = g.at("n_samples").get<std::size_t>();
    d.generator.height = g.at("height").get<std::size_t>();
    d.generator.width = g.at("width").get<std::size_t>();
    d.generator.n_cl = g.at("n_classes").get<std::size_t>();
    d.generator.noise_a = g.at("noise_a").get<double>();
    d.generator.noise_b = g.at("noise_b").get<double>();
    const json& samples = manifest.at("samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const json& e = samples[i];
      synthdata::Sample s;
      s.id = e.at("id").get<SampleId>();
      if (s.id != static_cast<SampleId>(i)) throw IoError(mpath.string() + ": sample ids must be 0..n-1 in order");
      s.domain = synthdata::parse_domain(e.at("domain").get<std::string>());
      s.image = load_tensor(dir / e.at("image").get<std::string>());
      s.label = load_tensor(dir / e.at("label").get<std::string>());
      if (s.image.rank() != 3 || s.image.dim(0) != 1 || s.label.rank() != 2 || s.label.dim(0) != s.image.dim(1) ||
          s.label.dim(1) != s.image.dim(2)) {
        throw ShapeError(mpath.string() + ": sample " + std::to_string(s.id) + " has image " +
                         shape_string(s.image.dims()) + " and label " + shape_string(s.label.dims()));
      }
      d.samples.push_back(std::move(s));
    }
    if (manifest.contains("split")) d.split = split_from_json(manifest.at("split"));
    return d;
  } catch (const json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
}

// ---- CSV -------------------------------------------------------------------

std::string format_number(double v) {
  if (!std::isfinite(v)) throw InputError("format_number: non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_number(float v) {
  if (!std::isfinite(v)) throw InputError("format_number: non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(std::span<const std::string> fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += csv_field(fields[i]);
  }
  line += "\r\n";
  return line;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  std::size_t i = 0;
  std::size_t line = 1;
  auto end_record = [&] {
    row.push_back(std::move(field));
    field.clear();
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("csv line " + std::to_string(line) + ": expected " + std::to_string(rows.front().size()) +
                    " fields, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
    row.clear();
    ++line;
  };
  while (i < text.size()) {
    if (text[i] == '"') {
      ++i;
      while (true) {
        if (i >= text.size()) throw IoError("csv line " + std::to_string(line) + ": unterminated quoted field");
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += text[i++];
      }
      if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        throw IoError("csv line " + std::to_string(line) + ": text after closing quote");
      }
    } else {
      while (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        if (text[i] == '"') throw IoError("csv line " + std::to_string(line) + ": quote inside unquoted field");
        field += text[i++];
      }
    }
    if (i >= text.size()) {
      end_record();
      break;
    }
    if (text[i] == ',') {
      row.push_back(std::move(field));
      field.clear();
      ++i;
      if (i == text.size()) end_record();
    } else if (text[i] == '\r') {
      if (i + 1 >= text.size() || text[i + 1] != '\n') throw IoError("csv line " + std::to_string(line) + ": bare CR");
      end_record();
      i += 2;
    } else {
      end_record();
      ++i;
    }
  }
  return rows;
}

double parse_number(std::string_view s, std::string_view context) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw IoError(std::string(context) + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

}  // namespace alseg::io
