#pragma once

// On-disk formats.
//
// TensorFile ("ALTN"): an 8-byte preamble, the dims, then the payload.
//
//   offset 0  4 bytes   magic 'A' 'L' 'T' 'N'
//          4  1 byte    version = 1
//          5  1 byte    dtype = 1 (32-bit IEEE float)
//          6  1 byte    ndim (1..255)
//          7  1 byte    reserved = 0
//          8  4*ndim    dims, uint32 little-endian, each >= 1
//          .. 4*prod    payload, float32 little-endian, row-major
//
// A standalone .altn file holds exactly one tensor; trailing bytes are an
// error. Checkpoints concatenate several TensorFiles into one blob and keep a
// JSON index of names, offsets and shapes next to it.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alseg/micronet.hpp"
#include "alseg/synthdata.hpp"
#include "alseg/tensor.hpp"

namespace alseg::io {

namespace fs = std::filesystem;

inline constexpr std::uint8_t kTensorMagic[4] = {'A', 'L', 'T', 'N'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

// Serialized size of a tensor in bytes.
std::size_t encoded_size(const Tensor& t);

void append_tensor(std::vector<std::uint8_t>& out, const Tensor& t);
std::vector<std::uint8_t> encode_tensor(const Tensor& t);

// Decodes one TensorFile starting at `bytes[offset]`, advancing offset past it.
// Throws IoError (with `context` in the message) on any malformed input.
Tensor decode_tensor_at(std::span<const std::uint8_t> bytes, std::size_t& offset, std::string_view context);
// Decodes exactly one TensorFile spanning all of `bytes`.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::string_view context = "tensor");

std::vector<std::uint8_t> read_file(const fs::path& path);
// Writes through a temporary file and renames, so readers never see a
// half-written file.
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

void save_tensor(const fs::path& path, const Tensor& t);
Tensor load_tensor(const fs::path& path);

// ---- checkpoints ---------------------------------------------------------

// `path` receives the concatenated tensors; `index_path(path)` the JSON index.
fs::path index_path(const fs::path& checkpoint);
void save_checkpoint(const fs::path& path, const micronet::ModelParams& params);
micronet::ModelParams load_checkpoint(const fs::path& path);

// ---- datasets ------------------------------------------------------------

struct SplitAssignment {
  std::vector<SampleId> annotated, pool, validation, test;
};

struct Dataset {
  std::uint64_t seed = 0;
  synthdata::GeneratorConfig generator;
  std::vector<synthdata::Sample> samples;  // samples[i].id == i
  std::optional<SplitAssignment> split;
};

// Layout: <dir>/manifest.json, <dir>/images/<id>.altn, <dir>/labels/<id>.altn.
void save_dataset(const fs::path& dir, const Dataset& dataset);
Dataset load_dataset(const fs::path& dir);
std::string image_file_name(SampleId id);

// ---- CSV ----------------------------------------------------------------

// Shortest decimal string that parses back to exactly `v` (std::to_chars).
// Non-finite values are rejected with InputError.
std::string format_number(double v);
// Same for 32-bit values: the shortest string that parses back to `v` as float.
std::string format_number(float v);
// RFC-4180: quote when the field has a comma, quote, CR or LF; double quotes.
std::string csv_field(std::string_view field);
std::string csv_line(std::span<const std::string> fields);

// RFC-4180 parse accepting CRLF or LF record separators. Every record must
// have the header's field count; malformed quoting throws IoError.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

double parse_number(std::string_view s, std::string_view context);

}  // namespace alseg::io
