#include "alseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alseg/error.hpp"
#include "alseg/rng.hpp"

namespace alseg::synthdata {
namespace {

constexpr double kMinForeground = 0.06;
constexpr double kMaxForeground = 0.38;
constexpr int kPlacementTries = 64;

struct Box {
  double x0, y0, x1, y1;
};

Box bounds(const Shape& s) { return {s.cx - s.rx, s.cy - s.ry, s.cx + s.rx, s.cy + s.ry}; }

// Boxes at least `gap` pixels apart along some axis.
bool separated(const Box& a, const Box& b, double gap) {
  return a.x1 + gap < b.x0 || b.x1 + gap < a.x0 || a.y1 + gap < b.y0 || b.y1 + gap < a.y0;
}

ShapeKind kind_for_class(std::size_t cls) { return static_cast<ShapeKind>(cls); }

Shape draw_shape(Rng& rng, std::size_t cls, double h, double w) {
  const double side = std::min(h, w);
  Shape s;
  s.cls = cls;
  s.kind = kind_for_class(cls);
  switch (s.kind) {
    case ShapeKind::kEllipse:
      s.rx = rng.uniform(0.10, 0.25) * side;
      s.ry = rng.uniform(0.10, 0.25) * side;
      break;
    case ShapeKind::kRectangle:
      s.rx = rng.uniform(0.08, 0.22) * side;
      s.ry = rng.uniform(0.08, 0.22) * side;
      break;
    case ShapeKind::kAnnulus:
      s.rx = rng.uniform(0.15, 0.25) * side;
      s.ry = s.rx;
      s.inner = s.rx * rng.uniform(0.4, 0.6);
      break;
  }
  s.cx = rng.uniform(s.rx + 1.0, w - 2.0 - s.rx);
  s.cy = rng.uniform(s.ry + 1.0, h - 2.0 - s.ry);
  return s;
}

// Object intensity ranges per domain and shape. Within a domain the class
// ranges are disjoint (ellipse > annulus > rectangle), but pixel noise blurs
// them, so spatial context still matters. Domain B compresses everything
// towards its brighter background (lower contrast) and doubles the noise.
std::pair<double, double> object_range(Domain d, ShapeKind k) {
  if (d == Domain::kA) {
    switch (k) {
      case ShapeKind::kEllipse: return {0.80, 0.95};
      case ShapeKind::kRectangle: return {0.45, 0.60};
      case ShapeKind::kAnnulus: return {0.62, 0.78};
    }
  }
  switch (k) {
    case ShapeKind::kEllipse: return {0.68, 0.78};
    case ShapeKind::kRectangle: return {0.52, 0.60};
    case ShapeKind::kAnnulus: return {0.60, 0.68};
  }
  return {0.5, 0.5};
}

Sample generate_one(std::uint64_t seed, SampleId id, const GeneratorConfig& cfg) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id), Stream::kData));
  const auto h = static_cast<double>(cfg.height);
  const auto w = static_cast<double>(cfg.width);
  Sample s;
  s.id = id;
  s.domain = rng.bernoulli(0.5) ? Domain::kB : Domain::kA;

  for (;;) {
    s.shapes.clear();
    const std::size_t n_objects = 1 + static_cast<std::size_t>(rng.below(2));
    for (std::size_t o = 0; o < n_objects; ++o) {
      const std::size_t cls = 1 + static_cast<std::size_t>(rng.below(cfg.n_cl - 1));
      for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
        const Shape candidate = draw_shape(rng, cls, h, w);
        const bool clear = std::all_of(s.shapes.begin(), s.shapes.end(), [&](const Shape& other) {
          return separated(bounds(candidate), bounds(other), 2.0);
        });
        if (clear) {
          s.shapes.push_back(candidate);
          break;
        }
      }
    }
    s.label = Tensor({cfg.height, cfg.width});
    std::size_t foreground = 0;
    for (std::size_t y = 0; y < cfg.height; ++y) {
      for (std::size_t x = 0; x < cfg.width; ++x) {
        for (const Shape& shape : s.shapes) {
          if (shape.contains(static_cast<double>(x), static_cast<double>(y))) {
            s.label.at(y, x) = static_cast<float>(shape.cls);
            ++foreground;
            break;
          }
        }
      }
    }
    const double fraction = static_cast<double>(foreground) / (h * w);
    if (fraction >= kMinForeground && fraction <= kMaxForeground) break;
  }

  const bool dark = s.domain == Domain::kA;
  const double background = dark ? rng.uniform(0.05, 0.20) : rng.uniform(0.30, 0.45);
  std::vector<double> intensity(s.shapes.size());
  for (std::size_t i = 0; i < s.shapes.size(); ++i) {
    const auto [lo, hi] = object_range(s.domain, s.shapes[i].kind);
    intensity[i] = rng.uniform(lo, hi);
  }
  const double sigma = dark ? cfg.noise_a : cfg.noise_b;
  s.image = Tensor({1, cfg.height, cfg.width});
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      double v = background;
      for (std::size_t i = 0; i < s.shapes.size(); ++i) {
        if (s.shapes[i].contains(static_cast<double>(x), static_cast<double>(y))) {
          v = intensity[i];
          break;
        }
      }
      v += sigma * rng.normal();
      s.image.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(Domain d) { return d == Domain::kA ? "A" : "B"; }

Domain parse_domain(std::string_view s) {
  if (s == "A") return Domain::kA;
  if (s == "B") return Domain::kB;
  throw InputError("unknown domain tag '" + std::string(s) + "'");
}

bool Shape::contains(double x, double y) const noexcept {
  const double dx = x - cx;
  const double dy = y - cy;
  switch (kind) {
    case ShapeKind::kEllipse:
      return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0;
    case ShapeKind::kRectangle:
      return std::abs(dx) <= rx && std::abs(dy) <= ry;
    case ShapeKind::kAnnulus: {
      const double r2 = dx * dx + dy * dy;
      return r2 <= rx * rx && r2 >= inner * inner;
    }
  }
  return false;
}

void GeneratorConfig::validate() const {
  if (n_cl != 3 && n_cl != 4) throw InputError("generator: n_classes must be 3 or 4");
  if (height < 16 || width < 16 || height % 2 != 0 || width % 2 != 0) {
    throw InputError("generator: height and width must be even and >= 16");
  }
  if (n_samples == 0) throw InputError("generator: n_samples must be positive");
  if (!(noise_a >= 0.0) || !(noise_b >= 0.0)) throw InputError("generator: noise levels must be >= 0");
}

std::vector<Sample> generate_dataset(std::uint64_t seed, const GeneratorConfig& config) {
  config.validate();
  std::vector<Sample> samples;
  samples.reserve(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    samples.push_back(generate_one(seed, static_cast<SampleId>(i), config));
  }
  return samples;
}

PoolState initial_split(std::span<const Sample> samples, std::uint64_t seed, std::size_t n_initial,
                        std::size_t n_val, std::size_t n_test) {
  if (n_initial + n_val + n_test > samples.size()) {
    throw InputError("initial_split: " + std::to_string(n_initial + n_val + n_test) + " requested from " +
                     std::to_string(samples.size()) + " samples");
  }
  std::vector<SampleId> ids;
  ids.reserve(samples.size());
  for (const Sample& s : samples) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InputError("initial_split: duplicate sample id");
  Rng rng(derive_seed(seed, 0, Stream::kSplit));
  rng.shuffle(std::span<SampleId>(ids));

  PoolState state;
  std::size_t i = 0;
  for (; i < n_initial; ++i) state.annotated.insert(ids[i]);
  for (; i < n_initial + n_val; ++i) state.validation.insert(ids[i]);
  for (; i < n_initial + n_val + n_test; ++i) state.test.insert(ids[i]);
  for (; i < ids.size(); ++i) state.pool.insert(ids[i]);
  return state;
}

std::vector<const Sample*> oracle_annotate(PoolState& state, std::span<const Sample> dataset,
                                           std::span<const SampleId> ids) {
  std::vector<const Sample*> labeled;
  std::set<SampleId> seen;
  for (const SampleId id : ids) {
    const auto it = std::find_if(dataset.begin(), dataset.end(), [id](const Sample& s) { return s.id == id; });
    if (it == dataset.end()) throw InputError("oracle_annotate: unknown sample id " + std::to_string(id));
    if (state.annotated.count(id) != 0 || !seen.insert(id).second) {
      throw StateError("oracle_annotate: sample " + std::to_string(id) + " is already annotated");
    }
    if (state.pool.count(id) == 0) {
      throw StateError("oracle_annotate: sample " + std::to_string(id) + " is not in the unlabeled pool");
    }
    labeled.push_back(&*it);
  }
  for (const SampleId id : ids) {
    state.pool.erase(id);
    state.annotated.insert(id);
  }
  return labeled;
}

}  // namespace alseg::synthdata
