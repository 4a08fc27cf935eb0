#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "alseg/affinity.hpp"
#include "alseg/tensor.hpp"

namespace alseg::synthdata {

// Two acquisition styles: A is high contrast with low noise, B is low
// contrast with twice the noise.
enum class Domain { kA, kB };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

enum class ShapeKind { kEllipse = 1, kRectangle = 2, kAnnulus = 3 };

// Analytic description of one foreground object; the label mask is exactly
// the set of pixel centres for which contains() holds.
struct Shape {
  ShapeKind kind = ShapeKind::kEllipse;
  std::size_t cls = 1;
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;   // semi-axes, half extents, or outer radius (rx)
  double inner = 0;        // annulus inner radius

  bool contains(double x, double y) const noexcept;
};

struct Sample {
  SampleId id = 0;
  Tensor image;  // [1,H,W], values in [0,1]
  Tensor label;  // [H,W], class ids
  Domain domain = Domain::kA;
  std::vector<Shape> shapes;
};

struct GeneratorConfig {
  std::size_t n_samples = 300;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t n_cl = 3;
  double noise_a = 0.05;
  double noise_b = 0.10;

  void validate() const;
};

// Sample i depends only on (seed, i), so datasets of different sizes share
// their common prefix.
std::vector<Sample> generate_dataset(std::uint64_t seed, const GeneratorConfig& config);

struct PoolState {
  std::set<SampleId> annotated;
  std::set<SampleId> pool;
  std::set<SampleId> validation;
  std::set<SampleId> test;

  std::size_t total() const noexcept { return annotated.size() + pool.size() + validation.size() + test.size(); }
};

// Uniform disjoint split; whatever is left over becomes the pool.
PoolState initial_split(std::span<const Sample> samples, std::uint64_t seed, std::size_t n_initial,
                        std::size_t n_val, std::size_t n_test);

// Moves ids from the pool to the annotated set and hands back their samples.
// Validates every id before touching the state.
std::vector<const Sample*> oracle_annotate(PoolState& state, std::span<const Sample> dataset,
                                           std::span<const SampleId> ids);

}  // namespace alseg::synthdata
