#include "alseg/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alseg/error.hpp"
#include "alseg/kernels.hpp"
#include "alseg/micronet.hpp"

namespace alseg::affinity {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  const auto& kt = kernels::active();
  const double na = std::sqrt(kt.dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(kt.dot(b.data(), b.data(), b.size()));
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  const double c = kt.dot(a.data(), b.data(), a.size()) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double content_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("content_distance: shapes " + shape_string(a.dims()) + " and " + shape_string(b.dims()));
  }
  if (a.empty()) return 0.0;
  return kernels::active().squared_distance(a.raw(), b.raw(), a.size()) / static_cast<double>(a.size());
}

double distance_to_similarity(double d) {
  if (!(d >= 0.0)) throw InputError("distance_to_similarity: distance must be >= 0");
  return 1.0 / (1.0 + d);
}

Tensor channel_entropy_map(const Tensor& abst) {
  if (abst.rank() != 3) throw ShapeError("channel_entropy_map: expected [C,H,W], got " + shape_string(abst.dims()));
  const std::size_t channels = abst.dim(0);
  const std::size_t plane = abst.dim(1) * abst.dim(2);
  constexpr double eps = micronet::kEntropyEpsilon;
  Tensor out({abst.dim(1), abst.dim(2)});
  for (std::size_t p = 0; p < plane; ++p) {
    double mass = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = abst[c * plane + p];
      if (a < 0.0) throw InputError("channel_entropy_map: negative activation");
      mass += a + eps;
    }
    double h = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double prob = (abst[c * plane + p] + eps) / mass;
      h -= prob * std::log(prob);
    }
    out[p] = static_cast<float>(h);
  }
  return out;
}

namespace {

// A sample that appears on both axes gets self_sim, which must dominate its row.
template <typename Item, typename Sim, typename SelfSim>
AffinityMatrix build(std::span<const SampleId> row_ids, std::span<const Item* const> rows,
                     std::span<const SampleId> col_ids, std::span<const Item* const> cols, Sim sim,
                     SelfSim self_sim) {
  if (row_ids.size() != rows.size() || col_ids.size() != cols.size()) {
    throw ShapeError("affinity: id and feature lists differ in length");
  }
  AffinityMatrix m;
  m.rows.assign(row_ids.begin(), row_ids.end());
  m.cols.assign(col_ids.begin(), col_ids.end());
  m.values.resize(rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m.values[r * cols.size() + c] = row_ids[r] == col_ids[c] ? self_sim(*rows[r]) : sim(*rows[r], *cols[c]);
    }
  }
  return m;
}

}  // namespace

AffinityMatrix cosine_affinity(std::span<const SampleId> row_ids, std::span<const std::vector<float>* const> row_vecs,
                               std::span<const SampleId> col_ids, std::span<const std::vector<float>* const> col_vecs) {
  return build(row_ids, row_vecs, col_ids, col_vecs, [](const std::vector<float>& a, const std::vector<float>& b) {
    return cosine_similarity(a, b);
  }, [](const std::vector<float>& a) {
    return kernels::active().dot(a.data(), a.data(), a.size()) < 1e-24 ? 0.0 : 1.0;
  });
}

AffinityMatrix content_affinity(std::span<const SampleId> row_ids, std::span<const Tensor* const> row_resp,
                                std::span<const SampleId> col_ids, std::span<const Tensor* const> col_resp) {
  return build(row_ids, row_resp, col_ids, col_resp, [](const Tensor& a, const Tensor& b) {
    return distance_to_similarity(content_distance(a, b));
  }, [](const Tensor&) { return 1.0; });
}

}  // namespace alseg::affinity
