#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alseg/tensor.hpp"

namespace alseg {

using SampleId = std::int32_t;

namespace affinity {

// Similarity between candidate samples (rows) and pool samples (cols);
// higher means more similar.
struct AffinityMatrix {
  std::vector<SampleId> rows;
  std::vector<SampleId> cols;
  std::vector<double> values;  // row-major, rows.size() x cols.size()

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols.size() + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols.size(), cols.size());
  }
};

// dot(a, b) / (|a| |b|), or 0 when either norm is below 1e-12.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Mean squared difference over all elements of two equally shaped responses.
double content_distance(const Tensor& a, const Tensor& b);

// 1 / (1 + d), mapping a distance in [0, inf) onto (0, 1].
double distance_to_similarity(double d);

// Per-location Shannon entropy (nats) of the channel distribution
// p_c = (a_c + eps) / sum_c (a_c + eps) of a non-negative [C,H,W] tensor.
Tensor channel_entropy_map(const Tensor& abst);

// Cosine similarities between descriptor vectors. row_vecs[i] belongs to
// row_ids[i]; likewise for columns.
AffinityMatrix cosine_affinity(std::span<const SampleId> row_ids, std::span<const std::vector<float>* const> row_vecs,
                               std::span<const SampleId> col_ids, std::span<const std::vector<float>* const> col_vecs);

// distance_to_similarity(content_distance(.)) between abstraction responses.
AffinityMatrix content_affinity(std::span<const SampleId> row_ids, std::span<const Tensor* const> row_resp,
                                std::span<const SampleId> col_ids, std::span<const Tensor* const> col_resp);

}  // namespace affinity
}  // namespace alseg
