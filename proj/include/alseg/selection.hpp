#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "alseg/affinity.hpp"
#include "alseg/tensor.hpp"

namespace alseg::selection {

// Query strategies. "Minus" variants are two-step (uncertainty filter, then
// set cover); "Plus" variants combine rankings with a Borda count.
enum class Variant {
  kRand,
  kUnc,
  kUncMinusId,
  kUncPlusId,
  kUncMinusCd,
  kUncPlusCd,
  kUncMinusEcd,
  kUncPlusEcd,
};

// How representativeness is measured.
enum class Representation {
  kNone,
  kDescriptor,  // cosine of spatially pooled descriptors
  kContent,     // 1/(1+d_cont) of full abstraction responses
};

std::string_view to_string(Variant v);
// Accepts the names produced by to_string ("RAND", "UNC", "UNC-ID", "UNC+ECD", ...).
Variant parse_variant(std::string_view name);
std::span<const Variant> all_variants();

struct Strategy {
  Variant variant = Variant::kUncPlusEcd;
  std::size_t n_unc = 16;
  std::size_t n_rep = 8;

  bool two_step() const noexcept;
  bool ranking() const noexcept;
  Representation representation() const noexcept;
  // ECD variants need a model trained with the entropy term.
  bool requires_entropy() const noexcept;
  // ID/CD variants need a model trained without it.
  bool forbids_entropy() const noexcept;

  // Throws ConfigError when n_rep > n_unc for two-step variants, a count is
  // zero, or the training lambda does not match the variant.
  void validate(double trained_lambda) const;
};

enum class Direction { kHigherIsBetter, kLowerIsBetter };

// Ordinal 0-based ranks (0 = best); ties go to the smaller index.
std::vector<std::size_t> rank(std::span<const double> scores, Direction direction);

// Indices of the k smallest rank sums, in ascending (sum, index) order.
std::vector<std::size_t> borda_select(std::span<const std::vector<std::size_t>> metric_ranks, std::size_t k);

struct CoverSelection {
  std::vector<SampleId> ids;   // selection order
  std::vector<double> gains;   // marginal coverage gain of each pick
  double coverage = 0.0;       // F(selected)
};

// F(S) = sum over columns of max(0, max_{i in S} sim(i, j)).
double coverage(const affinity::AffinityMatrix& affinity, std::span<const SampleId> selected);

// Greedy maximization of F over `candidates` (each must be an affinity row).
// Largest marginal gain first; ties to the smallest sample id.
CoverSelection greedy_max_cover(std::span<const SampleId> candidates, const affinity::AffinityMatrix& affinity,
                                std::size_t k);

// Row sums of the affinity for each candidate: how much of the pool a single
// sample covers on its own.
std::vector<double> representativeness_scores(std::span<const SampleId> candidates,
                                              const affinity::AffinityMatrix& affinity);

// Everything the strategies may look at, aligned by position. ids must be
// strictly increasing. descriptors/responses may be left empty when the
// strategy does not need them.
struct PoolFeatures {
  std::vector<SampleId> ids;
  std::vector<double> uncertainty;
  std::vector<std::vector<float>> descriptors;
  std::vector<Tensor> responses;
};

struct Diagnostics {
  SampleId id = 0;
  double uncertainty = 0.0;
  std::optional<double> representativeness;
  std::size_t uncertainty_rank = 0;
  std::optional<std::size_t> representativeness_rank;
  std::size_t combined_rank = 0;
};

struct QueryBatch {
  Variant variant = Variant::kRand;
  std::vector<SampleId> ids;
  std::vector<Diagnostics> diagnostics;  // parallel to ids
};

// Selects min(n_rep, pool size) samples. Only RAND consumes the seed.
QueryBatch query(const Strategy& strategy, const PoolFeatures& pool, double trained_lambda, std::uint64_t seed);

}  // namespace alseg::selection
