#include "alseg/selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>

#include "alseg/error.hpp"
#include "alseg/rng.hpp"

namespace alseg::selection {
namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 8> kNames{{
    {Variant::kRand, "RAND"},
    {Variant::kUnc, "UNC"},
    {Variant::kUncMinusId, "UNC-ID"},
    {Variant::kUncPlusId, "UNC+ID"},
    {Variant::kUncMinusCd, "UNC-CD"},
    {Variant::kUncPlusCd, "UNC+CD"},
    {Variant::kUncMinusEcd, "UNC-ECD"},
    {Variant::kUncPlusEcd, "UNC+ECD"},
}};

constexpr std::array<Variant, 8> kAll{Variant::kRand,       Variant::kUnc,       Variant::kUncMinusId,
                                      Variant::kUncPlusId,  Variant::kUncMinusCd, Variant::kUncPlusCd,
                                      Variant::kUncMinusEcd, Variant::kUncPlusEcd};

std::unordered_map<SampleId, std::size_t> row_index(const affinity::AffinityMatrix& affinity) {
  std::unordered_map<SampleId, std::size_t> index;
  for (std::size_t r = 0; r < affinity.rows.size(); ++r) index.emplace(affinity.rows[r], r);
  return index;
}

std::size_t lookup_row(const std::unordered_map<SampleId, std::size_t>& index, SampleId id) {
  const auto it = index.find(id);
  if (it == index.end()) throw InputError("affinity has no row for sample " + std::to_string(id));
  return it->second;
}

affinity::AffinityMatrix build_affinity(Representation rep, const PoolFeatures& pool,
                                        std::span<const std::size_t> row_positions) {
  std::vector<SampleId> row_ids;
  row_ids.reserve(row_positions.size());
  for (const std::size_t p : row_positions) row_ids.push_back(pool.ids[p]);

  if (rep == Representation::kDescriptor) {
    if (pool.descriptors.size() != pool.ids.size()) throw InputError("query: descriptors missing for pool");
    std::vector<const std::vector<float>*> rows, cols;
    for (const std::size_t p : row_positions) rows.push_back(&pool.descriptors[p]);
    for (const auto& d : pool.descriptors) cols.push_back(&d);
    return affinity::cosine_affinity(row_ids, rows, pool.ids, cols);
  }
  if (pool.responses.size() != pool.ids.size()) throw InputError("query: abstraction responses missing for pool");
  std::vector<const Tensor*> rows, cols;
  for (const std::size_t p : row_positions) rows.push_back(&pool.responses[p]);
  for (const auto& r : pool.responses) cols.push_back(&r);
  return affinity::content_affinity(row_ids, rows, pool.ids, cols);
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& [variant, name] : kNames) {
    if (variant == v) return name;
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kNames) {
    if (n == name) return variant;
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected RAND, UNC, UNC-ID, UNC+ID, UNC-CD, UNC+CD, UNC-ECD or UNC+ECD)");
}

std::span<const Variant> all_variants() { return kAll; }

bool Strategy::two_step() const noexcept {
  return variant == Variant::kUncMinusId || variant == Variant::kUncMinusCd || variant == Variant::kUncMinusEcd;
}

bool Strategy::ranking() const noexcept {
  return variant == Variant::kUncPlusId || variant == Variant::kUncPlusCd || variant == Variant::kUncPlusEcd;
}

Representation Strategy::representation() const noexcept {
  switch (variant) {
    case Variant::kUncMinusId:
    case Variant::kUncPlusId:
      return Representation::kDescriptor;
    case Variant::kUncMinusCd:
    case Variant::kUncPlusCd:
    case Variant::kUncMinusEcd:
    case Variant::kUncPlusEcd:
      return Representation::kContent;
    default:
      return Representation::kNone;
  }
}

bool Strategy::requires_entropy() const noexcept {
  return variant == Variant::kUncMinusEcd || variant == Variant::kUncPlusEcd;
}

bool Strategy::forbids_entropy() const noexcept {
  return variant == Variant::kUncMinusId || variant == Variant::kUncPlusId || variant == Variant::kUncMinusCd ||
         variant == Variant::kUncPlusCd;
}

void Strategy::validate(double trained_lambda) const {
  const std::string name(to_string(variant));
  if (n_rep == 0) throw ConfigError("strategy.n_rep must be positive");
  if (two_step() && n_unc < n_rep) {
    throw ConfigError("strategy.n_unc (" + std::to_string(n_unc) + ") must be >= n_rep (" +
                      std::to_string(n_rep) + ") for " + name);
  }
  if (requires_entropy() && !(trained_lambda > 0.0)) {
    throw ConfigError(name + " requires a model trained with lambda > 0");
  }
  if (forbids_entropy() && trained_lambda != 0.0) {
    throw ConfigError(name + " requires a model trained with lambda = 0");
  }
}

std::vector<std::size_t> rank(std::span<const double> scores, Direction direction) {
  for (const double s : scores) {
    if (std::isnan(s)) throw InputError("rank: NaN score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return direction == Direction::kHigherIsBetter ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r;
  return ranks;
}

std::vector<std::size_t> borda_select(std::span<const std::vector<std::size_t>> metric_ranks, std::size_t k) {
  if (metric_ranks.empty()) throw InputError("borda_select: no metrics");
  const std::size_t n = metric_ranks.front().size();
  for (const auto& r : metric_ranks) {
    if (r.size() != n) throw ShapeError("borda_select: rank vectors differ in length");
  }
  if (k > n) throw InputError("borda_select: k exceeds candidate count");
  std::vector<std::size_t> sums(n, 0);
  for (const auto& r : metric_ranks) {
    for (std::size_t i = 0; i < n; ++i) sums[i] += r[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sums[a] < sums[b]; });
  order.resize(k);
  return order;
}

double coverage(const affinity::AffinityMatrix& affinity, std::span<const SampleId> selected) {
  const auto index = row_index(affinity);
  std::vector<double> best(affinity.cols.size(), 0.0);
  for (const SampleId id : selected) {
    const auto row = affinity.row(lookup_row(index, id));
    for (std::size_t j = 0; j < best.size(); ++j) best[j] = std::max(best[j], row[j]);
  }
  return std::accumulate(best.begin(), best.end(), 0.0);
}

CoverSelection greedy_max_cover(std::span<const SampleId> candidates, const affinity::AffinityMatrix& affinity,
                                std::size_t k) {
  if (k == 0) return {};
  if (candidates.empty()) throw InputError("greedy_max_cover: empty candidate set");
  if (k > candidates.size()) throw InputError("greedy_max_cover: k exceeds candidate count");
  const auto index = row_index(affinity);
  std::vector<std::size_t> rows;
  rows.reserve(candidates.size());
  for (const SampleId id : candidates) {
    const std::size_t r = lookup_row(index, id);
    for (const double v : affinity.row(r)) {
      if (!std::isfinite(v)) throw InputError("greedy_max_cover: non-finite affinity");
    }
    rows.push_back(r);
  }

  std::vector<double> best(affinity.cols.size(), 0.0);
  std::vector<bool> taken(candidates.size(), false);
  CoverSelection out;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t pick = candidates.size();
    double pick_gain = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (taken[c]) continue;
      const auto row = affinity.row(rows[c]);
      double gain = 0.0;
      for (std::size_t j = 0; j < best.size(); ++j) gain += std::max(0.0, row[j] - best[j]);
      if (pick == candidates.size() || gain > pick_gain ||
          (gain == pick_gain && candidates[c] < candidates[pick])) {
        pick = c;
        pick_gain = gain;
      }
    }
    taken[pick] = true;
    const auto row = affinity.row(rows[pick]);
    for (std::size_t j = 0; j < best.size(); ++j) best[j] = std::max(best[j], row[j]);
    out.ids.push_back(candidates[pick]);
    out.gains.push_back(pick_gain);
  }
  out.coverage = std::accumulate(best.begin(), best.end(), 0.0);
  return out;
}

std::vector<double> representativeness_scores(std::span<const SampleId> candidates,
                                              const affinity::AffinityMatrix& affinity) {
  const auto index = row_index(affinity);
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const SampleId id : candidates) {
    const auto row = affinity.row(lookup_row(index, id));
    scores.push_back(std::accumulate(row.begin(), row.end(), 0.0));
  }
  return scores;
}

QueryBatch query(const Strategy& strategy, const PoolFeatures& pool, double trained_lambda, std::uint64_t seed) {
  strategy.validate(trained_lambda);
  const std::size_t n = pool.ids.size();
  if (n == 0) throw InputError("query: pool is empty");
  if (pool.uncertainty.size() != n) throw ShapeError("query: uncertainty scores do not match pool");
  for (std::size_t i = 1; i < n; ++i) {
    if (pool.ids[i] <= pool.ids[i - 1]) throw InputError("query: pool ids must be strictly increasing");
  }

  const std::size_t n_rep = std::min(strategy.n_rep, n);
  const std::vector<std::size_t> unc_rank = rank(pool.uncertainty, Direction::kHigherIsBetter);
  std::vector<std::size_t> by_uncertainty(n);
  for (std::size_t i = 0; i < n; ++i) by_uncertainty[unc_rank[i]] = i;

  QueryBatch batch;
  batch.variant = strategy.variant;
  auto emit = [&](std::size_t pos, std::size_t combined, std::optional<double> rep, std::optional<std::size_t> rep_rank) {
    batch.ids.push_back(pool.ids[pos]);
    batch.diagnostics.push_back({pool.ids[pos], pool.uncertainty[pos], rep, unc_rank[pos], rep_rank, combined});
  };

  if (strategy.variant == Variant::kRand) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first n_rep slots are a uniform draw.
    for (std::size_t i = 0; i < n_rep; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(order[i], order[j]);
      emit(order[i], i, std::nullopt, std::nullopt);
    }
    return batch;
  }

  if (strategy.variant == Variant::kUnc) {
    for (std::size_t i = 0; i < n_rep; ++i) emit(by_uncertainty[i], i, std::nullopt, std::nullopt);
    return batch;
  }

  const Representation rep = strategy.representation();
  if (strategy.two_step()) {
    const std::size_t n_unc = std::min(strategy.n_unc, n);
    const std::span<const std::size_t> shortlist(by_uncertainty.data(), n_unc);
    const affinity::AffinityMatrix aff = build_affinity(rep, pool, shortlist);
    const CoverSelection cover = greedy_max_cover(aff.rows, aff, n_rep);
    std::unordered_map<SampleId, std::size_t> position;
    for (std::size_t i = 0; i < n; ++i) position.emplace(pool.ids[i], i);
    for (std::size_t i = 0; i < cover.ids.size(); ++i) emit(position.at(cover.ids[i]), i, cover.gains[i], i);
    return batch;
  }

  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), std::size_t{0});
  const affinity::AffinityMatrix aff = build_affinity(rep, pool, everyone);
  const std::vector<double> rep_scores = representativeness_scores(pool.ids, aff);
  const std::vector<std::size_t> rep_rank = rank(rep_scores, Direction::kHigherIsBetter);
  const std::vector<std::vector<std::size_t>> ranks{unc_rank, rep_rank};
  for (const std::size_t pos : borda_select(ranks, n_rep)) {
    emit(pos, unc_rank[pos] + rep_rank[pos], rep_scores[pos], rep_rank[pos]);
  }
  return batch;
}

}  // namespace alseg::selection
