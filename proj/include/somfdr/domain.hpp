#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "somfdr/error.hpp"

namespace somfdr {

struct MutationType {
  std::string label;
  double gamma1 = 0.0;  // passenger rate per nucleotide, discovery stage
  double gamma2 = 0.0;  // passenger rate per nucleotide, validation stage

  friend bool operator==(const MutationType&, const MutationType&) = default;
};

/// The M mutation contexts and their per-stage passenger rates.
class MutationTypeTable {
 public:
  MutationTypeTable() = default;

  explicit MutationTypeTable(std::vector<MutationType> types) : types_(std::move(types)) {
    if (types_.empty()) fail(errc::input, "rate table must contain at least one mutation type");
    std::unordered_set<std::string> seen;
    for (const auto& t : types_) {
      if (t.label.empty()) fail(errc::parse, "empty mutation type label");
      if (!(t.gamma1 > 0.0 && t.gamma1 < 1.0) || !(t.gamma2 > 0.0 && t.gamma2 < 1.0))
        fail(errc::domain, "rates for type '" + t.label + "' must lie in (0, 1)");
      if (!seen.insert(t.label).second) fail(errc::duplicate, "duplicate mutation type label '" + t.label + "'");
    }
  }

  std::size_t size() const noexcept { return types_.size(); }
  bool empty() const noexcept { return types_.empty(); }
  const MutationType& operator[](std::size_t m) const { return types_[m]; }
  std::span<const MutationType> types() const noexcept { return types_; }

  std::optional<std::size_t> find(std::string_view label) const {
    for (std::size_t m = 0; m < types_.size(); ++m)
      if (types_[m].label == label) return m;
    return std::nullopt;
  }

  friend bool operator==(const MutationTypeTable&, const MutationTypeTable&) = default;

 private:
  std::vector<MutationType> types_;
};

using Counts = std::vector<std::int64_t>;

/// Collapsed per-gene coverages and mutation counts, one entry per mutation type.
struct GeneRecord {
  std::string gene_id;
  Counts cov1, cov2, x1, x2;

  std::int64_t total_x1() const { return std::accumulate(x1.begin(), x1.end(), std::int64_t{0}); }
  std::int64_t total_x2() const { return std::accumulate(x2.begin(), x2.end(), std::int64_t{0}); }
  /// Sequenced in the validation stage.
  bool screened_in() const { return total_x1() > 0; }

  friend bool operator==(const GeneRecord&, const GeneRecord&) = default;
};

inline void validate_gene(const GeneRecord& g, std::size_t n_types) {
  if (g.gene_id.empty()) fail(errc::parse, "empty gene id");
  if (g.cov1.size() != n_types || g.cov2.size() != n_types || g.x1.size() != n_types ||
      g.x2.size() != n_types)
    fail(errc::length_mismatch, "gene '" + g.gene_id + "' does not have " + std::to_string(n_types) +
                                    " entries per vector");
  for (std::size_t m = 0; m < n_types; ++m) {
    if (g.cov1[m] < 0 || g.cov2[m] < 0 || g.x1[m] < 0 || g.x2[m] < 0)
      fail(errc::domain, "gene '" + g.gene_id + "' has a negative count or coverage");
    if (g.x1[m] > g.cov1[m] || g.x2[m] > g.cov2[m])
      fail(errc::exceeds_coverage, "gene '" + g.gene_id + "' has more mutations than covered nucleotides");
  }
  if (g.total_x1() == 0 && g.total_x2() != 0)
    fail(errc::screening, "gene '" + g.gene_id + "' has validation mutations but none in discovery");
}

struct DatasetMeta {
  std::int64_t n_tumors_stage1 = 0;
  std::int64_t n_tumors_stage2 = 0;
  std::string description;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  MutationTypeTable rates;
  std::vector<GeneRecord> genes;
  DatasetMeta meta;

  std::size_t n_genes() const noexcept { return genes.size(); }
  std::size_t n_types() const noexcept { return rates.size(); }

  void validate() const {
    std::unordered_set<std::string_view> ids;
    for (const auto& g : genes) {
      validate_gene(g, rates.size());
      if (!ids.insert(g.gene_id).second) fail(errc::duplicate, "duplicate gene id '" + g.gene_id + "'");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ScenarioOrigin {
  std::int64_t mcmc_iteration = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ScenarioOrigin&, const ScenarioOrigin&) = default;
};

/// One genome-wide draw of gene effects; theta == 1 exactly marks a passenger.
struct Scenario {
  std::vector<std::string> gene_ids;  // may be empty when aligned to a dataset by position
  std::vector<double> theta;
  ScenarioOrigin origin;

  std::size_t size() const noexcept { return theta.size(); }
  bool is_driver(std::size_t g) const { return theta[g] > 1.0; }

  std::vector<bool> driver_mask() const {
    std::vector<bool> mask(theta.size());
    for (std::size_t g = 0; g < theta.size(); ++g) mask[g] = theta[g] > 1.0;
    return mask;
  }

  std::size_t n_drivers() const {
    std::size_t n = 0;
    for (double t : theta) n += t > 1.0;
    return n;
  }

  void validate() const {
    if (!gene_ids.empty() && gene_ids.size() != theta.size())
      fail(errc::length_mismatch, "scenario gene ids and effects differ in length");
    for (double t : theta)
      if (!(t >= 1.0) || !std::isfinite(t)) fail(errc::domain, "scenario effect must be finite and >= 1");
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Genes with 0, 1 or more than 1 discovery mutations, and the same split of
/// validation mutations among genes that went on to the validation stage.
struct StageSummary {
  std::array<std::int64_t, 3> discovery{};
  std::array<std::int64_t, 3> validation{};

  std::array<std::int64_t, 6> flat() const {
    return {discovery[0], discovery[1], discovery[2], validation[0], validation[1], validation[2]};
  }

  friend bool operator==(const StageSummary&, const StageSummary&) = default;
};

inline constexpr std::array<const char*, 6> kSummaryNames = {"disc_0", "disc_1", "disc_gt1",
                                                             "val_0",  "val_1",  "val_gt1"};

inline int count_bucket(std::int64_t n) { return n == 0 ? 0 : (n == 1 ? 1 : 2); }

inline StageSummary summary_counts(const Dataset& ds) {
  StageSummary s;
  for (const auto& g : ds.genes) {
    const auto n1 = g.total_x1();
    ++s.discovery[count_bucket(n1)];
    if (n1 > 0) ++s.validation[count_bucket(g.total_x2())];
  }
  return s;
}

}  // namespace somfdr
