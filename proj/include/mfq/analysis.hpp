#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfq/population.hpp"
#include "mfq/questionnaire.hpp"

namespace mfq {

// ---------------------------------------------------------------------------
// Catch items
// ---------------------------------------------------------------------------

/// A sample is flagged when the relevance catch scores above `relevance_max` or the
/// agreement catch scores below `agreement_min`.
struct CatchPolicy {
  int relevance_max = 3;
  int agreement_min = 3;
};

/// "relevance_max=3,agreement_min=3"; either key may be omitted. Throws ConfigError.
CatchPolicy parse_catch_policy(std::string_view spec);

struct CatchVerdict {
  bool valid = true;
  std::vector<std::string> reasons;
};

/// Throws ContractViolation for a Partial sample.
CatchVerdict catch_validity(const SurveySample& sample, const Questionnaire& q, const CatchPolicy& policy = {});

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

enum class VarianceEstimator { Population, Sample };  // divide by N or N-1
enum class ScoreAggregation { Mean, Sum };

struct AnalysisOptions {
  bool include_partial = false;
  /// When set, samples flagged by this policy are left out.
  std::optional<CatchPolicy> exclude_flagged;
  VarianceEstimator estimator = VarianceEstimator::Population;
  ScoreAggregation aggregation = ScoreAggregation::Mean;
};

/// Samples that count for analysis of `item_id` (or of whole samples when empty).
std::vector<const SurveySample*> included_samples(const Population& p, const Questionnaire& q,
                                                  const AnalysisOptions& options,
                                                  std::string_view item_id = {});

// ---------------------------------------------------------------------------
// Variance
// ---------------------------------------------------------------------------

/// Variance of one item's scores over the included samples.
/// Throws EmptyPopulationError when no sample is included.
double question_variance(const Population& p, std::string_view item_id, const Questionnaire& q,
                         const AnalysisOptions& options = {});

enum class Grouping { Model, Persona, ModelPersona, FoundationPersona, QuestionModel, QuestionPersona };

std::string_view to_string(Grouping g);
std::optional<Grouping> parse_grouping(std::string_view s);

struct VarianceCell {
  std::string row;
  std::string column;  // empty for one-dimensional groupings
  double value = 0.0;
  std::size_t pairs = 0;  // (population, item) pairs averaged
};

/// Unweighted means of question variances. Scored and catch items are kept apart.
struct VarianceTable {
  Grouping grouping = Grouping::Model;
  std::vector<VarianceCell> scored;
  std::vector<VarianceCell> catch_items;
  std::vector<std::string> warnings;

  std::optional<double> scored_value(std::string_view row, std::string_view column = {}) const;
  std::optional<double> catch_value(std::string_view row, std::string_view column = {}) const;
};

/// Groups with no usable (population, item) pair are omitted and noted in `warnings`.
VarianceTable aggregate_variance(const std::vector<Population>& populations, Grouping grouping,
                                 const Questionnaire& q, const AnalysisOptions& options = {});

/// Sort rank for persona ids: none/unmodified, liberal, moderate, conservative, then others.
int persona_rank(std::string_view persona_id);

// ---------------------------------------------------------------------------
// Foundation scores and cross-alignment
// ---------------------------------------------------------------------------

/// Indexed by Foundation in instrument order.
using FoundationScores = std::array<double, 5>;

/// Mean (or sum) of each foundation's six item scores; catch items excluded.
/// Throws ContractViolation for a Partial sample.
FoundationScores sample_foundation_scores(const SurveySample& sample, const Questionnaire& q,
                                          ScoreAggregation aggregation = ScoreAggregation::Mean);

/// Per-foundation mean over included samples. Throws EmptyPopulationError.
FoundationScores population_foundation_scores(const Population& p, const Questionnaire& q,
                                              const AnalysisOptions& options = {});

/// Sum over foundations of |a_f - b_f|.
double cross_distance(const FoundationScores& a, const FoundationScores& b);

struct HumanReferenceGroup {
  std::string origin;
  std::string ideology;
  FoundationScores scores{};
  std::string source;

  std::string label() const { return origin + " " + ideology; }
};

struct HumanReferenceSet {
  ScoreAggregation aggregation = ScoreAggregation::Mean;
  std::vector<HumanReferenceGroup> groups;
};

/// YAML document: optional `aggregation: mean|sum`, then `references:` records with
/// origin, ideology, harm, fairness, loyalty, authority, purity, source.
HumanReferenceSet load_human_references(std::string_view source);
HumanReferenceSet load_human_references_file(const std::filesystem::path& path);

struct CrossAlignmentMatrix {
  std::vector<Cell> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> entries;  // entries[row][column]
  std::vector<std::size_t> closest;          // per-row argmin column, first on ties
};

/// Rows sorted by model name then persona rank.
CrossAlignmentMatrix cross_matrix(const std::vector<Population>& populations,
                                  const HumanReferenceSet& references, const Questionnaire& q,
                                  const AnalysisOptions& options = {});

}  // namespace mfq
