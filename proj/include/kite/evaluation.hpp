#pragma once

// Evaluation protocol: correlation between estimator scores and ground-truth
// transfer accuracies, per target and averaged over targets.

#include "kite/kernel.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kite {

/// Sample Pearson correlation. Throws TooFewItems (n < 3), ShapeMismatch, or
/// ConstantSeries when either series has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Weighted Kendall tau with additive hyperbolic weights. Items are ranked by
/// descending truth (rank 0 = best, tied truths share their average rank);
/// the pair (i, j) carries weight 1/(1+r_i) + 1/(1+r_j) and agreement
/// sign(s_i - s_j) * sign(t_i - t_j). Pairs tied in both series are dropped.
/// Throws TooFewItems (n < 2) or ConstantSeries when every pair is dropped.
double weighted_kendall_tau(std::span<const double> scores, std::span<const double> truth);

/// Average descending ranks: 0 for the largest value, ties averaged.
std::vector<double> descending_ranks(std::span<const double> values);

inline constexpr const char *kTauScheme = "additive-hyperbolic: w(i,j)=1/(1+r_i)+1/(1+r_j), r from descending truth, ties average rank";

enum class AccuracyUnit { fraction, percent };
std::string to_string(AccuracyUnit unit);

struct ScoreRow {
    std::string model_id;
    std::string target_id;
    std::map<std::string, double> scores;  ///< estimator name -> score
    double accuracy = 0.0;                 ///< ground truth, in the table's unit
};

class ScoreTable {
public:
    explicit ScoreTable(AccuracyUnit unit = AccuracyUnit::fraction) : unit_(unit) {}

    /// Throws SchemaError on a duplicate (model_id, target_id).
    void add(ScoreRow row);

    [[nodiscard]] AccuracyUnit unit() const noexcept { return unit_; }
    [[nodiscard]] const std::vector<ScoreRow> &rows() const noexcept { return rows_; }
    /// Sorted, distinct target ids.
    [[nodiscard]] std::vector<std::string> targets() const;
    /// Rows of one target ordered by model_id.
    [[nodiscard]] std::vector<const ScoreRow *> rows_for(const std::string &target_id) const;

private:
    AccuracyUnit unit_;
    std::vector<ScoreRow> rows_;
    std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

struct TargetResult {
    std::string target_id;
    std::size_t num_models = 0;
    std::optional<double> pc;
    std::optional<double> tau;
    std::string status = "ok";  ///< "ok" or the reason the target was excluded
};

struct EvalReport {
    std::string estimator;
    AccuracyUnit unit = AccuracyUnit::fraction;
    std::vector<TargetResult> targets;
    double mean_pc = 0.0;
    double mean_tau = 0.0;
    std::size_t num_included = 0;
    std::vector<std::string> warnings;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Per-target PC and tau plus their unweighted means across targets. Targets
/// whose series are constant are excluded from the means with a warning.
/// Throws TooFewItems when a target has fewer than 3 models, and
/// ConstantSeries when no target is usable.
EvalReport te_aggregate(const ScoreTable &table, const std::string &estimator);

nlohmann::json report_to_json(const EvalReport &report);
/// Header "target_id,num_models,pc,tau,status", one row per target, then a MEAN row.
std::string report_to_csv(const EvalReport &report);

/// Pearson correlation between the TA and RA columns of a zoo.
double ta_ra_correlation(std::span<const std::pair<double, double>> ta_ra);

struct KernelHistogram {
    std::vector<double> edges;         ///< bins + 1 edges
    std::vector<std::size_t> counts;   ///< bins counts
    double q1 = 0.0;
    double q3 = 0.0;
    [[nodiscard]] double iqr() const noexcept { return q3 - q1; }
};

/// Histogram over the off-diagonal entries of K (n(n-1) values) with equal-width
/// bins spanning their range, plus quartiles (linear interpolation).
KernelHistogram kernel_value_histogram(const KernelMatrix &k, int bins);

}  // namespace kite
