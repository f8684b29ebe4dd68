#pragma once

// Command-line workflows. Everything the `kite` executable does lives here so
// that tests can drive the same code in-process.

#include "kite/estimators.hpp"
#include "kite/evaluation.hpp"
#include "kite/kernel.hpp"
#include "kite/random_features.hpp"
#include "kite/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace kite::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDegenerate = 3;

/// git-describe string captured at configure time.
std::string version();

struct RunConfig {
    std::string command;
    KernelKind kernel = KernelKind::linear();
    /// Features wider than this are PCA-reduced; 0 disables the reduction.
    long long pca_dim = 32;
    long long probe_size = 500;
    std::vector<std::string> estimators{"kite"};
    /// Used when an estimator is named "combo" / "knn" without an argument.
    double lambda = 1.0;
    int k = 1;
    std::vector<long long> hidden_widths{512, 256};
    InitScheme init = InitScheme::he_normal;
    int random_seeds = 5;
    std::vector<std::uint64_t> seeds{0};

    // score / rank
    std::string features;
    std::string labels;
    std::string random;
    long long layers = 0;
    long long source_size = 0;
    std::string manifest;
    std::string target_id = "target";
    std::string target_features;
    std::string target_labels;
    // eval
    std::string targets;
    std::string ground_truth;
    std::string out;

    /// Not part of the echoed configuration: results never depend on it.
    int jobs = 1;

    /// Throws ConfigError.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Estimator names with default arguments filled in from lambda / k.
    [[nodiscard]] std::vector<std::string> resolved_estimators() const;
};

/// PCA to `pca_dim` components when the features are wider (k capped at n - 1).
FeatureMatrix reduce_dim(const FeatureMatrix &features, long long pca_dim);

/// Probe rows of a target pool, seeded per (seed, target_id).
std::vector<std::size_t> probe_indices(const LabelVector &labels, long long probe_size, std::uint64_t seed,
                                       const std::string &target_id, std::vector<std::string> *warnings = nullptr);

/// Untrained-network reference for a probe: averaged random MLP over the raw
/// probe inputs with output_dim = `output_dim`, then the same reduction as the
/// pretrained side.
FeatureMatrix random_reference(const FeatureMatrix &raw_probe, Eigen::Index output_dim, const RunConfig &config,
                               std::uint64_t seed, const std::string &target_id);

/// Shortest round-trip decimal, always with a decimal point or exponent.
std::string format_score(double value);

int cmd_score(const RunConfig &config, std::ostream &out, std::ostream &err);
int cmd_rank(const RunConfig &config, std::ostream &out, std::ostream &err);
int cmd_eval(const RunConfig &config, std::ostream &out, std::ostream &err);

struct SynthConfig {
    std::string mode;  ///< gaussian | zoo | hard
    std::string out;
    std::uint64_t seed = 0;
    // gaussian
    double separation = 2.0;
    long long n = 500;
    long long dim = 2;
    // zoo / hard
    int models = 8;
    std::string suite = "mixed";  ///< easy | hard | mixed
    long long feature_dim = 32;
    int classes = 20;
    double hard_separation = 0.3;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

int cmd_synth(const SynthConfig &config, std::ostream &out, std::ostream &err);

/// Full command line: `kite <score|rank|eval|synth> [flags]`. Flags missing
/// from the command line are taken from --config FILE (JSON object keyed by
/// flag name) when present. KITE_JOBS sets the default of --jobs.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace kite::cli
