#pragma once

// Transferability scores. Every estimator maps a ScoreRequest to one real;
// higher means the pretrained features are predicted to transfer better.

#include "kite/kernel.hpp"
#include "kite/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kite {

/// Architecture and dataset sizes used by the heuristic baseline.
struct ModelMeta {
    long long layers = 0;
    long long source_size = 0;
    long long target_size = 0;
};

struct ScoreRequest {
    std::optional<FeatureMatrix> pretrained;
    /// Seed-averaged untrained-network features on the same samples.
    std::optional<FeatureMatrix> random;
    std::optional<LabelVector> labels;
    KernelKind kernel = KernelKind::linear();
    std::optional<ModelMeta> meta;
};

enum class EstimatorKind { kite, ta, ra, linear_combo, hsic, heuristic, knn_cv };

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::kite;
    double lambda = 0.0;  ///< linear_combo only
    int k = 1;            ///< knn_cv only

    /// "kite", "ta", "ra", "combo:<lambda>", "hsic", "heuristic", "knn:<k>".
    static EstimatorSpec parse(const std::string &name);
    [[nodiscard]] std::string to_string() const;
};

/// Inputs an estimator needs from a ScoreRequest.
struct EstimatorNeeds {
    bool pretrained = false;
    bool random = false;
    bool labels = false;
    bool meta = false;
};

class Estimator {
public:
    virtual ~Estimator() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual EstimatorNeeds needs() const = 0;
    /// Throws ConfigError when a required input is missing.
    [[nodiscard]] virtual double score(const ScoreRequest &request) const = 0;
};

using EstimatorFactory = std::function<std::unique_ptr<Estimator>(const std::string &argument)>;

/// Registers an estimator under `prefix`. Names are looked up as "<prefix>" or
/// "<prefix>:<argument>". Re-registering a prefix replaces the factory.
void register_estimator(const std::string &prefix, EstimatorFactory factory);
/// Throws ConfigError for unknown names.
std::unique_ptr<Estimator> make_estimator(const std::string &name);
std::vector<std::string> registered_estimators();

/// Convenience: make_estimator(name)->score(request).
double score(const std::string &estimator, const ScoreRequest &request);

// Individual scores. All of them propagate DegenerateKernel.

/// Target alignment: CKA(K_s, K_Y).
double score_ta(const FeatureMatrix &pretrained, const LabelVector &labels, const KernelKind &kind);
/// Random alignment: CKA(K_s, K_random).
double score_ra(const FeatureMatrix &pretrained, const FeatureMatrix &random, const KernelKind &kind);

/// Floor below which RA is rejected as a KITE denominator.
inline constexpr double kRaFloor = 1e-12;

/// TA / RA from precomputed terms. Throws DegenerateRA when ra < kRaFloor.
double kite_ratio(double ta, double ra);
/// KITE = TA / RA. Requires pretrained, random and labels.
double score_kite(const ScoreRequest &request);
/// TA - lambda * RA.
double score_linear_combo(const ScoreRequest &request, double lambda);
/// HSIC(K_s, K_random).
double score_hsic_alt(const FeatureMatrix &pretrained, const FeatureMatrix &random, const KernelKind &kind);
/// layers + ln(source_size + target_size).
double score_heuristic(const ModelMeta &meta);
/// Leave-one-out k-NN accuracy under Euclidean distance. Distance ties are
/// resolved by sample index, vote ties by the smallest class id.
/// Throws TooFewSamples unless n > k.
double score_knn_cv(const FeatureMatrix &pretrained, const LabelVector &labels, int k);

}  // namespace kite
