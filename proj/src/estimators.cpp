#include "kite/estimators.hpp"

#include "kite/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

namespace kite {

namespace {

const FeatureMatrix &need_pretrained(const ScoreRequest &r) {
    if (!r.pretrained) raise(ErrorCode::ConfigError, "pretrained features required");
    return *r.pretrained;
}

const FeatureMatrix &need_random(const ScoreRequest &r) {
    if (!r.random) raise(ErrorCode::ConfigError, "random features required");
    return *r.random;
}

const LabelVector &need_labels(const ScoreRequest &r) {
    if (!r.labels) raise(ErrorCode::ConfigError, "labels required");
    return *r.labels;
}

void check_rows(const FeatureMatrix &f, std::size_t n, const char *what) {
    if (static_cast<std::size_t>(f.n()) != n) {
        raise(ErrorCode::ShapeMismatch, std::string(what) + " has " + std::to_string(f.n()) +
                                            " rows, expected " + std::to_string(n));
    }
}

struct AlignmentTerms {
    double ta = 0.0;
    double ra = 0.0;
};

// Both terms share one K_s; TA and RA computed here are bit-identical to
// score_ta/score_ra on the same inputs.
AlignmentTerms alignment_terms(const ScoreRequest &r) {
    const auto &pre = need_pretrained(r);
    const auto &rnd = need_random(r);
    const auto &labels = need_labels(r);
    check_rows(pre, labels.size(), "pretrained features");
    check_rows(rnd, labels.size(), "random features");
    const KernelMatrix ks = compute_kernel(pre, r.kernel);
    return {cka(ks, target_kernel(labels)), cka(ks, compute_kernel(rnd, r.kernel))};
}

double parse_double_arg(const std::string &arg, const std::string &name) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(arg, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (arg.empty() || used != arg.size() || !std::isfinite(v)) {
        raise(ErrorCode::ConfigError, "bad argument '" + arg + "' for estimator '" + name + "'");
    }
    return v;
}

int parse_int_arg(const std::string &arg, const std::string &name) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(arg, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (arg.empty() || used != arg.size() || v < 1) {
        raise(ErrorCode::ConfigError, "bad argument '" + arg + "' for estimator '" + name + "'");
    }
    return v;
}

void no_arg(const std::string &arg, const std::string &name) {
    if (!arg.empty()) raise(ErrorCode::ConfigError, "estimator '" + name + "' takes no argument");
}

class BuiltinEstimator final : public Estimator {
public:
    explicit BuiltinEstimator(EstimatorSpec spec) : spec_(spec) {}

    [[nodiscard]] std::string name() const override { return spec_.to_string(); }

    [[nodiscard]] EstimatorNeeds needs() const override {
        switch (spec_.kind) {
            case EstimatorKind::kite:
            case EstimatorKind::linear_combo: return {true, true, true, false};
            case EstimatorKind::ta:
            case EstimatorKind::knn_cv: return {true, false, true, false};
            case EstimatorKind::ra:
            case EstimatorKind::hsic: return {true, true, false, false};
            case EstimatorKind::heuristic: return {false, false, false, true};
        }
        return {};
    }

    [[nodiscard]] double score(const ScoreRequest &r) const override {
        switch (spec_.kind) {
            case EstimatorKind::kite: return score_kite(r);
            case EstimatorKind::ta:
                return score_ta(need_pretrained(r), need_labels(r), r.kernel);
            case EstimatorKind::ra:
                return score_ra(need_pretrained(r), need_random(r), r.kernel);
            case EstimatorKind::linear_combo: return score_linear_combo(r, spec_.lambda);
            case EstimatorKind::hsic:
                return score_hsic_alt(need_pretrained(r), need_random(r), r.kernel);
            case EstimatorKind::heuristic:
                if (!r.meta) raise(ErrorCode::ConfigError, "model metadata required");
                return score_heuristic(*r.meta);
            case EstimatorKind::knn_cv:
                return score_knn_cv(need_pretrained(r), need_labels(r), spec_.k);
        }
        raise(ErrorCode::ConfigError, "unhandled estimator");
    }

private:
    EstimatorSpec spec_;
};

struct Registry {
    std::mutex mutex;
    std::map<std::string, EstimatorFactory> factories;

    Registry() {
        const auto builtin = [](const std::string &prefix) {
            return [prefix](const std::string &arg) -> std::unique_ptr<Estimator> {
                return std::make_unique<BuiltinEstimator>(
                    EstimatorSpec::parse(arg.empty() ? prefix : prefix + ":" + arg));
            };
        };
        for (const char *prefix : {"kite", "ta", "ra", "combo", "hsic", "heuristic", "knn"}) {
            factories[prefix] = builtin(prefix);
        }
    }
};

Registry &registry() {
    static Registry r;
    return r;
}

}  // namespace

EstimatorSpec EstimatorSpec::parse(const std::string &name) {
    const auto colon = name.find(':');
    const std::string prefix = name.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : name.substr(colon + 1);
    if (colon != std::string::npos && arg.empty()) {
        raise(ErrorCode::ConfigError, "empty argument in estimator '" + name + "'");
    }
    EstimatorSpec spec;
    if (prefix == "kite") spec.kind = EstimatorKind::kite;
    else if (prefix == "ta") spec.kind = EstimatorKind::ta;
    else if (prefix == "ra") spec.kind = EstimatorKind::ra;
    else if (prefix == "hsic") spec.kind = EstimatorKind::hsic;
    else if (prefix == "heuristic") spec.kind = EstimatorKind::heuristic;
    else if (prefix == "combo") {
        spec.kind = EstimatorKind::linear_combo;
        spec.lambda = arg.empty() ? 1.0 : parse_double_arg(arg, prefix);
        return spec;
    } else if (prefix == "knn") {
        spec.kind = EstimatorKind::knn_cv;
        spec.k = arg.empty() ? 1 : parse_int_arg(arg, prefix);
        return spec;
    } else {
        raise(ErrorCode::ConfigError, "unknown estimator '" + name + "'");
    }
    no_arg(arg, prefix);
    return spec;
}

std::string EstimatorSpec::to_string() const {
    switch (kind) {
        case EstimatorKind::kite: return "kite";
        case EstimatorKind::ta: return "ta";
        case EstimatorKind::ra: return "ra";
        case EstimatorKind::hsic: return "hsic";
        case EstimatorKind::heuristic: return "heuristic";
        case EstimatorKind::knn_cv: return "knn:" + std::to_string(k);
        case EstimatorKind::linear_combo: {
            std::ostringstream out;
            out.precision(17);
            out << "combo:" << lambda;
            return out.str();
        }
    }
    return "unknown";
}

void register_estimator(const std::string &prefix, EstimatorFactory factory) {
    if (prefix.empty() || prefix.find(':') != std::string::npos) {
        raise(ErrorCode::ConfigError, "invalid estimator prefix '" + prefix + "'");
    }
    auto &r = registry();
    std::lock_guard lock(r.mutex);
    r.factories[prefix] = std::move(factory);
}

std::unique_ptr<Estimator> make_estimator(const std::string &name) {
    const auto colon = name.find(':');
    const std::string prefix = name.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : name.substr(colon + 1);
    EstimatorFactory factory;
    {
        auto &r = registry();
        std::lock_guard lock(r.mutex);
        const auto it = r.factories.find(prefix);
        if (it == r.factories.end()) raise(ErrorCode::ConfigError, "unknown estimator '" + name + "'");
        factory = it->second;
    }
    if (colon != std::string::npos && arg.empty()) {
        raise(ErrorCode::ConfigError, "empty argument in estimator '" + name + "'");
    }
    return factory(arg);
}

std::vector<std::string> registered_estimators() {
    auto &r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> names;
    for (const auto &[name, _] : r.factories) names.push_back(name);
    return names;
}

double score(const std::string &estimator, const ScoreRequest &request) {
    return make_estimator(estimator)->score(request);
}

double score_ta(const FeatureMatrix &pretrained, const LabelVector &labels, const KernelKind &kind) {
    check_rows(pretrained, labels.size(), "pretrained features");
    return cka(compute_kernel(pretrained, kind), target_kernel(labels));
}

double score_ra(const FeatureMatrix &pretrained, const FeatureMatrix &random, const KernelKind &kind) {
    check_rows(random, static_cast<std::size_t>(pretrained.n()), "random features");
    return cka(compute_kernel(pretrained, kind), compute_kernel(random, kind));
}

double kite_ratio(double ta, double ra) {
    if (!(ra >= kRaFloor)) {
        std::ostringstream msg;
        msg << "random alignment " << ra << " below floor " << kRaFloor;
        raise(ErrorCode::DegenerateRA, msg.str());
    }
    return ta / ra;
}

double score_kite(const ScoreRequest &request) {
    const auto terms = alignment_terms(request);
    return kite_ratio(terms.ta, terms.ra);
}

double score_linear_combo(const ScoreRequest &request, double lambda) {
    const auto terms = alignment_terms(request);
    return terms.ta - lambda * terms.ra;
}

double score_hsic_alt(const FeatureMatrix &pretrained, const FeatureMatrix &random, const KernelKind &kind) {
    check_rows(random, static_cast<std::size_t>(pretrained.n()), "random features");
    return hsic(compute_kernel(pretrained, kind), compute_kernel(random, kind));
}

double score_heuristic(const ModelMeta &meta) {
    if (meta.layers < 1 || meta.source_size < 1 || meta.target_size < 0 ||
        meta.source_size + meta.target_size < 1) {
        raise(ErrorCode::ConfigError, "model metadata must be positive");
    }
    return static_cast<double>(meta.layers) +
           std::log(static_cast<double>(meta.source_size) + static_cast<double>(meta.target_size));
}

double score_knn_cv(const FeatureMatrix &pretrained, const LabelVector &labels, int k) {
    check_rows(pretrained, labels.size(), "pretrained features");
    const Eigen::Index n = pretrained.n();
    if (k < 1) raise(ErrorCode::ConfigError, "k must be >= 1");
    if (n <= k) {
        raise(ErrorCode::TooFewSamples, "k-NN needs n > k (n=" + std::to_string(n) +
                                            ", k=" + std::to_string(k) + ")");
    }
    const Matrix &f = pretrained.data();
    const auto kk = static_cast<std::size_t>(k);
    std::vector<std::pair<double, Eigen::Index>> neighbours(static_cast<std::size_t>(n - 1));
    std::vector<int> votes(static_cast<std::size_t>(labels.num_classes()));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            neighbours[m++] = {(f.row(i) - f.row(j)).squaredNorm(), j};
        }
        // pair ordering gives distance first, then sample index
        std::partial_sort(neighbours.begin(), neighbours.begin() + static_cast<std::ptrdiff_t>(kk),
                          neighbours.end());
        std::fill(votes.begin(), votes.end(), 0);
        for (std::size_t t = 0; t < kk; ++t) {
            ++votes[static_cast<std::size_t>(labels[static_cast<std::size_t>(neighbours[t].second)])];
        }
        // max_element returns the first maximum, i.e. the smallest class id
        const auto predicted = std::max_element(votes.begin(), votes.end()) - votes.begin();
        if (predicted == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace kite
