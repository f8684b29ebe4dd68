#include "kite/random_features.hpp"

#include "kite/error.hpp"
#include "kite/rng.hpp"

#include <cmath>

namespace kite {

InitScheme parse_init_scheme(const std::string &name) {
    std::string key = name;
    for (auto &c : key) {
        if (c == '_') c = '-';
    }
    if (key == "xavier-normal") return InitScheme::xavier_normal;
    if (key == "he-normal") return InitScheme::he_normal;
    if (key == "he-uniform") return InitScheme::he_uniform;
    raise(ErrorCode::ConfigError, "unknown init scheme '" + name + "'");
}

std::string to_string(InitScheme scheme) {
    switch (scheme) {
        case InitScheme::xavier_normal: return "xavier-normal";
        case InitScheme::he_normal: return "he-normal";
        case InitScheme::he_uniform: return "he-uniform";
    }
    return "unknown";
}

void RandomNetSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) raise(ErrorCode::ConfigError, "network dims must be >= 1");
    for (auto w : hidden_widths) {
        if (w < 1) raise(ErrorCode::ConfigError, "hidden widths must be >= 1");
    }
    if (num_seeds < 1) raise(ErrorCode::ConfigError, "num_seeds must be >= 1");
}

Matrix init_weights(Eigen::Index fan_in, Eigen::Index fan_out, InitScheme scheme, std::uint64_t seed) {
    if (fan_in < 1 || fan_out < 1) raise(ErrorCode::ConfigError, "fan_in and fan_out must be >= 1");
    Rng rng(seed);
    Matrix w(fan_in, fan_out);
    const auto fi = static_cast<double>(fan_in);
    const auto fo = static_cast<double>(fan_out);
    // Fill row by row so the draw order does not depend on storage order.
    for (Eigen::Index r = 0; r < fan_in; ++r) {
        for (Eigen::Index c = 0; c < fan_out; ++c) {
            switch (scheme) {
                case InitScheme::xavier_normal: w(r, c) = std::sqrt(2.0 / (fi + fo)) * rng.normal(); break;
                case InitScheme::he_normal: w(r, c) = std::sqrt(2.0 / fi) * rng.normal(); break;
                case InitScheme::he_uniform: {
                    const double bound = std::sqrt(6.0 / fi);
                    w(r, c) = rng.uniform(-bound, bound);
                    break;
                }
            }
        }
    }
    return w;
}

FeatureMatrix random_mlp_single(const FeatureMatrix &raw, const RandomNetSpec &spec, std::uint64_t seed) {
    spec.validate();
    if (raw.d() != spec.input_dim) {
        raise(ErrorCode::DimMismatch, "raw features have d=" + std::to_string(raw.d()) +
                                          ", network expects " + std::to_string(spec.input_dim));
    }
    Matrix h = raw.data();
    std::uint64_t layer = 0;
    for (auto width : spec.hidden_widths) {
        const Matrix w = init_weights(h.cols(), width, spec.init, derive_seed(seed, "random_mlp.layer", {layer++}));
        h = (h * w).cwiseMax(0.0);
    }
    const Matrix w = init_weights(h.cols(), spec.output_dim, spec.init, derive_seed(seed, "random_mlp.layer", {layer}));
    return FeatureMatrix(h * w, Provenance::random);
}

FeatureMatrix random_mlp_features(const FeatureMatrix &raw, const RandomNetSpec &spec) {
    spec.validate();
    Matrix sum = Matrix::Zero(raw.n(), spec.output_dim);
    for (int s = 0; s < spec.num_seeds; ++s) {
        sum += random_mlp_single(raw, spec, spec.base_seed + static_cast<std::uint64_t>(s)).data();
    }
    return FeatureMatrix(sum / static_cast<double>(spec.num_seeds), Provenance::random);
}

FeatureMatrix gaussian_random_features(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    if (n < 1 || d < 1) raise(ErrorCode::ConfigError, "n and d must be >= 1");
    Rng rng(derive_seed(seed, "gaussian_random_features"));
    Matrix out(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) out(r, c) = rng.normal();
    }
    return FeatureMatrix(std::move(out), Provenance::random);
}

}  // namespace kite
