#pragma once

#include "kite/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kite {

enum class InitScheme { xavier_normal, he_normal, he_uniform };

/// "xavier-normal", "he-normal", "he-uniform" (underscores also accepted).
InitScheme parse_init_scheme(const std::string &name);
std::string to_string(InitScheme scheme);

/// Untrained ReLU network used to produce the random reference features.
struct RandomNetSpec {
    Eigen::Index input_dim = 1;
    std::vector<Eigen::Index> hidden_widths{512, 256};
    Eigen::Index output_dim = 1;
    InitScheme init = InitScheme::he_normal;
    int num_seeds = 5;
    std::uint64_t base_seed = 0;

    /// Throws ConfigError when a dimension or num_seeds is < 1.
    void validate() const;
};

/// fan_in x fan_out weight matrix. xavier_normal: N(0, 2/(fan_in+fan_out));
/// he_normal: N(0, 2/fan_in); he_uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Matrix init_weights(Eigen::Index fan_in, Eigen::Index fan_out, InitScheme scheme, std::uint64_t seed);

/// Element-wise mean over num_seeds networks of the forward pass
/// x -> relu(x W1) -> ... -> relu(. Wh) -> . Wout, zero biases.
/// Networks use seeds base_seed .. base_seed + num_seeds - 1 and are averaged in
/// that order. Throws DimMismatch when raw.d() != spec.input_dim.
FeatureMatrix random_mlp_features(const FeatureMatrix &raw, const RandomNetSpec &spec);

/// Output of the single network with the given seed (no averaging).
FeatureMatrix random_mlp_single(const FeatureMatrix &raw, const RandomNetSpec &spec, std::uint64_t seed);

/// i.i.d. standard-normal n x d features, independent of any input.
FeatureMatrix gaussian_random_features(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

}  // namespace kite
