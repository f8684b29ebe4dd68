#pragma once

#include "kite/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kite {

struct PcaModel {
    Vector mean;             ///< length d
    Matrix components;       ///< k x d, orthonormal rows
    Vector explained_variance;  ///< length k, non-increasing, 1/(n-1) normalization
    double total_variance = 0.0;  ///< sum of all per-dimension variances
    /// Non-fatal diagnostics, e.g. k truncated to the numerical rank.
    std::vector<std::string> warnings;

    [[nodiscard]] Eigen::Index k() const noexcept { return components.rows(); }
    [[nodiscard]] Eigen::Index d() const noexcept { return components.cols(); }
    [[nodiscard]] Vector explained_variance_ratio() const;
};

/// PCA by SVD of the mean-centered data. Requires 1 <= k <= min(n-1, d)
/// (ConfigError otherwise). If k exceeds the numerical rank the model keeps
/// only the rank-many components and records a warning. Each component is
/// oriented so that its largest-magnitude entry is positive.
PcaModel pca_fit(const FeatureMatrix &features, Eigen::Index k);

/// (X - mean) * components^T. Throws DimMismatch on a column-count mismatch.
FeatureMatrix pca_transform(const PcaModel &model, const FeatureMatrix &features);

/// Maps projected coordinates back: z * components + mean.
Matrix pca_inverse_transform(const PcaModel &model, const Matrix &projected);

struct ProbeSet {
    FeatureMatrix features;
    LabelVector labels;
    /// Pool row indices of the probe, ascending.
    std::vector<std::size_t> indices;
    std::uint64_t source_seed = 0;
    std::vector<std::string> warnings;
};

/// Stratified probe indices. Every class first receives two samples; the rest
/// of the budget min(target_size, pool) is split proportionally to the
/// remaining class sizes (largest remainder, ties to the smaller class id).
/// Members of a class are drawn uniformly without replacement.
/// Throws ClassTooSmall if a class has fewer than 2 samples in the pool.
std::vector<std::size_t> sample_probe_indices(const LabelVector &labels, std::size_t target_size,
                                              std::uint64_t seed, std::vector<std::string> *warnings = nullptr);

ProbeSet sample_probe(const FeatureMatrix &features, const LabelVector &labels,
                      std::size_t target_size, std::uint64_t seed);

inline constexpr std::size_t kDefaultProbeSize = 500;
inline constexpr Eigen::Index kDefaultPcaDim = 32;

}  // namespace kite
