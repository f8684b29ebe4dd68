#pragma once

// Kernel matrices and the alignment family built on them: uncentered and
// centered alignment (CKA) and HSIC.

#include "kite/types.hpp"

#include <optional>
#include <string>

namespace kite {

enum class KernelFamily { linear, gaussian, laplacian };

struct KernelKind {
    KernelFamily family = KernelFamily::linear;
    /// Bandwidth sigma for gaussian/laplacian. Unset selects the median of
    /// pairwise distances on the input (median heuristic).
    std::optional<double> bandwidth;
    /// Gaussian only: exp(-|x-y|^2 / 2 sigma^2) when true (standard RBF);
    /// exp(-|x-y| / 2 sigma^2) when false.
    bool squared_distance = true;

    static KernelKind linear() { return {}; }
    static KernelKind gaussian(std::optional<double> sigma = std::nullopt) {
        return {KernelFamily::gaussian, sigma, true};
    }
    static KernelKind gaussian_unsquared(std::optional<double> sigma = std::nullopt) {
        return {KernelFamily::gaussian, sigma, false};
    }
    static KernelKind laplacian(std::optional<double> sigma = std::nullopt) {
        return {KernelFamily::laplacian, sigma, true};
    }

    /// Accepts "linear", "gaussian", "gaussian:<sigma>", "gaussian-unsquared[:<sigma>]",
    /// "laplacian", "laplacian:<sigma>". Throws ConfigError otherwise.
    static KernelKind parse(const std::string &text);
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const KernelKind &, const KernelKind &) = default;
};

struct KernelMatrix {
    Matrix data;
    bool centered = false;
    /// Kind with the bandwidth actually used (median heuristic resolved).
    KernelKind kind;

    [[nodiscard]] Eigen::Index n() const noexcept { return data.rows(); }
};

/// Median of pairwise distances between rows (Euclidean for gaussian, L1 for
/// laplacian). Falls back to 1.0 when every pair coincides.
double median_heuristic_bandwidth(const Matrix &features, KernelFamily family);

/// Uncentered kernel matrix of the rows of `features`, symmetrized.
KernelMatrix compute_kernel(const FeatureMatrix &features, const KernelKind &kind);

/// H K H with H = I - 11^T / n.
KernelMatrix center_kernel(const KernelMatrix &k);

/// Same-class indicator matrix from labels.
KernelMatrix target_kernel(const LabelVector &labels);

/// Sum of a .* b, accumulated exactly so the result depends only on the
/// multiset of products (bit-identical under any sample permutation).
double frobenius_inner(const Matrix &a, const Matrix &b);

/// <K1,K2>_F / sqrt(<K1,K1>_F <K2,K2>_F). Throws DegenerateKernel on a zero norm.
double alignment(const KernelMatrix &k1, const KernelMatrix &k2);

/// Alignment of the centered matrices. Inputs flagged as centered are used
/// as-is. Throws DegenerateKernel when either centered matrix vanishes, which
/// means constant features or constant labels.
double cka(const KernelMatrix &k1, const KernelMatrix &k2);

/// Tr(K H L H) / (n - 1)^2.
double hsic(const KernelMatrix &k, const KernelMatrix &l);

}  // namespace kite
