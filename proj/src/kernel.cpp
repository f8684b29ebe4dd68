#include "kite/kernel.hpp"

#include "kite/error.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <sstream>
#include <vector>

namespace kite {

namespace {

// Centered matrices with a Frobenius norm below this fraction of the
// uncentered norm are treated as zero.
constexpr double kDegenerateRelTol = 1e-10;

double parse_sigma(const std::string &text, const std::string &whole) {
    std::size_t used = 0;
    double sigma = 0.0;
    try {
        sigma = std::stod(text, &used);
    } catch (const std::exception &) {
        raise(ErrorCode::ConfigError, "bad kernel bandwidth in '" + whole + "'");
    }
    if (used != text.size()) raise(ErrorCode::ConfigError, "bad kernel bandwidth in '" + whole + "'");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        raise(ErrorCode::InvalidBandwidth, "sigma must be > 0, got '" + text + "'");
    }
    return sigma;
}

double row_distance(const Matrix &f, Eigen::Index i, Eigen::Index j, KernelFamily family) {
    double acc = 0.0;
    if (family == KernelFamily::laplacian) {
        for (Eigen::Index c = 0; c < f.cols(); ++c) acc += std::abs(f(i, c) - f(j, c));
        return acc;
    }
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
        const double diff = f(i, c) - f(j, c);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

void require_same_shape(const KernelMatrix &a, const KernelMatrix &b) {
    if (a.data.rows() != a.data.cols() || b.data.rows() != b.data.cols()) {
        raise(ErrorCode::ShapeMismatch, "kernel matrices must be square");
    }
    if (a.n() != b.n()) {
        raise(ErrorCode::ShapeMismatch, "kernel sizes differ: " + std::to_string(a.n()) + " vs " +
                                            std::to_string(b.n()));
    }
}

// Exact sum of doubles (superaccumulator). The result depends only on the
// multiset of inputs, so reductions over a kernel give the same bits under any
// sample permutation. Each value is split as M * 2^E with |M| < 2^53 and added
// into 32-bit-aligned 128-bit bins; a bin absorbs 2^43 terms before overflow.
class ExactSum {
public:
    void add(double v) {
        if (v == 0.0) return;
        int e = 0;
        const double m = std::frexp(v, &e);
        const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
        const int pos = e - 53 + kBias;
        bins_[static_cast<std::size_t>(pos >> 5)] += static_cast<__int128>(mant) << (pos & 31);
    }

    [[nodiscard]] double value() const {
        auto b = bins_;
        for (std::size_t k = 0; k + 1 < b.size(); ++k) {
            const __int128 carry = b[k] >> 32;
            b[k] -= carry << 32;
            b[k + 1] += carry;
        }
        double r = 0.0;
        for (std::size_t k = b.size(); k-- > 0;) {
            r += std::ldexp(static_cast<double>(b[k]), 32 * static_cast<int>(k) - kBias);
        }
        return r;
    }

private:
    // Smallest exponent of M * 2^E is -1074 - 52.
    static constexpr int kBias = 1126;
    std::array<__int128, (971 + kBias) / 32 + 3> bins_{};
};

template <typename It>
double exact_sum(It first, It last) {
    ExactSum acc;
    for (; first != last; ++first) acc.add(*first);
    return acc.value();
}

Matrix centered_data(const KernelMatrix &k) {
    return k.centered ? k.data : center_kernel(k).data;
}

}  // namespace

KernelKind KernelKind::parse(const std::string &text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    std::optional<double> sigma;
    if (colon != std::string::npos) sigma = parse_sigma(text.substr(colon + 1), text);

    if (name == "linear") {
        if (sigma) raise(ErrorCode::ConfigError, "linear kernel takes no bandwidth");
        return linear();
    }
    if (name == "gaussian" || name == "rbf") return gaussian(sigma);
    if (name == "gaussian-unsquared") return gaussian_unsquared(sigma);
    if (name == "laplacian") return laplacian(sigma);
    raise(ErrorCode::ConfigError, "unknown kernel '" + text + "'");
}

std::string KernelKind::to_string() const {
    std::ostringstream out;
    switch (family) {
        case KernelFamily::linear: return "linear";
        case KernelFamily::gaussian: out << (squared_distance ? "gaussian" : "gaussian-unsquared"); break;
        case KernelFamily::laplacian: out << "laplacian"; break;
    }
    if (bandwidth) {
        out.precision(17);
        out << ':' << *bandwidth;
    }
    return out.str();
}

double median_heuristic_bandwidth(const Matrix &features, KernelFamily family) {
    const Eigen::Index n = features.rows();
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back(row_distance(features, i, j, family));
    }
    if (dists.empty()) return 1.0;
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    double median = dists[mid];
    if (dists.size() % 2 == 0) {
        const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    return median > 0.0 ? median : 1.0;
}

KernelMatrix compute_kernel(const FeatureMatrix &features, const KernelKind &kind) {
    const Matrix &f = features.data();
    const Eigen::Index n = f.rows();
    if (!f.allFinite()) raise(ErrorCode::NonFiniteInput, "features contain NaN or Inf");

    KernelMatrix out{Matrix(n, n), false, kind};
    if (kind.family == KernelFamily::linear) {
        // Entry-wise dot products rather than a blocked product: the value of
        // an entry must not depend on its position in the matrix.
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                double acc = 0.0;
                for (Eigen::Index c = 0; c < f.cols(); ++c) acc += f(i, c) * f(j, c);
                out.data(i, j) = acc;
                out.data(j, i) = acc;
            }
        }
    } else {
        if (kind.bandwidth && !(*kind.bandwidth > 0.0 && std::isfinite(*kind.bandwidth))) {
            raise(ErrorCode::InvalidBandwidth, "sigma must be a positive finite number");
        }
        const double sigma = kind.bandwidth.value_or(median_heuristic_bandwidth(f, kind.family));
        out.kind.bandwidth = sigma;
        const bool laplacian = kind.family == KernelFamily::laplacian;
        const double scale = laplacian ? 1.0 / sigma : 1.0 / (2.0 * sigma * sigma);
        for (Eigen::Index i = 0; i < n; ++i) {
            out.data(i, i) = 1.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                double dist = row_distance(f, i, j, kind.family);
                if (!laplacian && kind.squared_distance) dist *= dist;
                const double v = std::exp(-dist * scale);
                out.data(i, j) = v;
                out.data(j, i) = v;
            }
        }
    }
    out.data = 0.5 * (out.data + out.data.transpose()).eval();
    return out;
}

KernelMatrix center_kernel(const KernelMatrix &k) {
    if (k.data.rows() != k.data.cols()) raise(ErrorCode::ShapeMismatch, "kernel must be square");
    const Eigen::Index n = k.data.rows();
    const auto dn = static_cast<double>(n);
    Vector row_means(n);
    Eigen::RowVectorXd col_means(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = k.data.row(i);
        const auto col = k.data.col(i);
        row_means(i) = exact_sum(row.begin(), row.end()) / dn;
        col_means(i) = exact_sum(col.begin(), col.end()) / dn;
    }
    const double grand = exact_sum(row_means.begin(), row_means.end()) / dn;
    KernelMatrix out{k.data, true, k.kind};
    out.data.colwise() -= row_means;
    out.data.rowwise() -= col_means;
    out.data.array() += grand;
    return out;
}

KernelMatrix target_kernel(const LabelVector &labels) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    KernelMatrix out{Matrix(n, n), false, KernelKind::linear()};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out.data(i, j) = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
        }
    }
    return out;
}

double frobenius_inner(const Matrix &a, const Matrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) raise(ErrorCode::ShapeMismatch, "matrix shapes differ");
    ExactSum acc;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc.add(a.data()[i] * b.data()[i]);
    return acc.value();
}

double alignment(const KernelMatrix &k1, const KernelMatrix &k2) {
    require_same_shape(k1, k2);
    const double n1 = frobenius_inner(k1.data, k1.data);
    const double n2 = frobenius_inner(k2.data, k2.data);
    if (!(n1 > 0.0) || !(n2 > 0.0)) raise(ErrorCode::DegenerateKernel, "kernel has zero Frobenius norm");
    return frobenius_inner(k1.data, k2.data) / std::sqrt(n1 * n2);
}

double cka(const KernelMatrix &k1, const KernelMatrix &k2) {
    require_same_shape(k1, k2);
    if (k1.n() < 2) raise(ErrorCode::TooFewSamples, "CKA needs at least 2 samples");
    const Matrix c1 = centered_data(k1);
    const Matrix c2 = centered_data(k2);
    const double n1 = frobenius_inner(c1, c1);
    const double n2 = frobenius_inner(c2, c2);
    const auto vanishes = [](double centered_sq, const Matrix &raw) {
        return !(centered_sq > 0.0) ||
               std::sqrt(centered_sq) <= kDegenerateRelTol * raw.norm();
    };
    if (vanishes(n1, k1.data)) {
        raise(ErrorCode::DegenerateKernel, "first kernel is constant after centering (constant features?)");
    }
    if (vanishes(n2, k2.data)) {
        raise(ErrorCode::DegenerateKernel, "second kernel is constant after centering (constant labels?)");
    }
    return frobenius_inner(c1, c2) / std::sqrt(n1 * n2);
}

double hsic(const KernelMatrix &k, const KernelMatrix &l) {
    require_same_shape(k, l);
    const Eigen::Index n = k.n();
    if (n < 2) raise(ErrorCode::TooFewSamples, "HSIC needs at least 2 samples");
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return frobenius_inner(centered_data(k), centered_data(l)) / denom;
}

}  // namespace kite
