#include "kite/preprocess.hpp"

#include "kite/error.hpp"
#include "kite/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kite {

Vector PcaModel::explained_variance_ratio() const {
    if (!(total_variance > 0.0)) return Vector::Zero(explained_variance.size());
    return explained_variance / total_variance;
}

PcaModel pca_fit(const FeatureMatrix &features, Eigen::Index k) {
    const Eigen::Index n = features.n();
    const Eigen::Index d = features.d();
    if (k < 1 || k > std::min(n - 1, d)) {
        raise(ErrorCode::ConfigError, "PCA k=" + std::to_string(k) + " outside [1, min(n-1, d)] = [1, " +
                                          std::to_string(std::min(n - 1, d)) + "]");
    }
    PcaModel model;
    model.mean = features.data().colwise().mean().transpose();
    const Matrix centered = features.data().rowwise() - model.mean.transpose();
    const double dof = static_cast<double>(n - 1);
    model.total_variance = centered.squaredNorm() / dof;

    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Vector &s = svd.singularValues();
    const double tol = static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon() *
                       (s.size() > 0 ? s(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    Eigen::Index kept = k;
    if (k > rank) {
        kept = std::max<Eigen::Index>(rank, 1);
        model.warnings.push_back("RankDeficient: requested k=" + std::to_string(k) +
                                 " exceeds numerical rank " + std::to_string(rank) + "; truncated to " +
                                 std::to_string(kept));
    }

    model.components = svd.matrixV().leftCols(kept).transpose();
    for (Eigen::Index r = 0; r < kept; ++r) {
        Eigen::Index arg = 0;
        model.components.row(r).cwiseAbs().maxCoeff(&arg);
        if (model.components(r, arg) < 0.0) model.components.row(r) *= -1.0;
    }
    model.explained_variance = s.head(kept).array().square() / dof;
    return model;
}

FeatureMatrix pca_transform(const PcaModel &model, const FeatureMatrix &features) {
    if (features.d() != model.d()) {
        raise(ErrorCode::DimMismatch, "PCA model expects d=" + std::to_string(model.d()) + ", got " +
                                          std::to_string(features.d()));
    }
    Matrix out = (features.data().rowwise() - model.mean.transpose()) * model.components.transpose();
    return FeatureMatrix(std::move(out), features.provenance());
}

Matrix pca_inverse_transform(const PcaModel &model, const Matrix &projected) {
    if (projected.cols() != model.k()) raise(ErrorCode::DimMismatch, "projected width differs from k");
    return (projected * model.components).rowwise() + model.mean.transpose();
}

std::vector<std::size_t> sample_probe_indices(const LabelVector &labels, std::size_t target_size,
                                              std::uint64_t seed, std::vector<std::string> *warnings) {
    const auto num_classes = static_cast<std::size_t>(labels.num_classes());
    if (num_classes == 0) raise(ErrorCode::ClassTooSmall, "empty label pool");
    std::vector<std::vector<std::size_t>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (members[c].size() < 2) {
            raise(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has " +
                                                std::to_string(members[c].size()) + " sample(s), need >= 2");
        }
    }

    const std::size_t pool = labels.size();
    std::size_t budget = target_size;
    if (budget > pool) {
        if (warnings) {
            warnings->push_back("pool has " + std::to_string(pool) + " samples, fewer than probe size " +
                                std::to_string(target_size) + "; using the whole pool");
        }
        budget = pool;
    }
    if (budget < 2 * num_classes) {
        if (warnings) {
            warnings->push_back("probe size " + std::to_string(budget) + " raised to " +
                                std::to_string(2 * num_classes) + " to keep 2 samples per class");
        }
        budget = 2 * num_classes;
    }

    // Largest-remainder split of the budget beyond the guaranteed two per class.
    const std::size_t extra = budget - 2 * num_classes;
    const std::size_t spare_total = pool - 2 * num_classes;
    std::vector<std::size_t> take(num_classes, 2);
    if (extra > 0) {
        std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (numerator remainder, class)
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            const std::size_t spare = members[c].size() - 2;
            const std::size_t num = extra * spare;
            take[c] += num / spare_total;
            assigned += num / spare_total;
            remainders.emplace_back(num % spare_total, c);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto &a, const auto &b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < extra; ++i, ++assigned) ++take[remainders[i].second];
    }

    Rng rng(derive_seed(seed, "sample_probe"));
    std::vector<std::size_t> chosen;
    chosen.reserve(budget);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto &m = members[c];
        // partial Fisher-Yates: the first take[c] entries become a uniform draw
        for (std::size_t i = 0; i < take[c]; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(m.size() - i));
            std::swap(m[i], m[j]);
        }
        chosen.insert(chosen.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(take[c]));
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

ProbeSet sample_probe(const FeatureMatrix &features, const LabelVector &labels, std::size_t target_size,
                      std::uint64_t seed) {
    if (static_cast<std::size_t>(features.n()) != labels.size()) {
        raise(ErrorCode::ShapeMismatch, "features and labels differ in length");
    }
    std::vector<std::string> warnings;
    auto indices = sample_probe_indices(labels, target_size, seed, &warnings);
    ProbeSet probe{features.select_rows(indices), labels.select(indices), std::move(indices), seed,
                   std::move(warnings)};
    return probe;
}

}  // namespace kite
