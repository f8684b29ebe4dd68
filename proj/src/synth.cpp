#include "kite/synth.hpp"

#include "kite/error.hpp"
#include "kite/estimators.hpp"
#include "kite/rng.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace kite::synth {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
    }
    return m;
}

// Scales to unit root-mean-square row norm after centering; the mean is kept.
Matrix unit_rms(const Matrix &m) {
    const Eigen::RowVectorXd mean = m.colwise().mean();
    const double rms = std::sqrt((m.rowwise() - mean).squaredNorm() / static_cast<double>(m.rows()));
    return rms > 0.0 ? Matrix(m / rms) : m;
}

std::string model_id(std::size_t index) {
    std::ostringstream out;
    out << 'm';
    out.width(2);
    out.fill('0');
    out << index;
    return out.str();
}

}  // namespace

void GaussianMixtureSpec::validate() const {
    if (num_classes < 1 || static_cast<int>(means.size()) != num_classes) {
        raise(ErrorCode::ConfigError, "need one mean per class");
    }
    for (const auto &m : means) {
        if (m.size() < 1 || m.size() != means.front().size()) raise(ErrorCode::ConfigError, "class means differ in dimension");
    }
    if (!(variance > 0.0)) raise(ErrorCode::ConfigError, "variance must be > 0");
    if (n_per_class < 1) raise(ErrorCode::ConfigError, "n_per_class must be >= 1");
}

std::vector<Vector> one_hot_means(int num_classes, Eigen::Index dim, double separation) {
    if (num_classes < 1 || dim < num_classes) raise(ErrorCode::ConfigError, "one-hot means need dim >= num_classes");
    std::vector<Vector> means;
    for (int c = 0; c < num_classes; ++c) {
        Vector m = Vector::Zero(dim);
        m(c) = separation / std::sqrt(2.0);
        means.push_back(std::move(m));
    }
    return means;
}

GaussianMixtureSpec two_gaussians(double separation, Eigen::Index dim, int n_per_class, std::uint64_t seed) {
    GaussianMixtureSpec spec;
    spec.num_classes = 2;
    spec.means = one_hot_means(2, dim, separation);
    spec.n_per_class = n_per_class;
    spec.seed = seed;
    return spec;
}

LabeledData gen_gaussian_mixture(const GaussianMixtureSpec &spec) {
    spec.validate();
    const Eigen::Index d = spec.dim();
    const Eigen::Index n = static_cast<Eigen::Index>(spec.num_classes) * spec.n_per_class;
    Rng rng(derive_seed(spec.seed, "gaussian_mixture"));
    const double sd = std::sqrt(spec.variance);
    Matrix x(n, d);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    Eigen::Index row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int i = 0; i < spec.n_per_class; ++i, ++row) {
            for (Eigen::Index j = 0; j < d; ++j) x(row, j) = spec.means[static_cast<std::size_t>(c)](j) + sd * rng.normal();
            labels.push_back(c);
        }
    }
    Matrix means(spec.num_classes, d);
    for (int c = 0; c < spec.num_classes; ++c) means.row(c) = spec.means[static_cast<std::size_t>(c)].transpose();
    return {FeatureMatrix(std::move(x), Provenance::synthetic), LabelVector(std::move(labels), spec.num_classes),
            std::move(means)};
}

LabeledData gen_hard_task(const TaskSpec &spec) {
    GaussianMixtureSpec g;
    g.num_classes = spec.num_classes;
    g.means = one_hot_means(spec.num_classes, spec.dim, spec.separation);
    g.variance = spec.variance;
    g.n_per_class = spec.n_per_class;
    g.seed = spec.seed;
    return gen_gaussian_mixture(g);
}

TaskSpec easy_task_spec(std::uint64_t seed) {
    TaskSpec t;
    t.num_classes = 10;
    t.separation = 5.0;
    t.dim = 32;
    t.n_per_class = 100;
    t.seed = seed;
    return t;
}

TaskSpec hard_task_spec(std::uint64_t seed) {
    TaskSpec t;
    t.num_classes = 20;
    t.separation = 0.3;
    t.dim = 32;
    t.n_per_class = 50;
    t.seed = seed;
    return t;
}

void SyntheticZooSpec::validate() const {
    if (feature_dim < 1) raise(ErrorCode::ConfigError, "feature_dim must be >= 1");
    if (qualities.empty()) raise(ErrorCode::ConfigError, "zoo needs at least one quality level");
    std::set<double> seen;
    for (double q : qualities) {
        if (!(q >= 0.0 && q <= 1.0)) raise(ErrorCode::ConfigError, "quality levels must lie in [0, 1]");
        if (!seen.insert(q).second) raise(ErrorCode::ConfigError, "quality levels must be distinct");
    }
    if (!(jitter_variance >= 0.0)) raise(ErrorCode::ConfigError, "jitter variance must be >= 0");
}

std::vector<double> quality_grid(int num_models) {
    if (num_models < 1) raise(ErrorCode::ConfigError, "zoo needs at least one model");
    if (num_models == 1) return {1.0};
    std::vector<double> q;
    for (int i = 0; i < num_models; ++i) q.push_back(static_cast<double>(i) / static_cast<double>(num_models - 1));
    return q;
}

SyntheticZoo gen_synthetic_zoo(const SyntheticZooSpec &spec, const LabeledData &data) {
    spec.validate();
    const auto &labels = data.labels;
    const Matrix &x = data.features.data();
    const Eigen::Index raw_dim = x.cols();
    if (static_cast<std::size_t>(x.rows()) != labels.size()) raise(ErrorCode::ShapeMismatch, "data and labels differ in length");

    // Alternate members of each class between the pool and the held-out half.
    std::vector<std::size_t> pool_idx;
    std::vector<std::size_t> held_idx;
    std::vector<std::size_t> seen(static_cast<std::size_t>(labels.num_classes()), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto &count = seen[static_cast<std::size_t>(labels[i])];
        (count++ % 2 == 0 ? pool_idx : held_idx).push_back(i);
    }

    Matrix centroids = Matrix::Zero(labels.num_classes(), raw_dim);
    if (data.class_means) {
        if (data.class_means->rows() != labels.num_classes() || data.class_means->cols() != raw_dim) {
            raise(ErrorCode::ShapeMismatch, "class means do not match the data");
        }
        centroids = *data.class_means;
    } else {
        const auto counts = labels.class_counts();
        for (std::size_t i = 0; i < labels.size(); ++i) centroids.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        }
    }
    const Eigen::Index num_classes = centroids.rows();
    if (spec.feature_dim < num_classes) raise(ErrorCode::ConfigError, "feature_dim must be >= number of classes");
    // Scale of the one-hot centroids: for one-hot means s * e_c this recovers s.
    double scale = 1.0;
    if (num_classes > 1) {
        const Eigen::RowVectorXd grand = centroids.colwise().mean();
        const double spread = (centroids.rowwise() - grand).squaredNorm() / static_cast<double>(num_classes);
        scale = std::sqrt(spread * static_cast<double>(num_classes) / static_cast<double>(num_classes - 1));
    }

    SyntheticZoo zoo{{data.features.select_rows(pool_idx), labels.select(pool_idx), data.class_means},
                     {data.features.select_rows(held_idx), labels.select(held_idx), data.class_means},
                     {}};
    const double jitter_sd = std::sqrt(spec.jitter_variance);
    const auto n = static_cast<Eigen::Index>(labels.size());
    for (std::size_t m = 0; m < spec.qualities.size(); ++m) {
        const double q = spec.qualities[m];
        const Matrix projection = gaussian_matrix(raw_dim, spec.feature_dim, 1.0 / std::sqrt(static_cast<double>(raw_dim)),
                                                  derive_seed(spec.seed, "zoo.projection", {m}));
        Matrix embedding = gaussian_matrix(n, spec.feature_dim, jitter_sd, derive_seed(spec.seed, "zoo.jitter", {m}));
        for (Eigen::Index i = 0; i < n; ++i) embedding(i, labels[static_cast<std::size_t>(i)]) += scale;
        const Matrix projected = x * projection;
        const FeatureMatrix features(q * unit_rms(embedding) + (1.0 - q) * unit_rms(projected), Provenance::synthetic);

        ZooModel model{model_id(m), q, features.select_rows(pool_idx), 0.0};
        model.ground_truth_accuracy = score_knn_cv(features.select_rows(held_idx), zoo.held_out.labels, 1);
        zoo.models.push_back(std::move(model));
    }
    return zoo;
}

}  // namespace kite::synth
