#pragma once

// Synthetic data and synthetic model zoos for desk-scale experiments.

#include "kite/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kite::synth {

struct GaussianMixtureSpec {
    int num_classes = 2;
    std::vector<Vector> means;  ///< one d-vector per class
    double variance = 1.0;
    int n_per_class = 250;
    std::uint64_t seed = 0;

    /// Throws ConfigError on inconsistent dimensions or variance <= 0.
    void validate() const;
    [[nodiscard]] Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
};

struct LabeledData {
    FeatureMatrix features;
    LabelVector labels;
    /// Generating class means (num_classes x d) when known.
    std::optional<Matrix> class_means;
};

/// Class means separation / sqrt(2) * e_c, so every pair of means is
/// `separation` apart. Requires dim >= num_classes.
std::vector<Vector> one_hot_means(int num_classes, Eigen::Index dim, double separation);

/// Two classes in `dim` dimensions whose means are `separation` apart.
GaussianMixtureSpec two_gaussians(double separation, Eigen::Index dim, int n_per_class, std::uint64_t seed);

/// Samples are class-major: all of class 0, then class 1, ...
LabeledData gen_gaussian_mixture(const GaussianMixtureSpec &spec);

/// Many-class mixture with one-hot means; small separations give a
/// fine-grained (hard) task, large ones a coarse (easy) task.
struct TaskSpec {
    int num_classes = 20;
    double separation = 0.3;
    Eigen::Index dim = 32;
    int n_per_class = 20;
    double variance = 1.0;
    std::uint64_t seed = 0;
};

LabeledData gen_hard_task(const TaskSpec &spec);

/// Coarse regime used by the synthetic benchmark: 10 classes, separation 5,
/// 32 dimensions, 100 samples per class.
TaskSpec easy_task_spec(std::uint64_t seed);
/// Fine-grained regime: 20 classes, separation 0.3, 32 dimensions, 50 per class.
TaskSpec hard_task_spec(std::uint64_t seed);

struct SyntheticZooSpec {
    /// Feature dimension of every zoo model (>= num_classes of the data).
    Eigen::Index feature_dim = 32;
    /// One model per quality level q in [0, 1], distinct.
    std::vector<double> qualities{0.0, 1.0 / 7, 2.0 / 7, 3.0 / 7, 4.0 / 7, 5.0 / 7, 6.0 / 7, 1.0};
    /// Variance of the jitter added to the class embedding.
    double jitter_variance = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Evenly spaced quality grid 0, 1/(m-1), ..., 1.
std::vector<double> quality_grid(int num_models);

struct ZooModel {
    std::string model_id;
    double quality = 0.0;
    /// Features of the probe pool.
    FeatureMatrix features;
    /// 1-NN leave-one-out accuracy on the held-out split.
    double ground_truth_accuracy = 0.0;
};

struct SyntheticZoo {
    /// Raw inputs and labels of the probe pool (the scoring side of the split).
    LabeledData pool;
    LabeledData held_out;
    std::vector<ZooModel> models;
};

/// Splits `data` per class into alternating pool / held-out halves. Model q
/// maps a raw sample x of class c to
///   q * rms(s * e_c + jitter) + (1 - q) * rms(P x)
/// where e_c is the one-hot centroid in feature space, s the spread of the
/// class means (generating means when known, empirical otherwise; s = a for
/// one-hot means a * e_c), jitter i.i.d. N(0, jitter_variance), P a random
/// linear projection drawn per model index and rms() scales a block to unit
/// root-mean-square centered row norm. Ground truth is the 1-NN leave-one-out
/// accuracy on the held-out half. Requires feature_dim >= number of classes.
SyntheticZoo gen_synthetic_zoo(const SyntheticZooSpec &spec, const LabeledData &data);

}  // namespace kite::synth
