#include "kite/error.hpp"
#include "kite/estimators.hpp"
#include "kite/evaluation.hpp"
#include "kite/kernel.hpp"
#include "kite/random_features.hpp"
#include "kite/synth.hpp"
#include "zoo_harness.hpp"

#include <doctest.h>

#include <set>

using namespace kite;
using namespace kite::synth;

namespace {

double mean_ta(double separation, int seeds) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto d = gen_gaussian_mixture(two_gaussians(separation, 2, 250, static_cast<std::uint64_t>(s)));
        sum += score_ta(d.features, d.labels, KernelKind::linear());
    }
    return sum / seeds;
}

}  // namespace

TEST_CASE("gaussian mixture") {
    const auto spec = two_gaussians(2.0, 2, 250, 4);
    const auto a = gen_gaussian_mixture(spec);
    const auto b = gen_gaussian_mixture(spec);
    CHECK(a.features.data() == b.features.data());
    CHECK(a.labels.labels() == b.labels.labels());
    CHECK(a.features.n() == 500);
    CHECK(a.labels.labels()[0] == 0);
    CHECK(a.labels.labels()[499] == 1);
    REQUIRE(a.class_means);
    CHECK(((a.class_means->row(0) - a.class_means->row(1)).norm()) == doctest::Approx(2.0));
    CHECK(gen_gaussian_mixture(two_gaussians(2.0, 2, 250, 5)).features.data() != a.features.data());

    // Sample moments per class.
    const Matrix x = a.features.data();
    const Eigen::RowVectorXd m0 = x.topRows(250).colwise().mean();
    CHECK((m0 - a.class_means->row(0)).norm() < 0.2);
    const double var = (x.topRows(250).rowwise() - m0).squaredNorm() / (2.0 * 249);
    CHECK(var == doctest::Approx(1.0).epsilon(0.15));

    GaussianMixtureSpec bad = spec;
    bad.variance = 0.0;
    CHECK_THROWS_AS(gen_gaussian_mixture(bad), Error);
    bad = spec;
    bad.means[1] = Vector::Zero(3);
    CHECK_THROWS_AS(gen_gaussian_mixture(bad), Error);
}

TEST_CASE("identical means give chance-level TA") { CHECK(mean_ta(0.0, 10) < 0.05); }

TEST_CASE("TA increases with separation") {
    double prev = -1.0;
    for (double sep : {0.5, 1.0, 2.0, 4.0}) {
        const double ta = mean_ta(sep, 10);
        CHECK(ta > prev);
        prev = ta;
    }
}

TEST_CASE("hard task construction") {
    const auto spec = hard_task_spec(3);
    const auto a = gen_hard_task(spec);
    CHECK(a.features.n() == 20 * 50);
    CHECK(a.features.d() == 32);
    CHECK(a.labels.num_classes() == 20);
    CHECK(gen_hard_task(spec).features.data() == a.features.data());
    TaskSpec wide = spec;
    wide.dim = 10;
    CHECK_THROWS_AS(gen_hard_task(wide), Error);
    const auto easy = easy_task_spec(0);
    CHECK(easy.num_classes == 10);
    CHECK(easy.separation == 5.0);
}

TEST_CASE("synthetic zoo") {
    TaskSpec t = easy_task_spec(2);
    const auto data = gen_hard_task(t);
    SyntheticZooSpec zs;
    zs.seed = 2;
    const auto zoo = gen_synthetic_zoo(zs, data);
    REQUIRE(zoo.models.size() == 8);
    CHECK(zoo.pool.features.n() + zoo.held_out.features.n() == data.features.n());
    std::set<std::string> ids;
    for (const auto &m : zoo.models) {
        ids.insert(m.model_id);
        CHECK(m.features.n() == zoo.pool.features.n());
        CHECK(m.features.d() == 32);
    }
    CHECK(ids.size() == 8);
    CHECK(zoo.models.front().model_id == "m00");

    // q=1 has the highest ground truth.
    for (const auto &m : zoo.models) CHECK(m.ground_truth_accuracy <= zoo.models.back().ground_truth_accuracy);

    const auto again = gen_synthetic_zoo(zs, data);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(again.models[i].features.data() == zoo.models[i].features.data());
        CHECK(again.models[i].ground_truth_accuracy == zoo.models[i].ground_truth_accuracy);
    }

    SyntheticZooSpec bad = zs;
    bad.qualities = {0.5, 0.5};
    CHECK_THROWS_AS(gen_synthetic_zoo(bad, data), Error);
    bad = zs;
    bad.qualities = {1.5};
    CHECK_THROWS_AS(gen_synthetic_zoo(bad, data), Error);
    bad = zs;
    bad.feature_dim = 5;
    CHECK_THROWS_AS(gen_synthetic_zoo(bad, data), Error);
    CHECK(quality_grid(3) == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("q=0 on balanced two-class data is at chance") {
    // Identical class means: the random projection carries no class signal.
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto data = gen_gaussian_mixture(two_gaussians(0.0, 2, 100, s));
        SyntheticZooSpec zs;
        zs.seed = s;
        sum += gen_synthetic_zoo(zs, data).models.front().ground_truth_accuracy;
    }
    CHECK(std::abs(sum / 10 - 0.5) < 0.1);
}

TEST_CASE("KITE correlates with the zoo's ground truth on every seed") {
    for (std::uint64_t s = 0; s < 5; ++s) CHECK(harness::score_zoo(easy_task_spec(s), s).pc_kite > 0.0);
}

TEST_CASE("TA and RA are anti-correlated across the zoo") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        CHECK(harness::score_zoo(easy_task_spec(s), s).pc_ta_ra < 0.0);
        CHECK(harness::score_zoo(hard_task_spec(s), s).pc_ta_ra < 0.0);
    }
}

TEST_CASE("hard and easy regimes") {
    for (std::uint64_t s = 0; s < 3; ++s) {
        CHECK(harness::score_zoo(hard_task_spec(s), s).max_ta < 0.2);
        TaskSpec wide = hard_task_spec(s);
        wide.separation = 8.0;
        CHECK(harness::score_zoo(wide, s).max_ta > 0.8);
    }
}

TEST_CASE("kernel values of the best model are more concentrated") {
    const auto data = gen_hard_task(easy_task_spec(1));
    SyntheticZooSpec zs;
    zs.seed = 1;
    const auto zoo = gen_synthetic_zoo(zs, data);
    const auto k_best = compute_kernel(zoo.models.back().features, KernelKind::linear());
    const auto k_worst = compute_kernel(zoo.models.front().features, KernelKind::linear());
    CHECK(kernel_value_histogram(k_best, 50).iqr() < kernel_value_histogram(k_worst, 50).iqr());

    // Block kernel of a clean embedding vs. a random-network kernel.
    RandomNetSpec rs;
    rs.input_dim = 32;
    rs.output_dim = 32;
    const auto k_random = compute_kernel(random_mlp_features(zoo.pool.features, rs), KernelKind::linear());
    Matrix block = Matrix::Zero(zoo.pool.features.n(), 10);
    for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, zoo.pool.labels[static_cast<std::size_t>(i)]) = 1.0;
    const auto k_block = compute_kernel(FeatureMatrix(block), KernelKind::linear());
    const auto scaled = [](const KernelMatrix &k) {
        return KernelMatrix{k.data / k.data.diagonal().mean(), k.centered, k.kind};
    };
    CHECK(kernel_value_histogram(scaled(k_block), 50).iqr() < kernel_value_histogram(scaled(k_random), 50).iqr());
}
