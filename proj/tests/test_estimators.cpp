#include "kite/error.hpp"
#include "kite/estimators.hpp"
#include "kite/synth.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kite;

namespace {

ErrorCode code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ConfigError;
}

// Fixed 8-sample toy set shared by the golden-value cases.
struct Toy {
    Matrix f;
    Matrix r;
    std::vector<int> y{0, 0, 0, 1, 1, 1, 2, 2};
    Toy() {
        std::mt19937_64 g(8);
        f = oracle::random_matrix(g, 8, 3);
        r = oracle::random_matrix(g, 8, 3);
        for (int i = 0; i < 8; ++i) f(i, y[static_cast<std::size_t>(i)]) += 2.0;
    }
    [[nodiscard]] ScoreRequest request() const {
        ScoreRequest req;
        req.pretrained = FeatureMatrix(f);
        req.random = FeatureMatrix(r, Provenance::random);
        req.labels = LabelVector(y);
        return req;
    }
    [[nodiscard]] double ta_oracle() const {
        return oracle::cka(oracle::kernel(f, oracle::Kernel::linear), oracle::target_kernel(y));
    }
    [[nodiscard]] double ra_oracle() const {
        return oracle::cka(oracle::kernel(f, oracle::Kernel::linear), oracle::kernel(r, oracle::Kernel::linear));
    }
};

}  // namespace

TEST_CASE("ta") {
    Matrix f(6, 3);
    f << 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1;
    CHECK(score_ta(FeatureMatrix(f), LabelVector({0, 0, 1, 1, 2, 2}), KernelKind::linear()) ==
          doctest::Approx(1.0).epsilon(1e-14));
    const Toy toy;
    CHECK(std::abs(score_ta(FeatureMatrix(toy.f), LabelVector(toy.y), KernelKind::linear()) - toy.ta_oracle()) < 1e-12);
    CHECK(code_of([&] { (void)score_ta(FeatureMatrix(toy.f), LabelVector(std::vector<int>(8, 0)), KernelKind::linear()); }) ==
          ErrorCode::DegenerateKernel);
}

TEST_CASE("ta increases with two-gaussian separation") {
    double low = 0, high = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto a = synth::gen_gaussian_mixture(synth::two_gaussians(0.5, 2, 250, s));
        const auto b = synth::gen_gaussian_mixture(synth::two_gaussians(4.0, 2, 250, s));
        low += score_ta(a.features, a.labels, KernelKind::linear());
        high += score_ta(b.features, b.labels, KernelKind::linear());
    }
    CHECK(high > low);
}

TEST_CASE("ra") {
    const Toy toy;
    const FeatureMatrix f(toy.f);
    CHECK(score_ra(f, FeatureMatrix(toy.f, Provenance::random), KernelKind::linear()) == doctest::Approx(1.0).epsilon(1e-14));
    std::mt19937_64 g(2);
    const Matrix q = oracle::random_orthogonal(g, 3);
    CHECK(std::abs(score_ra(FeatureMatrix(toy.f * q), FeatureMatrix(toy.f), KernelKind::linear()) - 1.0) < 1e-12);
    CHECK(std::abs(score_ra(f, FeatureMatrix(toy.r), KernelKind::linear()) - toy.ra_oracle()) < 1e-12);
}

TEST_CASE("kite") {
    CHECK(kite_ratio(0.6, 0.3) == doctest::Approx(2.0));
    CHECK(code_of([] { (void)kite_ratio(0.5, 1e-13); }) == ErrorCode::DegenerateRA);
    CHECK(code_of([] { (void)kite_ratio(0.5, 0.0); }) == ErrorCode::DegenerateRA);

    const Toy toy;
    auto req = toy.request();
    const double k = score_kite(req);
    CHECK(k == score_ta(*req.pretrained, *req.labels, req.kernel) / score_ra(*req.pretrained, *req.random, req.kernel));
    CHECK(std::abs(k - toy.ta_oracle() / toy.ra_oracle()) < 1e-11);

    req.random = FeatureMatrix(toy.f, Provenance::random);
    CHECK(std::abs(score_kite(req) - score_ta(*req.pretrained, *req.labels, req.kernel)) < 1e-12);

    ScoreRequest missing = toy.request();
    missing.random.reset();
    try {
        (void)score_kite(missing);
        FAIL("expected ConfigError");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        CHECK(std::string(e.what()).find("random features required") != std::string::npos);
    }
}

TEST_CASE("linear combination") {
    const Toy toy;
    const auto req = toy.request();
    CHECK(score_linear_combo(req, 0.0) == score_ta(*req.pretrained, *req.labels, req.kernel));
    CHECK(std::abs(score_linear_combo(req, 0.5) - (toy.ta_oracle() - 0.5 * toy.ra_oracle())) < 1e-12);
    // TA = RA when the features are the one-hot labels and the random features equal them.
    Matrix f(4, 2);
    f << 1, 0, 1, 0, 0, 1, 0, 1;
    ScoreRequest same;
    same.pretrained = FeatureMatrix(f);
    same.random = FeatureMatrix(f, Provenance::random);
    same.labels = LabelVector({0, 0, 1, 1});
    CHECK(std::abs(score_linear_combo(same, 1.0)) < 1e-12);
}

TEST_CASE("heuristic") {
    // Printed to four decimals as 64.0638; the exact value is 64.063672...
    CHECK(std::abs(score_heuristic({50, 1281167, 500}) - 64.0638) < 2e-4);
    CHECK(score_heuristic({50, 1281167, 500}) == doctest::Approx(50.0 + std::log(1281667.0)));
    const auto e10 = static_cast<long long>(std::llround(std::exp(10.0)));
    CHECK(score_heuristic({18, e10 - 100, 100}) == doctest::Approx(28.0).epsilon(1e-4));
    CHECK(score_heuristic({7, 1, 0}) == 7.0);
    CHECK(score_heuristic({10, 1000, 10}) < score_heuristic({11, 1000, 10}));
    CHECK(score_heuristic({10, 1000, 10}) < score_heuristic({10, 2000, 10}));
}

TEST_CASE("knn leave-one-out") {
    SUBCASE("two far clusters") {
        Matrix f(10, 2);
        std::vector<int> y;
        for (int i = 0; i < 10; ++i) {
            f(i, 0) = (i < 5 ? 0.0 : 100.0) + 0.01 * i;
            f(i, 1) = 0.02 * i;
            y.push_back(i < 5 ? 0 : 1);
        }
        CHECK(score_knn_cv(FeatureMatrix(f), LabelVector(y), 1) == 1.0);
    }
    SUBCASE("fixed six points, k = 3") {
        Matrix f(6, 2);
        f << 0, 0, 1, 0, 0, 1, 3, 3, 1, 1, 2, 2;
        const std::vector<int> y{0, 0, 1, 1, 1, 0};
        CHECK(score_knn_cv(FeatureMatrix(f), LabelVector(y), 3) == oracle::knn_loo(f, y, 3));
    }
    SUBCASE("random sets match the brute-force oracle") {
        std::mt19937_64 g(41);
        for (int t = 0; t < 40; ++t) {
            const auto n = static_cast<Eigen::Index>(6 + t % 25);
            // Integer grid coordinates force many distance ties.
            Matrix f = oracle::random_matrix(g, n, 2).array().round();
            const auto y = oracle::random_labels(g, static_cast<std::size_t>(n), 3);
            for (int k : {1, 3, 5}) {
                CHECK(score_knn_cv(FeatureMatrix(f), LabelVector(y), k) == oracle::knn_loo(f, y, k));
            }
        }
    }
    SUBCASE("shuffled labels are at chance") {
        double mean = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            std::mt19937_64 g(s);
            const Matrix f = oracle::random_matrix(g, 200, 2);
            mean += score_knn_cv(FeatureMatrix(f), LabelVector(oracle::random_labels(g, 200, 2)), 1) / 10.0;
        }
        CHECK(mean == doctest::Approx(0.5).epsilon(0.2));
    }
    CHECK(code_of([] { (void)score_knn_cv(FeatureMatrix(Matrix::Identity(3, 3)), LabelVector({0, 1, 0}), 3); }) ==
          ErrorCode::TooFewSamples);
}

TEST_CASE("hsic alternative") {
    const Toy toy;
    CHECK(std::abs(score_hsic_alt(FeatureMatrix(toy.f), FeatureMatrix(Matrix::Constant(8, 3, 2.0)), KernelKind::linear())) <
          1e-12);
    CHECK(score_hsic_alt(FeatureMatrix(Matrix::Identity(2, 2)), FeatureMatrix(Matrix::Identity(2, 2)),
                         KernelKind::linear()) == doctest::Approx(1.0));
    const double expected =
        oracle::hsic(oracle::kernel(toy.f, oracle::Kernel::linear), oracle::kernel(toy.r, oracle::Kernel::linear));
    CHECK(std::abs(score_hsic_alt(FeatureMatrix(toy.f), FeatureMatrix(toy.r), KernelKind::linear()) - expected) < 1e-10);
}

TEST_CASE("registry") {
    const auto names = registered_estimators();
    for (const char *n : {"kite", "ta", "ra", "combo", "hsic", "heuristic", "knn"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
    CHECK(code_of([] { (void)make_estimator("logme"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)make_estimator("combo:x"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)make_estimator("knn:0"); }) == ErrorCode::ConfigError);

    const Toy toy;
    const auto req = toy.request();
    CHECK(score("kite", req) == score_kite(req));
    CHECK(score("combo:0.25", req) == score_linear_combo(req, 0.25));
    CHECK(score("knn:3", req) == score_knn_cv(*req.pretrained, *req.labels, 3));
    CHECK(make_estimator("ta")->needs().labels);
    CHECK_FALSE(make_estimator("ta")->needs().random);
    CHECK(make_estimator("heuristic")->needs().meta);
    CHECK(EstimatorSpec::parse("combo:0.5").lambda == 0.5);
    CHECK(EstimatorSpec::parse(EstimatorSpec::parse("knn:5").to_string()).k == 5);

    struct Constant : Estimator {
        [[nodiscard]] std::string name() const override { return "const"; }
        [[nodiscard]] EstimatorNeeds needs() const override { return {}; }
        [[nodiscard]] double score(const ScoreRequest &) const override { return 42.0; }
    };
    register_estimator("const", [](const std::string &) { return std::make_unique<Constant>(); });
    CHECK(score("const", ScoreRequest{}) == 42.0);
}

TEST_CASE("kite invariances") {
    std::mt19937_64 g(77);
    const Matrix f = oracle::random_matrix(g, 40, 5);
    const Matrix r = oracle::random_matrix(g, 40, 5);
    const auto y = oracle::random_labels(g, 40, 4);
    ScoreRequest req;
    req.pretrained = FeatureMatrix(f);
    req.random = FeatureMatrix(r);
    req.labels = LabelVector(y);
    const double base = score_kite(req);

    ScoreRequest scaled = req;
    scaled.pretrained = FeatureMatrix(0.01 * f);
    CHECK(std::abs(score_kite(scaled) - base) < 1e-9);

    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), g);
    ScoreRequest permuted = req;
    permuted.pretrained = req.pretrained->select_rows(perm);
    permuted.random = req.random->select_rows(perm);
    permuted.labels = req.labels->select(perm);
    CHECK(std::abs(score_kite(permuted) - base) < 1e-12);
}
