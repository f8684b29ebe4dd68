#include "kite/error.hpp"
#include "kite/kernel.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <limits>

using namespace kite;

namespace {

KernelMatrix wrap(const Matrix &m) { return {m, false, KernelKind::linear()}; }

Matrix random_psd(std::mt19937_64 &g, Eigen::Index n) {
    const Matrix a = oracle::random_matrix(g, n, n + 2);
    return a * a.transpose();
}

double max_abs(const Matrix &m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("linear kernel of the 2x2 identity") {
    const auto k = compute_kernel(FeatureMatrix(Matrix::Identity(2, 2)), KernelKind::linear());
    CHECK(k.data == Matrix::Identity(2, 2));
    CHECK_FALSE(k.centered);
}

TEST_CASE("gaussian of identical rows is all ones") {
    for (double sigma : {0.1, 1.0, 7.5}) {
        const auto k = compute_kernel(FeatureMatrix(Matrix::Constant(4, 3, 2.0)), KernelKind::gaussian(sigma));
        CHECK(k.data == Matrix::Ones(4, 4));
    }
}

TEST_CASE("kernels match the double-loop oracle") {
    std::mt19937_64 g(11);
    const Matrix x = oracle::random_matrix(g, 8, 3);
    const FeatureMatrix f(x);
    CHECK(max_abs(compute_kernel(f, KernelKind::linear()).data - oracle::kernel(x, oracle::Kernel::linear)) < 1e-12);
    CHECK(max_abs(compute_kernel(f, KernelKind::gaussian(1.3)).data - oracle::kernel(x, oracle::Kernel::gaussian, 1.3)) < 1e-12);
    CHECK(max_abs(compute_kernel(f, KernelKind::gaussian_unsquared(0.8)).data -
                  oracle::kernel(x, oracle::Kernel::gaussian_unsquared, 0.8)) < 1e-12);
    CHECK(max_abs(compute_kernel(f, KernelKind::laplacian(2.0)).data - oracle::kernel(x, oracle::Kernel::laplacian, 2.0)) < 1e-12);
}

TEST_CASE("median heuristic bandwidth") {
    // Distances on a line 0, 1, 3: pairs 1, 3, 2 -> median 2.
    Matrix x(3, 1);
    x << 0, 1, 3;
    CHECK(median_heuristic_bandwidth(x, KernelFamily::gaussian) == doctest::Approx(2.0));
    Matrix y(3, 2);
    y << 0, 0, 1, 1, 3, 0;
    // L1 distances: 2, 3, 3 -> 3.
    CHECK(median_heuristic_bandwidth(y, KernelFamily::laplacian) == doctest::Approx(3.0));
    CHECK(median_heuristic_bandwidth(Matrix::Zero(4, 2), KernelFamily::gaussian) == 1.0);

    const auto k = compute_kernel(FeatureMatrix(x), KernelKind::gaussian());
    REQUIRE(k.kind.bandwidth.has_value());
    CHECK(*k.kind.bandwidth == doctest::Approx(2.0));
    CHECK(k.data(0, 2) == doctest::Approx(std::exp(-9.0 / 8.0)));
}

TEST_CASE("bad bandwidth and non-finite input") {
    const FeatureMatrix f(Matrix::Identity(3, 3));
    CHECK_THROWS_AS(compute_kernel(f, KernelKind::gaussian(0.0)), Error);
    CHECK_THROWS_AS(compute_kernel(f, KernelKind::laplacian(-1.0)), Error);
    try {
        (void)compute_kernel(f, KernelKind::gaussian(std::numeric_limits<double>::quiet_NaN()));
        FAIL("expected InvalidBandwidth");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::InvalidBandwidth);
    }
    Matrix bad = Matrix::Zero(2, 2);
    bad(1, 1) = std::numeric_limits<double>::infinity();
    try {
        FeatureMatrix tmp(bad);
        FAIL("expected NonFiniteInput");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::NonFiniteInput);
    }
}

TEST_CASE("kernel kind parsing") {
    CHECK(KernelKind::parse("linear") == KernelKind::linear());
    CHECK(KernelKind::parse("gaussian") == KernelKind::gaussian());
    CHECK(KernelKind::parse("rbf") == KernelKind::gaussian());
    CHECK(KernelKind::parse("gaussian:0.5") == KernelKind::gaussian(0.5));
    CHECK(KernelKind::parse("gaussian-unsquared:2") == KernelKind::gaussian_unsquared(2.0));
    CHECK(KernelKind::parse("laplacian:3") == KernelKind::laplacian(3.0));
    CHECK(KernelKind::parse(KernelKind::laplacian(0.25).to_string()) == KernelKind::laplacian(0.25));
    CHECK_THROWS_AS(KernelKind::parse("polynomial"), Error);
    CHECK_THROWS_AS(KernelKind::parse("gaussian:abc"), Error);
}

TEST_CASE("centering") {
    SUBCASE("all-ones centers to zero") {
        CHECK(max_abs(center_kernel(wrap(Matrix::Ones(5, 5))).data) < 1e-15);
    }
    std::mt19937_64 g(3);
    Matrix a = oracle::random_matrix(g, 6, 6);
    const Matrix k = (a + a.transpose()) / 2.0;
    SUBCASE("matches the explicit HKH product") {
        const auto c = center_kernel(wrap(k));
        CHECK(c.centered);
        CHECK(max_abs(c.data - oracle::centered(k)) < 1e-12);
    }
    SUBCASE("idempotent") {
        const auto c = center_kernel(wrap(k));
        CHECK(max_abs(center_kernel(c).data - c.data) < 1e-12);
        CHECK(max_abs(center_kernel(wrap(c.data)).data - c.data) < 1e-12);
    }
}

TEST_CASE("target kernel") {
    const Matrix k = target_kernel(LabelVector({0, 0, 1, 1})).data;
    Matrix expected(4, 4);
    expected << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1;
    CHECK(k == expected);
    CHECK(target_kernel(LabelVector({2, 2, 2})).data == Matrix::Ones(3, 3));
    CHECK(target_kernel(LabelVector({0, 1, 2, 3})).data == Matrix::Identity(4, 4));
}

TEST_CASE("alignment") {
    std::mt19937_64 g(5);
    const Matrix k1 = random_psd(g, 5);
    const Matrix k2 = random_psd(g, 5);
    CHECK(alignment(wrap(k1), wrap(k1)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(alignment(wrap(k1), wrap(3.7 * k1)) == doctest::Approx(1.0).epsilon(1e-14));
    double s12 = 0, s11 = 0, s22 = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            s12 += k1(i, j) * k2(i, j);
            s11 += k1(i, j) * k1(i, j);
            s22 += k2(i, j) * k2(i, j);
        }
    }
    CHECK(std::abs(alignment(wrap(k1), wrap(k2)) - s12 / std::sqrt(s11 * s22)) < 1e-12);
    try {
        (void)alignment(wrap(Matrix::Zero(3, 3)), wrap(k1.topLeftCorner(3, 3)));
        FAIL("expected DegenerateKernel");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::DegenerateKernel);
    }
}

TEST_CASE("cka") {
    SUBCASE("features equal to one-hot labels") {
        Matrix f(4, 2);
        f << 1, 0, 1, 0, 0, 1, 0, 1;
        const auto ks = compute_kernel(FeatureMatrix(f), KernelKind::linear());
        CHECK(cka(ks, target_kernel(LabelVector({0, 0, 1, 1}))) == doctest::Approx(1.0).epsilon(1e-14));
    }
    std::mt19937_64 g(17);
    const Matrix k1 = random_psd(g, 20);
    const Matrix k2 = random_psd(g, 20);
    SUBCASE("self") { CHECK(std::abs(cka(wrap(k1), wrap(k1)) - 1.0) < 1e-12); }
    SUBCASE("normalized hsic") { CHECK(std::abs(cka(wrap(k1), wrap(k2)) - oracle::cka(k1, k2)) < 1e-10); }
    SUBCASE("symmetric") { CHECK(std::abs(cka(wrap(k1), wrap(k2)) - cka(wrap(k2), wrap(k1))) < 1e-14); }
    SUBCASE("permutation of both arguments") {
        std::vector<int> p(20);
        std::iota(p.begin(), p.end(), 0);
        std::shuffle(p.begin(), p.end(), g);
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(Eigen::Map<Eigen::VectorXi>(p.data(), 20));
        const Matrix p1 = perm * k1 * perm.transpose();
        const Matrix p2 = perm * k2 * perm.transpose();
        CHECK(std::abs(cka(wrap(p1), wrap(p2)) - cka(wrap(k1), wrap(k2))) < 1e-12);
    }
    SUBCASE("pre-centered inputs give the same value") {
        CHECK(std::abs(cka(center_kernel(wrap(k1)), wrap(k2)) - cka(wrap(k1), wrap(k2))) < 1e-12);
    }
    SUBCASE("constant features are degenerate") {
        const auto kc = compute_kernel(FeatureMatrix(Matrix::Constant(6, 2, 1.5)), KernelKind::linear());
        try {
            (void)cka(kc, wrap(k1.topLeftCorner(6, 6)));
            FAIL("expected DegenerateKernel");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::DegenerateKernel);
        }
    }
    SUBCASE("constant labels are degenerate") {
        CHECK_THROWS_AS(cka(wrap(k1.topLeftCorner(4, 4)), target_kernel(LabelVector({1, 1, 1, 1}))), Error);
    }
    SUBCASE("shape mismatch") {
        try {
            (void)cka(wrap(k1), wrap(k2.topLeftCorner(5, 5)));
            FAIL("expected ShapeMismatch");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::ShapeMismatch);
        }
    }
}

TEST_CASE("hsic") {
    CHECK(hsic(wrap(Matrix::Identity(2, 2)), wrap(Matrix::Identity(2, 2))) == doctest::Approx(1.0).epsilon(1e-15));
    std::mt19937_64 g(23);
    const Matrix k = random_psd(g, 10);
    const Matrix l = random_psd(g, 10);
    CHECK(std::abs(hsic(wrap(k), wrap(Matrix::Ones(10, 10)))) < 1e-12);
    CHECK(std::abs(hsic(wrap(k), wrap(l)) - oracle::hsic(k, l)) < 1e-10 * std::max(1.0, std::abs(oracle::hsic(k, l))));
    CHECK(hsic(wrap(k), wrap(k)) >= 0.0);
}

TEST_CASE("linear cka invariances") {
    std::mt19937_64 g(29);
    const Matrix f = oracle::random_matrix(g, 30, 6);
    const Matrix r = oracle::random_matrix(g, 30, 4);
    const Matrix q = oracle::random_orthogonal(g, 6);
    const auto kr = compute_kernel(FeatureMatrix(r), KernelKind::linear());
    const double base = cka(compute_kernel(FeatureMatrix(f), KernelKind::linear()), kr);
    CHECK(std::abs(cka(compute_kernel(FeatureMatrix(f * q), KernelKind::linear()), kr) - base) < 1e-9);
    CHECK(std::abs(cka(compute_kernel(FeatureMatrix(4.5 * f), KernelKind::linear()), kr) - base) < 1e-12);
}

TEST_CASE("frobenius inner product is exact and order-free") {
    Matrix a(1, 3), ones = Matrix::Ones(1, 3);
    a << 1e16, 1.0, -1e16;
    CHECK(frobenius_inner(a, ones) == 1.0);
    a << 1e308, 1e308, -1e308;
    CHECK(frobenius_inner(a, ones) == 1e308);
    a << 4.9e-324, 4.9e-324, 0.0;
    CHECK(frobenius_inner(a, ones) == 2 * 4.9e-324);

    std::mt19937_64 g(31);
    std::vector<double> v(4000);
    std::uniform_real_distribution<double> exponent(-40.0, 40.0);
    for (auto &x : v) x = (g() % 2 ? 1.0 : -1.0) * std::exp(exponent(g));
    const Matrix row = Eigen::Map<const Matrix>(v.data(), 1, static_cast<Eigen::Index>(v.size()));
    const Matrix one_row = Matrix::Ones(1, row.cols());
    const double s = frobenius_inner(row, one_row);
    for (int rep = 0; rep < 5; ++rep) {
        std::shuffle(v.begin(), v.end(), g);
        CHECK(frobenius_inner(Eigen::Map<const Matrix>(v.data(), 1, row.cols()), one_row) == s);
    }
    // Matches a long double accumulation of the sorted-by-magnitude values.
    std::sort(v.begin(), v.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
    long double ref = 0.0L;
    for (double x : v) ref += x;
    CHECK(std::abs(s - static_cast<double>(ref)) <= 1e-12 * std::abs(s));
    CHECK_THROWS_AS(frobenius_inner(Matrix::Ones(2, 2), Matrix::Ones(2, 3)), Error);
}
