#include "kite/error.hpp"
#include "kite/estimators.hpp"
#include "kite/random_features.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace kite;

namespace {

double variance(const Matrix &m) {
    const double mean = m.mean();
    return (m.array() - mean).square().sum() / static_cast<double>(m.size() - 1);
}

RandomNetSpec small_spec(Eigen::Index in, Eigen::Index out) {
    RandomNetSpec s;
    s.input_dim = in;
    s.hidden_widths = {16, 8};
    s.output_dim = out;
    return s;
}

}  // namespace

TEST_CASE("init scheme names") {
    CHECK(parse_init_scheme("xavier-normal") == InitScheme::xavier_normal);
    CHECK(parse_init_scheme("he_normal") == InitScheme::he_normal);
    CHECK(parse_init_scheme("he-uniform") == InitScheme::he_uniform);
    CHECK(to_string(InitScheme::he_uniform) == "he-uniform");
    CHECK_THROWS_AS(parse_init_scheme("orthogonal"), Error);
}

TEST_CASE("he uniform support") {
    const Matrix w = init_weights(6, 500, InitScheme::he_uniform, 4);
    const double bound = std::sqrt(6.0 / 6.0);
    CHECK(w.cwiseAbs().maxCoeff() <= bound);
    CHECK(w.cwiseAbs().maxCoeff() > 0.9 * bound);
}

TEST_CASE("he normal variance, fan_in 2") {
    const Matrix w = init_weights(2, 50000, InitScheme::he_normal, 9);
    CHECK(variance(w) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("xavier normal variance, fan_in = fan_out") {
    const Eigen::Index n = 300;
    const Matrix w = init_weights(n, n, InitScheme::xavier_normal, 10);
    CHECK(variance(w) == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(0.05));
}

TEST_CASE("init is deterministic per seed") {
    CHECK(init_weights(4, 5, InitScheme::he_normal, 1) == init_weights(4, 5, InitScheme::he_normal, 1));
    CHECK(init_weights(4, 5, InitScheme::he_normal, 1) != init_weights(4, 5, InitScheme::he_normal, 2));
}

TEST_CASE("random mlp") {
    std::mt19937_64 g(1);
    const FeatureMatrix raw(oracle::random_matrix(g, 20, 3), Provenance::raw);

    SUBCASE("deterministic") {
        auto spec = small_spec(3, 4);
        spec.num_seeds = 1;
        const auto a = random_mlp_features(raw, spec);
        const auto b = random_mlp_features(raw, spec);
        CHECK(a.data() == b.data());
        CHECK(a.provenance() == Provenance::random);
        CHECK(a.n() == 20);
        CHECK(a.d() == 4);
    }
    SUBCASE("zero input gives zero output") {
        const auto out = random_mlp_features(FeatureMatrix(Matrix::Zero(5, 3)), small_spec(3, 4));
        CHECK(out.data() == Matrix::Zero(5, 4));
    }
    SUBCASE("features are averaged before any kernel") {
        auto spec = small_spec(3, 4);
        spec.base_seed = 100;
        Matrix sum = Matrix::Zero(20, 4);
        for (std::uint64_t s = 0; s < 5; ++s) sum += random_mlp_single(raw, spec, 100 + s).data();
        const Matrix expected = sum / 5.0;
        const auto avg = random_mlp_features(raw, spec);
        CHECK(avg.data() == expected);

        // RA of the averaged features is not the average of per-seed RA.
        const FeatureMatrix f(oracle::random_matrix(g, 20, 4));
        double mean_ra = 0.0;
        for (std::uint64_t s = 0; s < 5; ++s) {
            mean_ra += score_ra(f, random_mlp_single(raw, spec, 100 + s), KernelKind::linear()) / 5.0;
        }
        CHECK(std::abs(score_ra(f, avg, KernelKind::linear()) - mean_ra) > 1e-9);
    }
    SUBCASE("averaging reduces variance") {
        auto spec = small_spec(3, 4);
        Matrix single(20, 20 * 4);
        Matrix averaged(20, 20 * 4);
        for (int draw = 0; draw < 20; ++draw) {
            spec.num_seeds = 1;
            spec.base_seed = 1000 + static_cast<std::uint64_t>(draw);
            const auto one = random_mlp_features(raw, spec).data();
            spec.num_seeds = 5;
            spec.base_seed = 5000 + 5 * static_cast<std::uint64_t>(draw);
            const auto five = random_mlp_features(raw, spec).data();
            single.row(draw) = Eigen::Map<const Eigen::RowVectorXd>(one.data(), one.size());
            averaged.row(draw) = Eigen::Map<const Eigen::RowVectorXd>(five.data(), five.size());
        }
        // Entry-wise variance across draws, then averaged over entries.
        auto entry_var = [](const Matrix &m) {
            const Eigen::RowVectorXd mu = m.colwise().mean();
            return (m.rowwise() - mu).array().square().colwise().sum().mean() / static_cast<double>(m.rows() - 1);
        };
        CHECK(entry_var(single) > entry_var(averaged));
    }
    SUBCASE("dimension mismatch") {
        try {
            (void)random_mlp_features(raw, small_spec(4, 2));
            FAIL("expected DimMismatch");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::DimMismatch);
        }
    }
    SUBCASE("invalid spec") {
        auto spec = small_spec(3, 4);
        spec.num_seeds = 0;
        CHECK_THROWS_AS(random_mlp_features(raw, spec), Error);
        spec = small_spec(3, 0);
        CHECK_THROWS_AS(random_mlp_features(raw, spec), Error);
    }
}

TEST_CASE("standard normal random features") {
    const auto f = gaussian_random_features(1000, 1000, 3);
    const Matrix &m = f.data();
    CHECK(std::abs(m.mean()) < 0.01);
    CHECK(std::abs(variance(m) - 1.0) < 0.01);
    CHECK(gaussian_random_features(3, 2, 5).data() == gaussian_random_features(3, 2, 5).data());
    CHECK(f.provenance() == Provenance::random);
}
