#include "helpers.hpp"

using namespace simba;
using namespace simba::testing;

namespace {

Dataset<double> glm_data() {
    Dataset<double> d;
    Eigen::MatrixXd c(2, 1);
    c << 0, 1;
    d.domain = SpatialDomain<double>::from_coordinates(c);
    Eigen::VectorXd x(6);
    x << 0.5, -1.2, 0.3, 2.0, -0.7, 1.1;
    d.X.resize(6, 2);
    d.X.col(0).setOnes();
    d.X.col(1) = x;
    d.Y.resize(6, 2);
    Eigen::VectorXd e(6);
    e << 0.1, -0.2, 0.05, 0.3, -0.1, 0.0;
    d.Y.col(0) = (1.0 + 2.0 * x.array()).matrix() + e;
    d.Y.col(1) << 0.3, -0.1, 0.2, 0.0, 0.1, -0.4;
    return d;
}

} // namespace

TEST_SUITE("baselines") {

TEST_CASE("benjamini-hochberg adjustment") {
    Eigen::VectorXd p(7);
    p << 0.01, 0.04, 0.03, 0.2, 0.005, 0.5, 0.04;
    const auto r = bh_adjust(p);
    const double adj[] = {0.035000000000000003, 0.056000000000000001, 0.056000000000000001, 0.23333333333333336,
                          0.035000000000000003, 0.5, 0.056000000000000001};
    const bool rej[] = {true, false, false, false, true, false, false};
    for (Index i = 0; i < 7; ++i) {
        CHECK(r.adjusted(i) == doctest::Approx(adj[i]).epsilon(1e-14));
        CHECK(r.reject(i) == rej[i]);
    }
    Eigen::VectorXd bad(1);
    bad << 1.5;
    CHECK_THROWS_AS(bh_adjust(bad), std::invalid_argument);
}

TEST_CASE("adjusted p-values are monotone in the raw ones") {
    Rng rng(1);
    Eigen::VectorXd p(200);
    std::uniform_real_distribution<double> u(0, 1);
    for (Index i = 0; i < 200; ++i) p(i) = std::pow(u(rng), 3);
    const auto r = bh_adjust(p);
    for (Index a = 0; a < 200; ++a)
        for (Index b = 0; b < 200; ++b)
            if (p(a) < p(b)) CHECK(r.adjusted(a) <= r.adjusted(b));
    CHECK(((r.adjusted.array() >= p.array() * (1 - 1e-12)) && (r.adjusted.array() <= 1.0)).all());
}

TEST_CASE("voxelwise OLS") {
    const auto d = glm_data();
    const auto g = glm_fit(d);
    const double coef[] = {0.97974559686888463, 0.027103718199608638, 2.1357632093933465, -0.03131115459882583};
    const double se[] = {0.032555119806760957, 0.11746801518063209, 0.029157086428689589, 0.10520695643445339};
    const double pv[] = {7.2608118522050991e-06, 0.82884331383380117, 2.0814976818563066e-07, 0.78081422424896318};
    const double tq = 2.7764451051977987;
    CHECK(g.df == 4);
    for (Index j = 0; j < 2; ++j)
        for (Index v = 0; v < 2; ++v) {
            const std::size_t k = std::size_t(j * 2 + v);
            CHECK(g.coef(j, v) == doctest::Approx(coef[k]).epsilon(1e-12));
            CHECK(g.se(j, v) == doctest::Approx(se[k]).epsilon(1e-12));
            CHECK(g.p(j, v) == doctest::Approx(pv[k]).epsilon(1e-9));
            CHECK(g.lower(j, v) == doctest::Approx(coef[k] - tq * se[k]).epsilon(1e-12));
            CHECK(g.upper(j, v) == doctest::Approx(coef[k] + tq * se[k]).epsilon(1e-12));
        }
    const auto maps = g.effect_maps();
    REQUIRE(maps.size() == 2);
    CHECK(maps[1].active(0));
    CHECK_FALSE(maps[1].active(1));
    CHECK(maps[1].e_s(0) > 0.95);
}

TEST_CASE("rank-deficient design is rejected") {
    auto d = glm_data();
    d.X.conservativeResize(Eigen::NoChange, 3);
    d.X.col(2) = 2.0 * d.X.col(1);
    CHECK_THROWS_AS(glm_fit(d), DataError);
    auto small = glm_data();
    small.Y.conservativeResize(2, Eigen::NoChange);
    small.X.conservativeResize(2, Eigen::NoChange);
    CHECK_THROWS_AS(glm_fit(small), DataError);
}

TEST_CASE("hierarchical baseline recovers a constant effect") {
    Dataset<double> d;
    d.domain = SpatialDomain<double>::from_mask(phantom_mask(12));
    const Index V = d.domain.size(), N = 60;
    Rng rng(9);
    d.X.resize(N, 2);
    d.X.col(0).setOnes();
    d.X.col(1) = normal_matrix(N, 1, rng);
    d.Y = d.X.col(1) * Eigen::RowVectorXd::Constant(V, 1.5) + normal_matrix(N, V, rng, 0.5);
    GibbsConfig cfg;
    cfg.n_iter = 600;
    cfg.n_burnin = 300;
    cfg.n_chains = 2;
    cfg.seed = 4;
    const auto r = bml_fit(d, cfg);
    REQUIRE(r.maps.size() == 2);
    CHECK(std::abs(r.gamma_mean(1) - 1.5) < 0.1);
    CHECK(std::abs(r.maps[1].mean.mean() - 1.5) < 0.1);
    CHECK(r.maps[1].active.count() == V);
    CHECK(r.chains.size() == 2);
    CHECK(r.posterior_mean.rows() == 2);
    BMLOptions bad;
    bad.fixed_tau2 = -1.0;
    CHECK_THROWS_AS(bml_fit(d, cfg, bad), ConfigError);
}

}
