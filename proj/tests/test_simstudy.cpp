#include "helpers.hpp"

#include "simba/simstudy.hpp"

using namespace simba;
using namespace simba::testing;

namespace {

EffectMap hand_map(std::vector<double> mean, std::vector<double> es, std::vector<double> lo, std::vector<double> hi) {
    EffectMap m;
    m.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), Index(mean.size()));
    m.e_s = Eigen::Map<Eigen::VectorXd>(es.data(), Index(es.size()));
    m.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), Index(lo.size()));
    m.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), Index(hi.size()));
    m.p_plus = 0.5 * (1.0 + m.e_s.array());
    m.set_threshold(0.95);
    return m;
}

} // namespace

TEST_SUITE("simstudy") {

TEST_CASE("taper profile") {
    CHECK(taper(0.0) == 1.0);
    CHECK(taper(0.5) == doctest::Approx(std::cos(std::numbers::pi / 4)));
    CHECK(taper(1.0) == 0.0);
    CHECK(taper(3.0) == 0.0);
    CHECK(taper(0.999) > 0.0);
}

TEST_CASE("truth maps on the phantom") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask());
    const auto t = make_truth(d);
    REQUIRE(t.beta.rows() == 2);
    CHECK(signal_to_noise(t, 2.0) == doctest::Approx(0.3).epsilon(1e-12));
    const auto sup = t.support();
    for (Index k = 0; k < 2; ++k) {
        CHECK(sup.row(k).count() > 100);
        CHECK(sup.row(k).count() < d.size() / 2);
        CHECK(t.beta.row(k).maxCoeff() > 0);
        CHECK(t.beta.row(k).minCoeff() < 0);
        CHECK(t.beta.row(k).maxCoeff() <= t.amplitude + 1e-12);
    }
    // map 1 is the mirror image in sign and geometry
    CHECK(t.beta.row(0).maxCoeff() == doctest::Approx(-t.beta.row(1).minCoeff()).epsilon(0.05));

    // peak of the disk at its center
    const Eigen::RowVector2d cen = d.coords().colwise().mean();
    const Eigen::RowVector2d dc = cen + Eigen::RowVector2d(-0.10, -0.20);
    Index near = 0;
    (d.coords().rowwise() - dc).rowwise().squaredNorm().minCoeff(&near);
    Index top = 0;
    t.beta.row(0).maxCoeff(&top);
    CHECK((d.coords().row(top) - d.coords().row(near)).norm() < 0.02);
    for (Index v = 0; v < d.size(); ++v)
        if ((d.coords().row(v) - dc).norm() >= 0.13 && t.beta(0, v) > 0) FAIL("positive value outside the disk");
}

TEST_CASE("truth configuration errors") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask());
    TruthConfig c;
    c.disk_offset[0] = {-0.12, 0.20};
    CHECK_THROWS_AS(make_truth(d, c), DataError);
    TruthConfig far;
    far.rect_offset[1] = {2.0, 2.0};
    CHECK_THROWS_AS(make_truth(d, far), DataError);
    TruthConfig amp;
    amp.amplitude = 2.0;
    CHECK(make_truth(d, amp).beta.cwiseAbs().maxCoeff() == doctest::Approx(2.0).epsilon(0.05));
    Eigen::MatrixXd c3(4, 3);
    c3 << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    CHECK_THROWS_AS(make_truth(SpatialDomain<double>::from_coordinates(c3)), DataError);
}

TEST_CASE("scenario grid and simulated data") {
    const auto sc = default_scenarios(3, 11);
    REQUIRE(sc.size() == 4);
    CHECK(sc[0].N == 50);
    CHECK(sc[1].sigma_eps == 5.0);
    CHECK(sc[3].N == 200);
    CHECK(sc[0].seed != sc[1].seed);

    const auto a = simulate_dataset(sc[1], 0);
    const auto b = simulate_dataset(sc[1], 0);
    const auto c = simulate_dataset(sc[1], 1);
    CHECK(a.Y == b.Y);
    CHECK(a.X == b.X);
    CHECK(a.X != c.X);
    CHECK_NOTHROW(a.validate());

    // background voxels: variance 1 + sigma^2
    double acc = 0;
    Index n = 0;
    for (Index v = 0; v < a.v(); ++v)
        if (sc[1].truth.beta(0, v) == 0 && sc[1].truth.beta(1, v) == 0) {
            acc += a.Y.col(v).squaredNorm();
            n += a.n();
        }
    CHECK(acc / double(n) == doctest::Approx(26.0).epsilon(0.05));
}

TEST_CASE("correlated noise needs a basis") {
    auto sc = default_scenarios(1, 0, {}, 40)[0];
    sc.noise = NoiseMode::Correlated;
    CHECK_THROWS_AS(simulate_dataset(sc, 0), ConfigError);
    sc.noise_basis = std::make_shared<const BasisSystem<double>>(build_basis_system(sc.domain, KernelConfig{}, 20, 0, 0));
    CHECK(simulate_dataset(sc, 0).Y.allFinite());
}

TEST_CASE("replicate metrics on hand maps") {
    Eigen::MatrixXd truth(1, 4);
    truth << 1.0, 0.0, -2.0, 0.0;
    const auto m = hand_map({1.5, 0.2, -2.0, 0.0}, {0.99, 0.97, -0.99, 0.1}, {0.5, -0.1, -3.0, 0.5},
                            {2.0, 0.5, -1.0, 1.0});
    const auto r = evaluate_replicate(truth, {m});
    CHECK(r.mse == doctest::Approx(100.0 * (0.25 + 0.04) / 4.0));
    CHECK(r.tpr == doctest::Approx(100.0));
    CHECK(r.fdr == doctest::Approx(100.0 / 3.0));
    CHECK(r.coverage == doctest::Approx(75.0));

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 4);
    const auto quiet = hand_map({0, 0, 0, 0}, {0, 0, 0, 0}, {-1, -1, -1, -1}, {1, 1, 1, 1});
    const auto z = evaluate_replicate(zero, {quiet});
    CHECK(z.tpr == 0.0);
    CHECK(z.fdr == 0.0);
    CHECK(z.coverage == 100.0);
    CHECK_THROWS_AS(evaluate_replicate(truth, {}), std::invalid_argument);
}

TEST_CASE("metrics are invariant to voxel order") {
    Rng rng(5);
    const Eigen::MatrixXd truth = (normal_matrix(2, 60, rng).array() > 0.5).cast<double>();
    std::vector<EffectMap> maps;
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd mean = normal_matrix(60, 1, rng).col(0);
        Eigen::VectorXd es = (normal_matrix(60, 1, rng).array().tanh()).matrix();
        maps.push_back(hand_map({mean.data(), mean.data() + 60}, {es.data(), es.data() + 60},
                                std::vector<double>(60, -0.5), std::vector<double>(60, 0.8)));
    }
    std::vector<Index> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd tp(2, 60);
    auto mp = maps;
    for (Index v = 0; v < 60; ++v) {
        tp.col(v) = truth.col(perm[std::size_t(v)]);
        for (std::size_t j = 0; j < 2; ++j) {
            mp[j].mean(v) = maps[j].mean(perm[std::size_t(v)]);
            mp[j].e_s(v) = maps[j].e_s(perm[std::size_t(v)]);
        }
    }
    for (auto& m : mp) m.set_threshold(0.95);
    const auto a = evaluate_replicate(truth, maps);
    const auto b = evaluate_replicate(tp, mp);
    CHECK(a.mse == doctest::Approx(b.mse));
    CHECK(a.tpr == b.tpr);
    CHECK(a.fdr == b.fdr);
    CHECK(a.coverage == b.coverage);
}

TEST_CASE("small study runs and is reproducible") {
    auto sc = default_scenarios(2, 3, {}, 40);
    sc.resize(1);
    sc[0].N = 20;
    StudyOptions opt;
    opt.methods = {Method::SimbaVI, Method::GLM};
    opt.select_L = false;
    opt.fit.L = 30;
    const auto t1 = run_study(sc, opt);
    const auto t2 = run_study(sc, opt);
    CHECK(t1.to_csv() == t2.to_csv());
    REQUIRE(t1.rows.size() == 2);
    CHECK(t1.rows[0].n_ok == 2);
    CHECK(t1.rows[0].L == 30);
    CHECK(t1.find(0, Method::GLM) != nullptr);
    CHECK(t1.find(1, Method::GLM) == nullptr);
    CHECK(t1.records.size() == 4);
    CHECK(t1.to_text().find("glm") != std::string::npos);
}

}
