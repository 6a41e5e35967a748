#include "helpers.hpp"

#include <set>

using namespace simba;
using namespace simba::testing;

namespace {

SpatialDomain<double> full_grid(int rows, int cols) {
    MaskGrid m;
    m.dims = {rows, cols};
    m.inside.assign(std::size_t(rows * cols), 1);
    return SpatialDomain<double>::from_mask(m);
}

double approx_error(const SpatialDomain<double>& d, const KernelConfig& k, Index L) {
    const auto f = nystrom_decompose(d, select_inducing(d, L, InducingStrategy::FarthestPoint, 0), k);
    const Eigen::MatrixXd K = dense_gram(d.coords(), k);
    return (K - f.psi * f.lambda.asDiagonal() * f.psi.transpose()).norm() / K.norm();
}

} // namespace

TEST_SUITE("kernel") {

TEST_CASE("matern closed forms match the Bessel-function definition") {
    struct Row {
        double nu, r, value;
    };
    const Row rows[] = {{0.5, 0.05, 0.7788007830714051},   {0.5, 0.1, 0.60653065971263365},
                        {0.5, 0.3, 0.22313016014842996},   {1.5, 0.05, 0.92938361769648059},
                        {1.5, 0.1, 0.78488765395745075},   {1.5, 0.3, 0.26775660686440944},
                        {2.5, 0.05, 0.95095992167863319},  {2.5, 0.1, 0.82864914241812559},
                        {2.5, 0.3, 0.28316327133979941}};
    for (const auto& row : rows) {
        KernelConfig k{row.nu, 0.2, 0.0};
        CHECK(matern_kernel(row.r, k) == doctest::Approx(row.value).epsilon(1e-13));
    }
    CHECK(matern_kernel(0.0, KernelConfig{}) == 1.0);
    CHECK_THROWS_AS(matern_kernel(-0.1, KernelConfig{}), std::domain_error);
}

TEST_CASE("kernel config validation") {
    CHECK_THROWS_AS((KernelConfig{1.0, 0.1, 0.0}).validate(), ConfigError);
    CHECK_THROWS_AS((KernelConfig{1.5, 0.0, 0.0}).validate(), ConfigError);
    CHECK_THROWS_AS((KernelConfig{1.5, 0.1, -1.0}).validate(), ConfigError);
}

TEST_CASE("gram is symmetric with unit diagonal") {
    const auto d = full_grid(6, 7);
    const Eigen::MatrixXd K = gram(d.coords(), d.coords(), KernelConfig{});
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((K.diagonal().array() == 1.0).all());
    CHECK((K - dense_gram(d.coords(), KernelConfig{})).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::MatrixXd three(2, 3);
    CHECK_THROWS_AS(gram(d.coords(), three, KernelConfig{}), std::invalid_argument);
}

TEST_CASE("farthest-point inducing set") {
    Eigen::MatrixXd c(5, 2);
    c << 0, 0, 0, 1, 1, 0, 1, 1, 0.5, 0.5;
    const auto d = SpatialDomain<double>::from_coordinates(c);
    CHECK(select_inducing(d, 1, InducingStrategy::FarthestPoint, 0) == IndexSet{4});
    auto four = select_inducing(d, 4, InducingStrategy::FarthestPoint, 0);
    std::sort(four.begin(), four.end());
    CHECK(four == IndexSet{0, 1, 2, 3});

    const auto g = full_grid(9, 11);
    const auto big = select_inducing(g, 30, InducingStrategy::FarthestPoint, 0);
    const auto small = select_inducing(g, 12, InducingStrategy::FarthestPoint, 0);
    CHECK(std::equal(small.begin(), small.end(), big.begin()));
    CHECK(std::set<Index>(big.begin(), big.end()).size() == big.size());
    CHECK_THROWS_AS(select_inducing(g, 0, InducingStrategy::FarthestPoint, 0), std::invalid_argument);
    CHECK_THROWS_AS(select_inducing(g, 100, InducingStrategy::FarthestPoint, 0), std::invalid_argument);
}

TEST_CASE("uniform random inducing set is seeded and distinct") {
    const auto g = full_grid(9, 11);
    const auto a = select_inducing(g, 40, InducingStrategy::UniformRandom, 3);
    const auto b = select_inducing(g, 40, InducingStrategy::UniformRandom, 3);
    const auto c = select_inducing(g, 40, InducingStrategy::UniformRandom, 4);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(std::set<Index>(a.begin(), a.end()).size() == 40);
}

TEST_CASE("exact recovery at L = V") {
    const auto d = full_grid(10, 10);
    KernelConfig k{1.5, 0.09, 1e-10};
    CHECK(approx_error(d, k, d.size()) < 1e-6);
}

TEST_CASE("psi has orthonormal columns and positive eigenvalues") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask(32));
    const auto f = nystrom_decompose(d, select_inducing(d, 60, InducingStrategy::FarthestPoint, 0), KernelConfig{});
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(f.psi.cols(), f.psi.cols());
    CHECK((f.psi.transpose() * f.psi - I).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.lambda.array() > 0).all());
    for (Index l = 1; l < f.lambda.size(); ++l) CHECK(f.lambda(l) <= f.lambda(l - 1));
}

TEST_CASE("reconstruction error is monotone in L") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask(24));
    KernelConfig k{1.5, 0.09, 1e-8};
    double prev = std::numeric_limits<double>::infinity();
    for (Index L : {5, 10, 20, 40, 80, 160}) {
        const double e = approx_error(d, k, L);
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
}

TEST_CASE("low-rank approximation is positive semidefinite") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask(24));
    for (Index L : {7, 50}) {
        const auto f = nystrom_decompose(d, select_inducing(d, L, InducingStrategy::FarthestPoint, 0), KernelConfig{});
        const Eigen::MatrixXd A = f.psi * f.lambda.asDiagonal() * f.psi.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
}

TEST_CASE("basis system projections") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask(24));
    const auto b = build_basis_system(d, KernelConfig{}, 40, 0, 7);
    CHECK(b.rank() == 40);
    CHECK(b.rank_eta() == 4);
    const Eigen::MatrixXd phi = b.psi * b.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
    CHECK((b.phi - phi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.ones_phi - Eigen::RowVectorXd::Ones(d.size()) * phi).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::MatrixXd pe = b.lambda_eta.cwiseSqrt().asDiagonal() * b.psi_eta.transpose() * phi;
    CHECK((b.phi_eta - pe).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.loading() - b.psi * b.lambda.cwiseSqrt().asDiagonal()).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(build_basis_system(d, KernelConfig{}, 0, 0, 7), ConfigError);
    CHECK_THROWS_AS(build_basis_system(d, KernelConfig{}, 10, 11, 7), ConfigError);
    CHECK_THROWS_AS(build_basis_system(d, KernelConfig{}, d.size() + 1, 1, 7), ConfigError);
}

TEST_CASE("float factors agree with double on a shared inducing set") {
    const auto d = SpatialDomain<double>::from_mask(phantom_mask(20));
    const auto ind = select_inducing(d, 12, InducingStrategy::FarthestPoint, 1);
    const auto bd = nystrom_decompose(d, ind, KernelConfig{});
    const auto bf = nystrom_decompose(d.cast<float>(), ind, KernelConfig{});
    const Eigen::MatrixXd Kd = bd.psi * bd.lambda.asDiagonal() * bd.psi.transpose();
    const Eigen::MatrixXd Kf = (bf.psi * bf.lambda.asDiagonal() * bf.psi.transpose()).cast<double>();
    CHECK((Kd - Kf).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("phantom mask size") {
    const auto m = phantom_mask();
    CHECK(m.dims == std::vector<int>{96, 96});
    CHECK(m.count() > 4000);
    CHECK(m.count() < 5000);
}

}
