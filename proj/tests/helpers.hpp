#pragma once

#include "simba/io.hpp"

#include <doctest.h>

namespace simba::testing {

inline Eigen::MatrixXd orthonormal(Index rows, Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = std_normal<double>(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

inline Eigen::MatrixXd normal_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = scale * std_normal<double>(rng);
    return m;
}

// Hand-built instance: V voxels, ranks L and L_eta, N participants with intercept + one covariate.
struct SmallProblem {
    std::shared_ptr<const BasisSystem<double>> basis;
    Eigen::MatrixXd Y, X;
    TransformedDataset<double> tdata;
};

inline SmallProblem small_problem(Index N = 5, Index V = 6, Index L = 3, Index Le = 2, std::uint64_t seed = 11) {
    SmallProblem p;
    Eigen::VectorXd lam(L), lam_eta(Le);
    for (Index l = 0; l < L; ++l) lam(l) = 2.0 / double(l + 1);
    for (Index l = 0; l < Le; ++l) lam_eta(l) = 1.5 / double(l + 1);
    p.basis = std::make_shared<const BasisSystem<double>>(
        basis_from_factors<double>(orthonormal(V, L, seed), lam, orthonormal(V, Le, seed + 1), lam_eta));
    Rng rng(seed + 2);
    p.X.resize(N, 2);
    p.X.col(0).setOnes();
    p.X.col(1) = normal_matrix(N, 1, rng);
    p.Y = normal_matrix(N, V, rng);
    p.Y.col(0).array() += 1.0;
    p.Y += p.X.col(1) * Eigen::RowVectorXd::LinSpaced(V, -1.0, 1.0);
    p.tdata = transform_responses<double>(p.Y, p.X, p.basis);
    return p;
}

inline ParameterState<double> pinned_state(const TransformedDataset<double>& t) {
    ParameterState<double> s = init_state(t, PriorConfig{}, 5);
    s.sigma2_alpha = 2.0;
    s.sigma2_beta = 1.5;
    s.sigma2_eta = 0.8;
    s.sigma2_eps = 0.5;
    return s;
}

// Exact Gaussian posterior of (alpha, theta_beta, theta_eta) with all variances fixed,
// assembled as one dense linear model over vec(Y~).
struct DensePosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Index P, L, N, Le;

    ParameterState<double> unpack(const Eigen::VectorXd& u, const ParameterState<double>& like) const {
        ParameterState<double> s = like;
        s.alpha = u.head(P);
        for (Index j = 0; j < P; ++j) s.theta_beta.row(j) = u.segment(P + j * L, L).transpose();
        for (Index i = 0; i < N; ++i) s.theta_eta.row(i) = u.segment(P + P * L + i * Le, Le).transpose();
        return s;
    }
};

inline DensePosterior dense_posterior(const TransformedDataset<double>& t, const ParameterState<double>& s) {
    const auto& b = *t.basis;
    DensePosterior d;
    d.P = t.p();
    d.L = t.rank();
    d.N = t.n();
    d.Le = b.rank_eta();
    const Index dim = d.P + d.P * d.L + d.N * d.Le;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d.N * d.L, dim);
    Eigen::VectorXd y(d.N * d.L);
    for (Index i = 0; i < d.N; ++i)
        for (Index l = 0; l < d.L; ++l) {
            const Index r = i * d.L + l;
            y(r) = t.y_tilde(i, l);
            for (Index j = 0; j < d.P; ++j) {
                D(r, j) = t.X(i, j) * b.ones_phi(l);
                D(r, d.P + j * d.L + l) = t.X(i, j);
            }
            for (Index k = 0; k < d.Le; ++k) D(r, d.P + d.P * d.L + i * d.Le + k) = b.phi_eta(k, l);
        }
    Eigen::VectorXd prior(dim);
    prior.head(d.P).setConstant(1.0 / s.sigma2_alpha);
    prior.segment(d.P, d.P * d.L).setConstant(1.0 / s.sigma2_beta);
    prior.tail(d.N * d.Le).setConstant(1.0 / s.sigma2_eta);
    Eigen::MatrixXd Q = D.transpose() * D / s.sigma2_eps;
    Q.diagonal() += prior;
    d.cov = Q.inverse();
    d.mean = d.cov * D.transpose() * y / s.sigma2_eps;
    return d;
}

inline Eigen::VectorXd pack(const ParameterState<double>& s) {
    const Index P = s.alpha.size(), L = s.theta_beta.cols(), N = s.theta_eta.rows(), Le = s.theta_eta.cols();
    Eigen::VectorXd u(P + P * L + N * Le);
    u.head(P) = s.alpha;
    for (Index j = 0; j < P; ++j) u.segment(P + j * L, L) = s.theta_beta.row(j).transpose();
    for (Index i = 0; i < N; ++i) u.segment(P + P * L + i * Le, Le) = s.theta_eta.row(i).transpose();
    return u;
}

// Linear identifiability map applied to a packed vector.
inline Eigen::VectorXd centered(const Eigen::VectorXd& u, const DensePosterior& d, const ParameterState<double>& like,
                                const BasisSystem<double>& basis) {
    return pack(apply_identifiability(d.unpack(u, like), basis));
}

// Batch-means Monte Carlo standard error of each column of `draws`.
inline Eigen::VectorXd batch_se(const Eigen::MatrixXd& draws, Index batches = 50) {
    const Index n = draws.rows() / batches;
    Eigen::MatrixXd means(batches, draws.cols());
    for (Index b = 0; b < batches; ++b) means.row(b) = draws.middleRows(b * n, n).colwise().mean();
    const Eigen::RowVectorXd mu = means.colwise().mean();
    return ((means.rowwise() - mu).colwise().squaredNorm() / double(batches - 1) / double(batches))
        .cwiseSqrt()
        .transpose();
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("simba_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Eigen::MatrixXd dense_gram(const Eigen::MatrixXd& coords, const KernelConfig& k) {
    const Index V = coords.rows();
    Eigen::MatrixXd K(V, V);
    for (Index a = 0; a < V; ++a)
        for (Index b = 0; b < V; ++b) K(a, b) = matern_kernel((coords.row(a) - coords.row(b)).norm(), k);
    return K;
}

} // namespace simba::testing
