#pragma once

#include "simba/domain.hpp"
#include "simba/errors.hpp"
#include "simba/parallel.hpp"
#include "simba/random.hpp"
#include "simba/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace simba {

struct KernelConfig {
    double nu = 1.5;
    double length_scale = 0.09;
    double nugget = 1e-6;

    void validate() const {
        if (!(nu == 0.5 || nu == 1.5 || nu == 2.5))
            throw ConfigError("kernel.nu must be one of 0.5, 1.5, 2.5 (got " + std::to_string(nu) + ")");
        if (!(length_scale > 0) || !std::isfinite(length_scale))
            throw ConfigError("kernel.length_scale must be positive");
        if (!(nugget >= 0) || !std::isfinite(nugget))
            throw ConfigError("kernel.nugget must be nonnegative");
    }
};

enum class InducingStrategy { FarthestPoint, UniformRandom };

namespace detail {

template <typename Scalar>
Scalar matern_unchecked(Scalar r, double nu, Scalar ell) {
    using std::exp;
    using std::sqrt;
    if (nu == 0.5) return exp(-r / ell);
    if (nu == 1.5) {
        const Scalar a = sqrt(Scalar(3)) * r / ell;
        return (Scalar(1) + a) * exp(-a);
    }
    const Scalar a = sqrt(Scalar(5)) * r / ell;
    return (Scalar(1) + a + a * a / Scalar(3)) * exp(-a);
}

} // namespace detail

template <typename Scalar>
Scalar matern_kernel(Scalar r, const KernelConfig& cfg) {
    cfg.validate();
    if (!(r >= Scalar(0))) throw std::domain_error("matern_kernel: distance must be nonnegative");
    return detail::matern_unchecked<Scalar>(r, cfg.nu, static_cast<Scalar>(cfg.length_scale));
}

template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> gram(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b,
                                       const KernelConfig& cfg) {
    using Scalar = typename DerivedA::Scalar;
    cfg.validate();
    if (a.cols() != b.cols())
        throw std::invalid_argument("gram: coordinate dimension mismatch (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.cols()) + ")");
    const Matrix<Scalar> A = a;
    const Matrix<Scalar> B = b.template cast<Scalar>();
    const Scalar ell = static_cast<Scalar>(cfg.length_scale);
    Matrix<Scalar> K(A.rows(), B.rows());
    const Index block = 64;
    const Index nblocks = (B.rows() + block - 1) / block;
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t blk) {
        const Index j0 = static_cast<Index>(blk) * block;
        const Index j1 = std::min<Index>(B.rows(), j0 + block);
        for (Index j = j0; j < j1; ++j)
            for (Index i = 0; i < A.rows(); ++i)
                K(i, j) = detail::matern_unchecked<Scalar>((A.row(i) - B.row(j)).norm(), cfg.nu, ell);
    });
    return K;
}

template <typename Scalar>
IndexSet select_inducing(const SpatialDomain<Scalar>& domain, Index L, InducingStrategy strategy,
                         std::uint64_t seed) {
    const Index V = domain.size();
    if (L < 1 || L > V)
        throw std::invalid_argument("select_inducing: need 1 <= L <= V (L=" + std::to_string(L) +
                                    ", V=" + std::to_string(V) + ")");
    IndexSet chosen;
    chosen.reserve(static_cast<std::size_t>(L));
    if (strategy == InducingStrategy::UniformRandom) {
        IndexSet all(static_cast<std::size_t>(V));
        std::iota(all.begin(), all.end(), Index(0));
        Rng rng(seed);
        for (Index k = 0; k < L; ++k) {
            std::uniform_int_distribution<Index> pick(k, V - 1);
            std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
            chosen.push_back(all[static_cast<std::size_t>(k)]);
        }
        return chosen;
    }

    const auto& C = domain.coords();
    const RowVector<Scalar> centroid = C.colwise().mean();
    Index start = 0;
    (C.rowwise() - centroid).rowwise().squaredNorm().minCoeff(&start);
    if (L == 1) return {start};

    // The centroid voxel only seeds the search; picks start from the voxel farthest from it.
    Vector<Scalar> mind = (C.rowwise() - C.row(start)).rowwise().squaredNorm();
    std::vector<char> taken(static_cast<std::size_t>(V), 0);
    while (static_cast<Index>(chosen.size()) < L) {
        Index best = -1;
        Scalar bestd = Scalar(-1);
        for (Index v = 0; v < V; ++v) {
            if (!taken[static_cast<std::size_t>(v)] && mind(v) > bestd) {
                bestd = mind(v);
                best = v;
            }
        }
        chosen.push_back(best);
        taken[static_cast<std::size_t>(best)] = 1;
        if (chosen.size() == 1) mind.setConstant(std::numeric_limits<Scalar>::infinity());
        for (Index v = 0; v < V; ++v)
            mind(v) = std::min(mind(v), (C.row(v) - C.row(best)).squaredNorm());
    }
    return chosen;
}

template <typename Scalar = double>
struct NystromFactors {
    Matrix<Scalar> psi;
    Vector<Scalar> lambda;
    IndexSet inducing;
    double jitter = 0;
    Index dropped = 0;
};

template <typename Scalar>
Matrix<Scalar> gather_rows(const Matrix<Scalar>& m, const IndexSet& rows) {
    Matrix<Scalar> out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
    return out;
}

template <typename Scalar>
NystromFactors<Scalar> nystrom_decompose(const SpatialDomain<Scalar>& domain, const IndexSet& inducing,
                                         const KernelConfig& cfg) {
    cfg.validate();
    const Index L = static_cast<Index>(inducing.size());
    if (L < 1 || L > domain.size()) throw std::invalid_argument("nystrom_decompose: bad inducing set size");
    const Matrix<Scalar> CL = gather_rows(domain.coords(), inducing);
    const Matrix<Scalar> KL = gram(CL, CL, cfg);

    NystromFactors<Scalar> out;
    Eigen::LLT<Matrix<Scalar>> llt;
    const double ceiling = std::max(1e-4, cfg.nugget);
    double jitter = cfg.nugget;
    for (;;) {
        Matrix<Scalar> A = KL;
        A.diagonal().array() += static_cast<Scalar>(jitter);
        llt.compute(A);
        if (llt.info() == Eigen::Success) break;
        if (jitter >= ceiling) {
            std::ostringstream msg;
            msg << "nystrom_decompose: Cholesky of the inducing Gram matrix failed at jitter " << jitter
                << " for inducing set of size " << L << " {";
            for (Index k = 0; k < std::min<Index>(L, 8); ++k) msg << (k ? "," : "") << inducing[std::size_t(k)];
            msg << (L > 8 ? ",...}" : "}");
            throw NumericalError(msg.str());
        }
        jitter = jitter <= 0 ? 1e-6 : std::min(jitter * 10, ceiling);
    }
    out.jitter = jitter;

    // K~ = K_{V,L} R^{-T}, computed as (R^{-1} K_{L,V})^T with R the lower Cholesky factor.
    const Matrix<Scalar> KVL = gram(domain.coords(), CL, cfg);
    const Matrix<Scalar> Kt = llt.matrixL().solve(KVL.transpose()).transpose();
    Eigen::BDCSVD<Matrix<Scalar>> svd(Kt, Eigen::ComputeThinU);
    const Vector<Scalar> d = svd.singularValues();
    const Vector<Scalar> lam = d.array().square();
    const Scalar floor = static_cast<Scalar>(1e-12) * lam(0);
    Index keep = 0;
    while (keep < lam.size() && lam(keep) > floor && lam(keep) > Scalar(0)) ++keep;
    if (keep == 0) throw NumericalError("nystrom_decompose: kernel approximation has zero rank");
    out.psi = svd.matrixU().leftCols(keep);
    out.lambda = lam.head(keep);
    out.dropped = L - keep;
    out.inducing = inducing;
    return out;
}

inline Index default_L_eta(Index L) { return std::max<Index>(1, L / 10); }

template <typename Scalar = double>
struct BasisSystem {
    Matrix<Scalar> psi;          // V x L
    Vector<Scalar> lambda;       // L
    Matrix<Scalar> psi_eta;      // V x L_eta
    Vector<Scalar> lambda_eta;   // L_eta
    Matrix<Scalar> phi;          // Psi Lambda^{-1/2}
    Matrix<Scalar> phi_eta;      // L_eta x L
    RowVector<Scalar> ones_phi;  // 1^T Phi
    Vector<Scalar> psi_t_ones;   // Psi^T 1
    IndexSet inducing;
    IndexSet inducing_eta;
    Index dropped = 0;
    Index dropped_eta = 0;
    double jitter = 0;
    double jitter_eta = 0;
    KernelConfig kernel;
    std::uint64_t seed = 0;

    Index num_voxels() const { return psi.rows(); }
    Index rank() const { return psi.cols(); }
    Index rank_eta() const { return psi_eta.cols(); }
    Vector<Scalar> sqrt_lambda() const { return lambda.array().sqrt(); }

    // Psi Lambda^{1/2}, the coefficient-to-voxel map.
    Matrix<Scalar> loading() const { return psi * lambda.array().sqrt().matrix().asDiagonal(); }
    Matrix<Scalar> loading_eta() const { return psi_eta * lambda_eta.array().sqrt().matrix().asDiagonal(); }
};

template <typename Scalar>
void assemble_projections(BasisSystem<Scalar>& b) {
    const Vector<Scalar> inv_sqrt = b.lambda.array().rsqrt();
    b.phi = b.psi * inv_sqrt.asDiagonal();
    b.phi_eta = b.lambda_eta.array().sqrt().matrix().asDiagonal() * (b.psi_eta.transpose() * b.psi) *
                inv_sqrt.asDiagonal();
    b.psi_t_ones = b.psi.colwise().sum().transpose();
    b.ones_phi = (b.psi_t_ones.array() * inv_sqrt.array()).matrix().transpose();
}

template <typename Scalar>
BasisSystem<Scalar> build_basis_system(const SpatialDomain<Scalar>& domain, const KernelConfig& cfg, Index L,
                                       Index L_eta, std::uint64_t seed,
                                       InducingStrategy strategy = InducingStrategy::FarthestPoint) {
    cfg.validate();
    if (L_eta <= 0) L_eta = default_L_eta(L);
    if (!(1 <= L_eta && L_eta <= L && L <= domain.size()))
        throw ConfigError("basis sizes must satisfy 1 <= L_eta <= L <= V (L=" + std::to_string(L) +
                          ", L_eta=" + std::to_string(L_eta) + ", V=" + std::to_string(domain.size()) + ")");
    BasisSystem<Scalar> b;
    b.kernel = cfg;
    b.seed = seed;
    auto main = nystrom_decompose(domain, select_inducing(domain, L, strategy, derive_seed(seed, 0)), cfg);
    auto eta = nystrom_decompose(domain, select_inducing(domain, L_eta, strategy, derive_seed(seed, 1)), cfg);
    b.psi = std::move(main.psi);
    b.lambda = std::move(main.lambda);
    b.inducing = std::move(main.inducing);
    b.dropped = main.dropped;
    b.jitter = main.jitter;
    b.psi_eta = std::move(eta.psi);
    b.lambda_eta = std::move(eta.lambda);
    b.inducing_eta = std::move(eta.inducing);
    b.dropped_eta = eta.dropped;
    b.jitter_eta = eta.jitter;
    if (b.rank_eta() > b.rank()) {
        b.psi_eta.conservativeResize(Eigen::NoChange, b.rank());
        b.lambda_eta.conservativeResize(b.rank());
    }
    assemble_projections(b);
    return b;
}

// Basis assembled from caller-supplied spectral factors (used for hand-written instances).
template <typename Scalar>
BasisSystem<Scalar> basis_from_factors(Matrix<Scalar> psi, Vector<Scalar> lambda, Matrix<Scalar> psi_eta,
                                       Vector<Scalar> lambda_eta) {
    if (psi.cols() != lambda.size() || psi_eta.cols() != lambda_eta.size() || psi.rows() != psi_eta.rows())
        throw std::invalid_argument("basis_from_factors: inconsistent factor shapes");
    if ((lambda.array() <= 0).any() || (lambda_eta.array() <= 0).any())
        throw std::invalid_argument("basis_from_factors: eigenvalues must be positive");
    BasisSystem<Scalar> b;
    b.psi = std::move(psi);
    b.lambda = std::move(lambda);
    b.psi_eta = std::move(psi_eta);
    b.lambda_eta = std::move(lambda_eta);
    assemble_projections(b);
    return b;
}

} // namespace simba
