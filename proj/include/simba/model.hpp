#pragma once

#include "simba/kernel.hpp"

#include <memory>
#include <optional>

namespace simba {

template <typename Scalar = double>
struct Dataset {
    Matrix<Scalar> Y;  // N x V
    Matrix<Scalar> X;  // N x (J+1), X.col(0) == 1
    SpatialDomain<Scalar> domain;
    std::vector<std::string> covariate_names;

    Index n() const { return Y.rows(); }
    Index v() const { return Y.cols(); }
    Index p() const { return X.cols(); }

    void validate() const {
        if (Y.rows() < 2) throw DataError("dataset: need at least 2 participants");
        if (X.rows() != Y.rows())
            throw DataError("dataset: covariate rows (" + std::to_string(X.rows()) + ") != response rows (" +
                            std::to_string(Y.rows()) + ")");
        if (Y.cols() != domain.size())
            throw DataError("dataset: response columns (" + std::to_string(Y.cols()) + ") != domain size (" +
                            std::to_string(domain.size()) + ")");
        if (X.cols() < 1) throw DataError("dataset: empty covariate matrix");
        if (!Y.allFinite()) throw DataError("dataset: non-finite response value");
        if (!X.allFinite()) throw DataError("dataset: non-finite covariate value");
        if ((X.col(0).array() != Scalar(1)).any()) throw DataError("dataset: first covariate column must be 1");
        if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != X.cols())
            throw DataError("dataset: covariate name count does not match X");
    }

    std::string covariate_name(Index j) const {
        if (j < static_cast<Index>(covariate_names.size())) return covariate_names[std::size_t(j)];
        return j == 0 ? "intercept" : "x" + std::to_string(j);
    }
};

enum class MemoryMode { Compact, RetainResponses };

template <typename Scalar = double>
struct TransformedDataset {
    Matrix<Scalar> y_tilde;  // N x L
    Matrix<Scalar> X;
    std::shared_ptr<const BasisSystem<Scalar>> basis;
    std::optional<Matrix<Scalar>> Y;  // voxel-space responses, RetainResponses only

    Index n() const { return y_tilde.rows(); }
    Index p() const { return X.cols(); }
    Index rank() const { return y_tilde.cols(); }
    Index rank_eta() const { return basis->rank_eta(); }
};

template <typename Scalar>
TransformedDataset<Scalar> transform_responses(const Matrix<Scalar>& Y, const Matrix<Scalar>& X,
                                               std::shared_ptr<const BasisSystem<Scalar>> basis,
                                               MemoryMode mode = MemoryMode::Compact) {
    if (!basis) throw std::invalid_argument("transform: null basis");
    if (Y.cols() != basis->num_voxels())
        throw DataError("transform: responses have " + std::to_string(Y.cols()) + " voxels, basis has " +
                        std::to_string(basis->num_voxels()));
    if (X.rows() != Y.rows()) throw DataError("transform: covariate/response row mismatch");
    TransformedDataset<Scalar> t;
    t.y_tilde.noalias() = Y * basis->phi;
    t.X = X;
    t.basis = std::move(basis);
    if (mode == MemoryMode::RetainResponses) t.Y = Y;
    return t;
}

template <typename Scalar>
TransformedDataset<Scalar> transform_dataset(const Dataset<Scalar>& data,
                                             std::shared_ptr<const BasisSystem<Scalar>> basis,
                                             MemoryMode mode = MemoryMode::Compact) {
    data.validate();
    return transform_responses(data.Y, data.X, std::move(basis), mode);
}

template <typename Scalar = double>
struct ParameterState {
    Vector<Scalar> alpha;       // J+1
    Matrix<Scalar> theta_beta;  // (J+1) x L
    Matrix<Scalar> theta_eta;   // N x L_eta (may be empty in stored draws)
    Scalar sigma2_alpha = 1, sigma2_beta = 1, sigma2_eta = 1, sigma2_eps = 1;
    Scalar a_alpha = 1, a_beta = 1, a_eta = 1, a_eps = 1;

    bool valid() const {
        for (Scalar s : {sigma2_alpha, sigma2_beta, sigma2_eta, sigma2_eps, a_alpha, a_beta, a_eta, a_eps})
            if (!(s > Scalar(0)) || !std::isfinite(static_cast<double>(s))) return false;
        return true;
    }
};

struct PriorConfig {
    double A = 100.0;

    void validate() const {
        if (!(A > 0) || !std::isfinite(A)) throw ConfigError("prior.A must be positive");
    }
};

template <typename Scalar>
ParameterState<Scalar> init_state(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior,
                                  std::uint64_t seed) {
    prior.validate();
    Rng rng(seed);
    auto draw = [&](Index r, Index c) {
        Matrix<Scalar> m(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) m(i, j) = Scalar(0.1) * std_normal<Scalar>(rng);
        return m;
    };
    ParameterState<Scalar> s;
    s.alpha = draw(tdata.p(), 1).col(0);
    s.theta_beta = draw(tdata.p(), tdata.rank());
    s.theta_eta = draw(tdata.n(), tdata.rank_eta());
    return s;
}

// Moves each beta_j voxel mean into alpha_j and centers theta_eta across participants.
template <typename Scalar>
void apply_identifiability_inplace(ParameterState<Scalar>& s, const BasisSystem<Scalar>& basis) {
    const Index V = basis.num_voxels();
    const Vector<Scalar> w = basis.psi_t_ones.cwiseProduct(basis.sqrt_lambda());  // 1^T Psi Lambda^{1/2}
    const Scalar denom = basis.psi_t_ones.squaredNorm();
    const RowVector<Scalar> z = basis.ones_phi;
    for (Index j = 0; j < s.theta_beta.rows(); ++j) {
        const Scalar m = s.theta_beta.row(j).dot(w.transpose()) / Scalar(V);
        if (denom > Scalar(0)) s.theta_beta.row(j) -= (m * Scalar(V) / denom) * z;
        s.alpha(j) += m;
    }
    if (s.theta_eta.rows() > 0) s.theta_eta.rowwise() -= s.theta_eta.colwise().mean();
}

template <typename Scalar>
ParameterState<Scalar> apply_identifiability(ParameterState<Scalar> s, const BasisSystem<Scalar>& basis) {
    apply_identifiability_inplace(s, basis);
    return s;
}

} // namespace simba
