#pragma once

#include "simba/model.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <numbers>

namespace simba {

// Inverse-gamma factor q = IG(shape, rate).
struct IGFactor {
    double shape = 1;
    double rate = 1;

    double mean_inv() const { return shape / rate; }
    double mean() const { return shape > 1 ? rate / (shape - 1) : std::numeric_limits<double>::infinity(); }
    double mean_log() const { return std::log(rate) - boost::math::digamma(shape); }
    bool valid() const { return shape > 0 && rate > 0 && std::isfinite(shape) && std::isfinite(rate); }
};

struct VIConfig {
    Index max_iter = 500;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool update_variances = true;
    bool track_elbo = false;

    void validate() const {
        if (max_iter < 1) throw ConfigError("inference.max_iter must be positive");
        if (!(tol > 0)) throw ConfigError("inference.tol must be positive");
    }
};

template <typename Scalar = double>
struct VariationalState {
    Vector<Scalar> alpha_mean, alpha_var;  // q(alpha_j) = N(mean_j, var_j)
    Matrix<Scalar> beta_mean;              // q(theta_beta_j) = N(row j, beta_var_j I)
    Vector<Scalar> beta_var;
    Matrix<Scalar> eta_mean;               // q(theta_eta_i) = N(row i, eta_cov)
    Matrix<Scalar> eta_cov;
    IGFactor sigma2_alpha, sigma2_beta, sigma2_eta, sigma2_eps;
    IGFactor a_alpha, a_beta, a_eta, a_eps;

    bool valid() const {
        for (const IGFactor* f : {&sigma2_alpha, &sigma2_beta, &sigma2_eta, &sigma2_eps, &a_alpha, &a_beta,
                                  &a_eta, &a_eps})
            if (!f->valid()) return false;
        return (alpha_var.array() > 0).all() && (beta_var.array() > 0).all() &&
               (eta_cov.diagonal().array() > 0).all();
    }

    Scalar e_alpha_sq(Index j) const { return alpha_mean(j) * alpha_mean(j) + alpha_var(j); }
    Scalar e_beta_sqnorm(Index j) const {
        return beta_mean.row(j).squaredNorm() + Scalar(beta_mean.cols()) * beta_var(j);
    }
    Scalar e_eta_sqnorm() const {
        return eta_mean.squaredNorm() + Scalar(eta_mean.rows()) * eta_cov.trace();
    }

    // Point-mass view of the means, for prediction.
    ParameterState<Scalar> mean_state() const {
        ParameterState<Scalar> s;
        s.alpha = alpha_mean;
        s.theta_beta = beta_mean;
        s.theta_eta = eta_mean;
        s.sigma2_alpha = Scalar(1 / sigma2_alpha.mean_inv());
        s.sigma2_beta = Scalar(1 / sigma2_beta.mean_inv());
        s.sigma2_eta = Scalar(1 / sigma2_eta.mean_inv());
        s.sigma2_eps = Scalar(1 / sigma2_eps.mean_inv());
        s.a_alpha = Scalar(1 / a_alpha.mean_inv());
        s.a_beta = Scalar(1 / a_beta.mean_inv());
        s.a_eta = Scalar(1 / a_eta.mean_inv());
        s.a_eps = Scalar(1 / a_eps.mean_inv());
        return s;
    }
};

namespace detail {

inline IGFactor pinned(double shape, double value) { return {shape, shape * value}; }

} // namespace detail

// Gaussian means from a point state, every IG factor placed so that E_q[1/x] = 1/x.
template <typename Scalar>
VariationalState<Scalar> variational_from_state(const ParameterState<Scalar>& s, Index N) {
    const Index P = s.theta_beta.rows(), L = s.theta_beta.cols(), Le = s.theta_eta.cols();
    VariationalState<Scalar> q;
    q.alpha_mean = s.alpha;
    q.alpha_var = Vector<Scalar>::Constant(P, Scalar(0.01));
    q.beta_mean = s.theta_beta;
    q.beta_var = Vector<Scalar>::Constant(P, Scalar(0.01));
    q.eta_mean = s.theta_eta;
    q.eta_cov = Scalar(0.01) * Matrix<Scalar>::Identity(Le, Le);
    q.sigma2_alpha = detail::pinned(0.5 * (1.0 + double(P)), double(s.sigma2_alpha));
    q.sigma2_beta = detail::pinned(0.5 * (1.0 + double(P * L)), double(s.sigma2_beta));
    q.sigma2_eta = detail::pinned(0.5 * (1.0 + double(N * Le)), double(s.sigma2_eta));
    q.sigma2_eps = detail::pinned(0.5 * (1.0 + double(N * L)), double(s.sigma2_eps));
    q.a_alpha = detail::pinned(1.0, double(s.a_alpha));
    q.a_beta = detail::pinned(1.0, double(s.a_beta));
    q.a_eta = detail::pinned(1.0, double(s.a_eta));
    q.a_eps = detail::pinned(1.0, double(s.a_eps));
    return q;
}

template <typename Scalar>
VariationalState<Scalar> init_variational(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior,
                                          std::uint64_t seed) {
    return variational_from_state(init_state(tdata, prior, seed), tdata.n());
}

template <typename Scalar = double>
struct VIResult {
    VariationalState<Scalar> state;
    std::vector<double> trace;         // max |change| of Gaussian means per sweep
    std::vector<double> partial_elbo;  // expected log-likelihood + Gaussian entropies (not the full ELBO)
    Index iterations = 0;
    bool converged = false;
};

template <typename Scalar = double>
class CaviUpdater {
public:
    using State = VariationalState<Scalar>;

    CaviUpdater(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior) : data_(tdata) {
        prior.validate();
        const auto& b = *tdata.basis;
        N_ = tdata.n();
        P_ = tdata.p();
        L_ = tdata.rank();
        Le_ = b.rank_eta();
        z_ = b.ones_phi;
        zz_ = z_.squaredNorm();
        phi_eta_ = b.phi_eta;
        phi_eta_t_ = phi_eta_.transpose();
        G_.noalias() = phi_eta_ * phi_eta_.transpose();
        XtX_.noalias() = tdata.X.transpose() * tdata.X;
        XtY_.noalias() = tdata.X.transpose() * tdata.y_tilde;
        x2_ = XtX_.diagonal();
        inv_A2_ = 1.0 / (prior.A * prior.A);
        R_.resize(N_, L_);
        B_.resize(N_, Le_);
        row_.resize(L_);
    }

    void update(State& q, bool update_variances = true) {
        const Scalar tau = Scalar(q.sigma2_eps.mean_inv());
        XtE_.noalias() = (data_.X.transpose() * q.eta_mean) * phi_eta_;

        // q(alpha_j)
        XtXb_.noalias() = XtX_ * q.beta_mean;
        for (Index j = 0; j < P_; ++j) {
            const Scalar var = Scalar(1) / (x2_(j) * zz_ * tau + Scalar(q.sigma2_alpha.mean_inv()));
            Scalar c = (XtY_.row(j) - XtXb_.row(j) - XtE_.row(j)).dot(z_);
            for (Index k = 0; k < P_; ++k)
                if (k != j) c -= XtX_(j, k) * q.alpha_mean(k) * zz_;
            q.alpha_mean(j) = var * tau * c;
            q.alpha_var(j) = var;
        }
        check(q.alpha_mean.allFinite(), "q(alpha)");

        // q(theta_beta_j)
        for (Index j = 0; j < P_; ++j) {
            const Scalar var = Scalar(1) / (x2_(j) * tau + Scalar(q.sigma2_beta.mean_inv()));
            row_ = XtY_.row(j) - XtE_.row(j);
            row_ -= XtX_.row(j).dot(q.alpha_mean) * z_;
            for (Index k = 0; k < P_; ++k)
                if (k != j) row_ -= XtX_(j, k) * q.beta_mean.row(k);
            q.beta_mean.row(j) = (var * tau) * row_;
            q.beta_var(j) = var;
        }
        check(q.beta_mean.allFinite(), "q(theta_beta)");

        // q(theta_eta_i), shared covariance
        residual_terms(q);
        Matrix<Scalar> prec = tau * G_;
        prec.diagonal().array() += Scalar(q.sigma2_eta.mean_inv());
        Eigen::LLT<Matrix<Scalar>> llt(prec);
        if (llt.info() != Eigen::Success) throw NumericalError("vi: q(theta_eta) precision is not positive definite");
        q.eta_cov = llt.solve(Matrix<Scalar>::Identity(Le_, Le_));
        q.eta_mean = (tau * B_) * q.eta_cov;
        check(q.eta_mean.allFinite(), "q(theta_eta)");

        if (!update_variances) return;
        const double half = 0.5;
        q.sigma2_eps.shape = half * (1.0 + double(N_ * L_));
        q.sigma2_eps.rate = half * double(expected_sse(q)) + q.a_eps.mean_inv();
        q.sigma2_eta.shape = half * (1.0 + double(N_ * Le_));
        q.sigma2_eta.rate = half * double(q.e_eta_sqnorm()) + q.a_eta.mean_inv();
        q.sigma2_beta.shape = half * (1.0 + double(P_ * L_));
        double eb = 0;
        for (Index j = 0; j < P_; ++j) eb += double(q.e_beta_sqnorm(j));
        q.sigma2_beta.rate = half * eb + q.a_beta.mean_inv();
        q.sigma2_alpha.shape = half * (1.0 + double(P_));
        double ea = 0;
        for (Index j = 0; j < P_; ++j) ea += double(q.e_alpha_sq(j));
        q.sigma2_alpha.rate = half * ea + q.a_alpha.mean_inv();

        q.a_eps = {1.0, inv_A2_ + q.sigma2_eps.mean_inv()};
        q.a_eta = {1.0, inv_A2_ + q.sigma2_eta.mean_inv()};
        q.a_beta = {1.0, inv_A2_ + q.sigma2_beta.mean_inv()};
        q.a_alpha = {1.0, inv_A2_ + q.sigma2_alpha.mean_inv()};
        for (const auto& [f, name] : {std::pair{&q.sigma2_eps, "q(sigma2_eps)"}, {&q.sigma2_eta, "q(sigma2_eta)"},
                                      {&q.sigma2_beta, "q(sigma2_beta)"}, {&q.sigma2_alpha, "q(sigma2_alpha)"}})
            check(f->valid(), name);
    }

    // E_q ||Y~ - X alpha z - X Theta_beta - Theta_eta Phi_eta||_F^2.
    Scalar expected_sse(const State& q) {
        residual_terms(q);
        const Scalar cross = (q.eta_mean.array() * B_.array()).sum();
        const Scalar quad = ((q.eta_mean * G_).array() * q.eta_mean.array()).sum();
        Scalar e = std::max(Scalar(0), r2_ - Scalar(2) * cross + quad);
        for (Index j = 0; j < P_; ++j) e += x2_(j) * (zz_ * q.alpha_var(j) + Scalar(L_) * q.beta_var(j));
        e += Scalar(N_) * (q.eta_cov.cwiseProduct(G_)).sum();
        return e;
    }

    // Expected log-likelihood plus Gaussian-factor entropies.
    double partial_elbo(const State& q) {
        const double nl = double(N_) * double(L_);
        const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
        double ell = -0.5 * nl * (std::log(2.0 * std::numbers::pi) + q.sigma2_eps.mean_log()) -
                     0.5 * q.sigma2_eps.mean_inv() * double(expected_sse(q));
        double ent = 0;
        for (Index j = 0; j < P_; ++j) {
            ent += 0.5 * std::log(two_pi_e * double(q.alpha_var(j)));
            ent += 0.5 * double(L_) * std::log(two_pi_e * double(q.beta_var(j)));
        }
        Eigen::LLT<Matrix<Scalar>> llt(q.eta_cov);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        ent += double(N_) * 0.5 * (double(Le_) * std::log(two_pi_e) + logdet);
        return ell + ent;
    }

private:
    static void check(bool ok, const char* factor) {
        if (!ok) throw NumericalError(std::string("vi: non-finite expectation in ") + factor);
    }

    void residual_terms(const State& q) {
        R_ = data_.y_tilde;
        R_.noalias() -= data_.X * q.beta_mean;
        for (Index i = 0; i < N_; ++i) R_.row(i) -= data_.X.row(i).dot(q.alpha_mean) * z_;
        for (Index k = 0; k < phi_eta_t_.cols(); ++k) B_.col(k).noalias() = R_ * phi_eta_t_.col(k);
        r2_ = R_.squaredNorm();
    }

    const TransformedDataset<Scalar>& data_;
    Index N_ = 0, P_ = 0, L_ = 0, Le_ = 0;
    RowVector<Scalar> z_;
    Scalar zz_ = 0;
    double inv_A2_ = 0;
    Matrix<Scalar> phi_eta_, phi_eta_t_, G_, XtX_, XtY_, XtE_, XtXb_, R_, B_;
    Vector<Scalar> x2_;
    RowVector<Scalar> row_;
    Scalar r2_ = 0;
};

template <typename Scalar>
VariationalState<Scalar> cavi_update(VariationalState<Scalar> q, const TransformedDataset<Scalar>& tdata,
                                     const PriorConfig& prior, bool update_variances = true) {
    CaviUpdater<Scalar>(tdata, prior).update(q, update_variances);
    return q;
}

template <typename Scalar>
void center_variational(VariationalState<Scalar>& q, const BasisSystem<Scalar>& basis) {
    ParameterState<Scalar> s;
    s.alpha = q.alpha_mean;
    s.theta_beta = q.beta_mean;
    s.theta_eta = q.eta_mean;
    apply_identifiability_inplace(s, basis);
    q.alpha_mean = s.alpha;
    q.beta_mean = s.theta_beta;
    q.eta_mean = s.theta_eta;
}

template <typename Scalar>
Scalar max_abs_change(const VariationalState<Scalar>& a, const VariationalState<Scalar>& b) {
    Scalar m = (a.alpha_mean - b.alpha_mean).cwiseAbs().maxCoeff();
    m = std::max(m, (a.beta_mean - b.beta_mean).cwiseAbs().maxCoeff());
    if (a.eta_mean.size() > 0) m = std::max(m, (a.eta_mean - b.eta_mean).cwiseAbs().maxCoeff());
    return m;
}

// Iterates CAVI sweeps from `init` (or the seeded default) until the max mean change drops below tol.
template <typename Scalar>
VIResult<Scalar> run_vi(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior, const VIConfig& cfg,
                        const VariationalState<Scalar>* init = nullptr) {
    cfg.validate();
    VIResult<Scalar> out;
    out.state = init ? *init : init_variational(tdata, prior, cfg.seed);
    CaviUpdater<Scalar> updater(tdata, prior);
    VariationalState<Scalar> prev;
    for (Index it = 0; it < cfg.max_iter; ++it) {
        prev = out.state;
        updater.update(out.state, cfg.update_variances);
        const double change = double(max_abs_change(out.state, prev));
        out.trace.push_back(change);
        if (cfg.track_elbo) out.partial_elbo.push_back(updater.partial_elbo(out.state));
        out.iterations = it + 1;
        if (change < cfg.tol) {
            out.converged = true;
            break;
        }
    }
    center_variational(out.state, *tdata.basis);
    return out;
}

} // namespace simba
