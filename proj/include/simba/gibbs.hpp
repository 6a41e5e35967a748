#pragma once

#include "simba/model.hpp"
#include "simba/parallel.hpp"
#include "simba/random.hpp"

#include <chrono>
#include <cstdio>
#include <numbers>

namespace simba {

struct GibbsConfig {
    Index n_iter = 5000;
    Index n_burnin = 4000;
    Index thin = 1;
    Index n_chains = 3;
    std::uint64_t seed = 0;
    bool store_eta = false;
    bool update_variances = true;
    bool parallel_chains = true;
    bool verbose = false;

    void validate() const {
        if (n_iter < 1) throw ConfigError("inference.iterations must be positive");
        if (n_burnin < 0 || n_burnin >= n_iter) throw ConfigError("inference.burnin must be in [0, iterations)");
        if (thin < 1) throw ConfigError("inference.thin must be >= 1");
        if (n_chains < 1) throw ConfigError("inference.chains must be >= 1");
    }
    Index num_draws() const { return (n_iter - n_burnin) / thin; }
};

template <typename Scalar = double>
struct ChainOutput {
    Index chain_id = 0;
    std::uint64_t seed = 0;
    ParameterState<Scalar> initial;
    std::vector<ParameterState<Scalar>> draws;
    std::vector<double> cond_loglik;
    Matrix<Scalar> theta_eta_mean;  // running mean of centered theta_eta over stored iterations
    double seconds = 0;
    double seconds_per_1000 = 0;
};

// Full-conditional updates for the projected model. Holds precomputed cross products
// and a fixed workspace so that a sweep performs no allocations that scale with V.
template <typename Scalar = double>
class GibbsSampler {
public:
    using State = ParameterState<Scalar>;

    GibbsSampler(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior)
        : data_(tdata), prior_(prior) {
        prior.validate();
        const auto& b = *tdata.basis;
        N_ = tdata.n();
        P_ = tdata.p();
        L_ = tdata.rank();
        Le_ = b.rank_eta();
        if (b.rank() != L_) throw std::invalid_argument("GibbsSampler: basis rank does not match data");
        z_ = b.ones_phi;
        zz_ = z_.squaredNorm();
        phi_eta_ = b.phi_eta;
        phi_eta_t_ = phi_eta_.transpose();
        G_.noalias() = phi_eta_ * phi_eta_.transpose();
        XtX_.noalias() = tdata.X.transpose() * tdata.X;
        XtY_.noalias() = tdata.X.transpose() * tdata.y_tilde;
        x2_ = XtX_.diagonal();
        inv_A2_ = Scalar(1) / static_cast<Scalar>(prior.A * prior.A);

        XtTheta_.resize(P_, Le_);
        XtE_.resize(P_, L_);
        XtXb_.resize(P_, L_);
        R_.resize(N_, L_);
        B_.resize(N_, Le_);
        T_.resize(N_, Le_);
        Prec_.resize(Le_, Le_);
        W_.resize(Le_, N_);
        row_.resize(L_);
        llt_ = Eigen::LLT<Matrix<Scalar>>(Le_);
    }

    Index n() const { return N_; }
    Index p() const { return P_; }
    Index rank() const { return L_; }
    Index rank_eta() const { return Le_; }

    // (mean, variance) of alpha_j given everything else.
    std::pair<Scalar, Scalar> alpha_conditional(const State& s, Index j) {
        update_eta_cross(s);
        XtXb_.noalias() = XtX_ * s.theta_beta;
        return alpha_conditional_cached(s, j);
    }

    // (mean row, scalar variance) of theta_beta_j given everything else.
    std::pair<RowVector<Scalar>, Scalar> theta_beta_conditional(const State& s, Index j) {
        update_eta_cross(s);
        RowVector<Scalar> mean(L_);
        const Scalar var = theta_beta_mean_into(s, j, mean);
        return {mean, var};
    }

    // Row i of `mean` is the conditional mean of theta_eta_i; `cov` is the shared covariance.
    void theta_eta_conditional(const State& s, Matrix<Scalar>& mean, Matrix<Scalar>& cov) {
        residual_terms(s);
        factor_eta_precision(s);
        W_.noalias() = B_.transpose() / s.sigma2_eps;
        llt_.solveInPlace(W_);
        mean = W_.transpose();
        cov = llt_.solve(Matrix<Scalar>::Identity(Le_, Le_));
    }

    void sample_theta_beta(State& s, Rng& rng) {
        check(s);
        update_eta_cross(s);
        for (Index j = 0; j < P_; ++j) {
            const Scalar var = theta_beta_mean_into(s, j, row_);
            const Scalar sd = std::sqrt(var);
            for (Index l = 0; l < L_; ++l) s.theta_beta(j, l) = row_(l) + sd * std_normal<Scalar>(rng);
        }
    }

    void sample_alpha(State& s, Rng& rng) {
        check(s);
        update_eta_cross(s);
        XtXb_.noalias() = XtX_ * s.theta_beta;
        for (Index j = 0; j < P_; ++j) {
            const auto [mu, var] = alpha_conditional_cached(s, j);
            s.alpha(j) = mu + std::sqrt(var) * std_normal<Scalar>(rng);
        }
    }

    // Draws for participant i use normals z_{i,0..L_eta-1}, participants in order.
    void sample_theta_eta(State& s, Rng& rng) {
        check(s);
        residual_terms(s);
        factor_eta_precision(s);
        // theta^T = Lc^{-T} (Lc^{-1} B^T / sigma2 + Z^T), with Prec = Lc Lc^T.
        W_.noalias() = B_.transpose() / s.sigma2_eps;
        llt_.matrixL().solveInPlace(W_);
        for (Index i = 0; i < N_; ++i)
            for (Index k = 0; k < Le_; ++k) W_(k, i) += std_normal<Scalar>(rng);
        llt_.matrixU().solveInPlace(W_);
        s.theta_eta = W_.transpose();
    }

    void sample_variances(State& s, Rng& rng) {
        check(s);
        residual_terms(s);
        sample_sigmas(s, rng);
        sample_auxiliaries(s, rng);
    }

    double log_likelihood(const State& s) {
        check(s);
        residual_terms(s);
        return loglik_from_sse(s, sse(s));
    }

    // One sweep: theta_beta, alpha, theta_eta, variances, auxiliaries. Returns log p(y~ | state).
    double sweep(State& s, Rng& rng, bool update_variances = true) {
        sample_theta_beta(s, rng);
        sample_alpha(s, rng);
        sample_theta_eta(s, rng);
        if (update_variances) {
            sample_sigmas(s, rng);
            sample_auxiliaries(s, rng);
        }
        const double ll = loglik_from_sse(s, sse(s));
        return ll;
    }

private:
    void check(const State& s) const {
        if (!s.valid()) throw NumericalError("gibbs: non-positive or non-finite variance parameter in state");
        if (s.alpha.size() != P_ || s.theta_beta.rows() != P_ || s.theta_beta.cols() != L_ ||
            s.theta_eta.rows() != N_ || s.theta_eta.cols() != Le_)
            throw std::invalid_argument("gibbs: state shape does not match data");
    }

    void update_eta_cross(const State& s) {
        XtTheta_.noalias() = data_.X.transpose() * s.theta_eta;
        XtE_.noalias() = XtTheta_ * phi_eta_;
    }

    std::pair<Scalar, Scalar> alpha_conditional_cached(const State& s, Index j) const {
        const Scalar prec = x2_(j) * zz_ / s.sigma2_eps + Scalar(1) / s.sigma2_alpha;
        const Scalar var = Scalar(1) / prec;
        Scalar c = (XtY_.row(j) - XtXb_.row(j) - XtE_.row(j)).dot(z_);
        for (Index k = 0; k < P_; ++k)
            if (k != j) c -= XtX_(j, k) * s.alpha(k) * zz_;
        return {var * c / s.sigma2_eps, var};
    }

    Scalar theta_beta_mean_into(const State& s, Index j, RowVector<Scalar>& mean) const {
        const Scalar var = Scalar(1) / (x2_(j) / s.sigma2_eps + Scalar(1) / s.sigma2_beta);
        mean = XtY_.row(j) - XtE_.row(j);
        mean -= XtX_.row(j).dot(s.alpha) * z_;
        for (Index k = 0; k < P_; ++k)
            if (k != j) mean -= XtX_(j, k) * s.theta_beta.row(k);
        mean *= var / s.sigma2_eps;
        return var;
    }

    // R = Y~ - X alpha z - X Theta_beta ; B = R Phi_eta^T ; ||R||^2.
    void residual_terms(const State& s) {
        R_ = data_.y_tilde;
        R_.noalias() -= data_.X * s.theta_beta;
        for (Index i = 0; i < N_; ++i) R_.row(i) -= data_.X.row(i).dot(s.alpha) * z_;
        for (Index k = 0; k < phi_eta_t_.cols(); ++k) B_.col(k).noalias() = R_ * phi_eta_t_.col(k);
        r2_ = R_.squaredNorm();
    }

    void factor_eta_precision(const State& s) {
        Prec_ = G_ / s.sigma2_eps;
        Prec_.diagonal().array() += Scalar(1) / s.sigma2_eta;
        llt_.compute(Prec_);
        if (llt_.info() != Eigen::Success) throw NumericalError("gibbs: theta_eta precision Cholesky failed");
    }

    // ||R - Theta_eta Phi_eta||^2 expanded so the N x L product is never formed.
    Scalar sse(const State& s) {
        const Scalar cross = (s.theta_eta.array() * B_.array()).sum();
        T_.noalias() = s.theta_eta * G_;
        const Scalar quad = (T_.array() * s.theta_eta.array()).sum();
        return std::max(Scalar(0), r2_ - Scalar(2) * cross + quad);
    }

    double loglik_from_sse(const State& s, Scalar sse_value) const {
        const double nl = static_cast<double>(N_) * static_cast<double>(L_);
        const double s2 = static_cast<double>(s.sigma2_eps);
        return -0.5 * nl * std::log(2.0 * std::numbers::pi * s2) - 0.5 * static_cast<double>(sse_value) / s2;
    }

    void sample_sigmas(State& s, Rng& rng) {
        const Scalar half(0.5);
        const Scalar NL = Scalar(N_ * L_);
        s.sigma2_eps = inv_gamma<Scalar>(rng, half * (Scalar(1) + NL), half * sse(s) + Scalar(1) / s.a_eps);
        s.sigma2_eta = inv_gamma<Scalar>(rng, half * (Scalar(1) + Scalar(N_ * Le_)),
                                         half * s.theta_eta.squaredNorm() + Scalar(1) / s.a_eta);
        s.sigma2_beta = inv_gamma<Scalar>(rng, half * (Scalar(1) + Scalar(P_ * L_)),
                                          half * s.theta_beta.squaredNorm() + Scalar(1) / s.a_beta);
        s.sigma2_alpha = inv_gamma<Scalar>(rng, half * (Scalar(1) + Scalar(P_)),
                                           half * s.alpha.squaredNorm() + Scalar(1) / s.a_alpha);
    }

    void sample_auxiliaries(State& s, Rng& rng) {
        s.a_eps = inv_gamma<Scalar>(rng, Scalar(1), inv_A2_ + Scalar(1) / s.sigma2_eps);
        s.a_eta = inv_gamma<Scalar>(rng, Scalar(1), inv_A2_ + Scalar(1) / s.sigma2_eta);
        s.a_beta = inv_gamma<Scalar>(rng, Scalar(1), inv_A2_ + Scalar(1) / s.sigma2_beta);
        s.a_alpha = inv_gamma<Scalar>(rng, Scalar(1), inv_A2_ + Scalar(1) / s.sigma2_alpha);
    }

    const TransformedDataset<Scalar>& data_;
    PriorConfig prior_;
    Index N_ = 0, P_ = 0, L_ = 0, Le_ = 0;
    RowVector<Scalar> z_;
    Scalar zz_ = 0;
    Scalar inv_A2_ = 0;
    Matrix<Scalar> phi_eta_, phi_eta_t_, G_, XtX_, XtY_;
    Vector<Scalar> x2_;

    Matrix<Scalar> XtTheta_, XtE_, XtXb_, R_, B_, T_, Prec_, W_;
    RowVector<Scalar> row_;
    Eigen::LLT<Matrix<Scalar>> llt_;
    Scalar r2_ = 0;
};

template <typename Scalar>
ChainOutput<Scalar> run_chain(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior,
                              const GibbsConfig& cfg, Index chain_id,
                              const ParameterState<Scalar>* init = nullptr) {
    cfg.validate();
    const auto& basis = *tdata.basis;
    ChainOutput<Scalar> out;
    out.chain_id = chain_id;
    out.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(chain_id));
    ParameterState<Scalar> s = init ? *init : init_state(tdata, prior, derive_seed(out.seed, 1));
    out.initial = s;
    Rng rng(derive_seed(out.seed, 2));
    GibbsSampler<Scalar> sampler(tdata, prior);

    out.cond_loglik.reserve(static_cast<std::size_t>(cfg.n_iter));
    out.draws.reserve(static_cast<std::size_t>(cfg.num_draws()));
    out.theta_eta_mean = Matrix<Scalar>::Zero(tdata.n(), sampler.rank_eta());
    Index stored = 0;

    const auto t0 = std::chrono::steady_clock::now();
    for (Index t = 0; t < cfg.n_iter; ++t) {
        const double ll = sampler.sweep(s, rng, cfg.update_variances);
        if (!std::isfinite(ll))
            throw NumericalError("chain " + std::to_string(chain_id) + ": non-finite log-likelihood at iteration " +
                                 std::to_string(t) + " (sigma2_eps=" + std::to_string(double(s.sigma2_eps)) + ")");
        out.cond_loglik.push_back(ll);
        if (t >= cfg.n_burnin && (t - cfg.n_burnin + 1) % cfg.thin == 0) {
            ParameterState<Scalar> d = s;
            apply_identifiability_inplace(d, basis);
            ++stored;
            out.theta_eta_mean += (d.theta_eta - out.theta_eta_mean) / Scalar(stored);
            if (!cfg.store_eta) d.theta_eta.resize(0, 0);
            out.draws.push_back(std::move(d));
        }
        if (cfg.verbose && (t + 1) % 1000 == 0)
            std::fprintf(stderr, "[chain %ld] iteration %ld/%ld\n", long(chain_id), long(t + 1), long(cfg.n_iter));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.seconds_per_1000 = out.seconds * 1000.0 / static_cast<double>(cfg.n_iter);
    return out;
}

template <typename Scalar>
std::vector<ChainOutput<Scalar>> run_gibbs(const TransformedDataset<Scalar>& tdata, const PriorConfig& prior,
                                           const GibbsConfig& cfg) {
    cfg.validate();
    std::vector<ChainOutput<Scalar>> chains(static_cast<std::size_t>(cfg.n_chains));
    auto job = [&](std::size_t c) {
        try {
            chains[c] = run_chain(tdata, prior, cfg, static_cast<Index>(c));
        } catch (const NumericalError& e) {
            throw NumericalError("chain " + std::to_string(c) + " aborted: " + e.what());
        }
    };
    parallel_for(chains.size(), job, cfg.parallel_chains ? 0u : 1u);
    return chains;
}

// Post-burn-in draws of all chains, concatenated in chain order.
template <typename Scalar>
std::vector<ParameterState<Scalar>> pooled_draws(const std::vector<ChainOutput<Scalar>>& chains) {
    std::vector<ParameterState<Scalar>> all;
    for (const auto& c : chains) all.insert(all.end(), c.draws.begin(), c.draws.end());
    return all;
}

} // namespace simba
