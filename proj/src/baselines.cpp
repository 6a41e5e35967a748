#include "simba/baselines.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <numeric>

namespace simba {

BHResult bh_adjust(const Eigen::VectorXd& p, double q) {
    const Index m = p.size();
    for (Index i = 0; i < m; ++i)
        if (!(p(i) >= 0 && p(i) <= 1)) throw std::invalid_argument("bh_adjust: p-values must lie in [0, 1]");
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p(a) < p(b); });
    BHResult out;
    out.adjusted.resize(m);
    double running = 1.0;
    for (Index k = m; k-- > 0;) {
        const Index i = order[std::size_t(k)];
        running = std::min(running, p(i) * double(m) / double(k + 1));
        out.adjusted(i) = std::min(1.0, running);
    }
    out.reject = out.adjusted.array() <= q;
    return out;
}

GLMResult glm_fit(const Dataset<double>& data, double level, double fdr_q) {
    data.validate();
    const Index N = data.n(), P = data.p(), V = data.v();
    if (N <= P) throw DataError("glm_fit: need more participants than covariates");
    const Eigen::MatrixXd& X = data.X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < P) throw DataError("glm_fit: covariate matrix is rank deficient");

    const Eigen::MatrixXd XtX = X.transpose() * X;
    const Eigen::MatrixXd XtXinv = XtX.ldlt().solve(Eigen::MatrixXd::Identity(P, P));
    GLMResult r;
    r.df = N - P;
    r.level = level;
    for (Index j = 0; j < P; ++j) r.names.push_back(data.covariate_name(j));
    r.coef = qr.solve(data.Y);
    const Eigen::RowVectorXd rss = (data.Y - X * r.coef).colwise().squaredNorm();
    const Eigen::RowVectorXd s2 = rss / double(r.df);

    boost::math::students_t tdist(double(r.df));
    const double tq = boost::math::quantile(tdist, 0.5 + level / 2);
    r.se.resize(P, V);
    r.t.resize(P, V);
    r.p.resize(P, V);
    r.sign.resize(P, V);
    for (Index j = 0; j < P; ++j)
        for (Index v = 0; v < V; ++v) {
            const double se = std::sqrt(XtXinv(j, j) * s2(v));
            const double b = r.coef(j, v);
            r.se(j, v) = se;
            r.sign(j, v) = b < 0 ? -1.0 : 1.0;
            double t;
            if (se > 0)
                t = b / se;
            else
                t = b == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
            r.t(j, v) = t;
            r.p(j, v) = std::isinf(t) ? 0.0 : 2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(t)));
        }
    r.lower = r.coef - tq * r.se;
    r.upper = r.coef + tq * r.se;
    r.p_adj.resize(P, V);
    for (Index j = 0; j < P; ++j) r.p_adj.row(j) = bh_adjust(r.p.row(j).transpose(), fdr_q).adjusted.transpose();
    r.e_s = r.sign.cwiseProduct((1.0 - r.p_adj.array()).matrix());
    return r;
}

std::vector<EffectMap> GLMResult::effect_maps(double threshold) const {
    std::vector<EffectMap> maps;
    for (Index j = 0; j < coef.rows(); ++j) {
        EffectMap m;
        m.covariate = j < Index(names.size()) ? names[std::size_t(j)] : "x" + std::to_string(j);
        m.mean = coef.row(j).transpose();
        m.lower = lower.row(j).transpose();
        m.upper = upper.row(j).transpose();
        m.e_s = e_s.row(j).transpose();
        m.p_plus = 0.5 * (1.0 + m.e_s.array());
        m.level = level;
        m.set_threshold(threshold);
        maps.push_back(std::move(m));
    }
    return maps;
}

namespace {

struct BMLState {
    Eigen::MatrixXd b;
    Eigen::VectorXd gamma, u, tau2, a_tau;
    double tau2_u = 1, a_u = 1, sigma2 = 1, a_e = 1;
};

} // namespace

BMLResult bml_fit(const Dataset<double>& data, const GibbsConfig& cfg, const BMLOptions& opt) {
    data.validate();
    cfg.validate();
    opt.summary.validate();
    if (opt.fixed_tau2 && !(*opt.fixed_tau2 > 0)) throw ConfigError("bml: fixed tau2 must be positive");
    const Index N = data.n(), P = data.p(), V = data.v();
    const Eigen::MatrixXd& X = data.X;
    const Eigen::MatrixXd XtX = X.transpose() * X;
    const Eigen::MatrixXd XtY = X.transpose() * data.Y;
    const Eigen::VectorXd rowsum = data.Y.rowwise().sum();
    const double sumY2 = data.Y.squaredNorm();
    const Eigen::MatrixXd ols = XtX.ldlt().solve(XtY);
    const double inv_A2 = 1.0 / (opt.A * opt.A);

    const Index nd = cfg.num_draws();
    const Index D = nd * cfg.n_chains;
    std::vector<Eigen::MatrixXf> store(static_cast<std::size_t>(P), Eigen::MatrixXf(V, D));
    std::vector<Eigen::MatrixXd> sums(static_cast<std::size_t>(cfg.n_chains), Eigen::MatrixXd::Zero(P, V));
    std::vector<Eigen::VectorXd> gsums(static_cast<std::size_t>(cfg.n_chains), Eigen::VectorXd::Zero(P));
    BMLResult res;
    res.chains.resize(static_cast<std::size_t>(cfg.n_chains));

    auto chain = [&](std::size_t c) {
        const std::uint64_t seed = derive_seed(cfg.seed, c);
        Rng rng(seed);
        BMLState s;
        s.b = ols;
        for (Index v = 0; v < V; ++v)
            for (Index j = 0; j < P; ++j) s.b(j, v) += 0.1 * std_normal<double>(rng);
        s.gamma = s.b.rowwise().mean();
        s.u = Eigen::VectorXd::Zero(N);
        s.tau2 = Eigen::VectorXd::Constant(P, opt.fixed_tau2.value_or(1.0));
        s.a_tau = Eigen::VectorXd::Ones(P);

        BMLChainTrace& tr = res.chains[c];
        tr.tau2.resize(cfg.n_iter, P);
        std::normal_distribution<double> normal;
        Eigen::MatrixXd rhs(P, V), Q(P, P), Z(P, V);
        Eigen::LLT<Eigen::MatrixXd> llt(P);
        Index stored = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (Index t = 0; t < cfg.n_iter; ++t) {
            Q = XtX / s.sigma2;
            Q.diagonal() += s.tau2.cwiseInverse();
            llt.compute(Q);
            const Eigen::VectorXd Xtu = X.transpose() * s.u;
            rhs = XtY / s.sigma2;
            rhs.colwise() += s.gamma.cwiseQuotient(s.tau2) - Xtu / s.sigma2;
            llt.solveInPlace(rhs);
            for (Index v = 0; v < V; ++v)
                for (Index j = 0; j < P; ++j) Z(j, v) = normal(rng);
            llt.matrixU().solveInPlace(Z);
            s.b.noalias() = rhs + Z;

            const Eigen::VectorXd bsum = s.b.rowwise().sum();
            const double prec_u = double(V) / s.sigma2 + 1.0 / s.tau2_u;
            for (Index i = 0; i < N; ++i) {
                const double mu = (rowsum(i) - X.row(i).dot(bsum)) / s.sigma2 / prec_u;
                s.u(i) = mu + normal(rng) / std::sqrt(prec_u);
            }
            for (Index j = 0; j < P; ++j) {
                const double prec = double(V) / s.tau2(j) + 1.0 / opt.gamma_var;
                s.gamma(j) = bsum(j) / s.tau2(j) / prec + normal(rng) / std::sqrt(prec);
            }
            if (!opt.fixed_tau2) {
                for (Index j = 0; j < P; ++j) {
                    const double ss = (s.b.row(j).array() - s.gamma(j)).square().sum();
                    s.tau2(j) = inv_gamma<double>(rng, 0.5 * (1.0 + double(V)), 0.5 * ss + 1.0 / s.a_tau(j));
                    s.a_tau(j) = inv_gamma<double>(rng, 1.0, inv_A2 + 1.0 / s.tau2(j));
                }
            }
            s.tau2_u = inv_gamma<double>(rng, 0.5 * (1.0 + double(N)), 0.5 * s.u.squaredNorm() + 1.0 / s.a_u);
            s.a_u = inv_gamma<double>(rng, 1.0, inv_A2 + 1.0 / s.tau2_u);

            const Eigen::VectorXd Xbsum = X * s.b.rowwise().sum();
            double sse = sumY2 - 2.0 * (s.b.array() * XtY.array()).sum() - 2.0 * s.u.dot(rowsum) +
                         (s.b.array() * (XtX * s.b).array()).sum() + 2.0 * s.u.dot(Xbsum) +
                         double(V) * s.u.squaredNorm();
            sse = std::max(0.0, sse);
            s.sigma2 = inv_gamma<double>(rng, 0.5 * (1.0 + double(N * V)), 0.5 * sse + 1.0 / s.a_e);
            s.a_e = inv_gamma<double>(rng, 1.0, inv_A2 + 1.0 / s.sigma2);

            const double nv = double(N) * double(V);
            const double ll = -0.5 * nv * std::log(2.0 * std::numbers::pi * s.sigma2) - 0.5 * sse / s.sigma2;
            if (!std::isfinite(ll))
                throw NumericalError("bml chain " + std::to_string(c) + ": non-finite log-likelihood at iteration " +
                                     std::to_string(t));
            tr.cond_loglik.push_back(ll);
            tr.sigma2_e.push_back(s.sigma2);
            tr.tau2_u.push_back(s.tau2_u);
            tr.tau2.row(t) = s.tau2.transpose();

            if (t >= cfg.n_burnin && (t - cfg.n_burnin + 1) % cfg.thin == 0) {
                const double ubar = s.u.mean();
                const Index col = Index(c) * nd + stored;
                for (Index j = 0; j < P; ++j) {
                    const double shift = j == 0 ? ubar : 0.0;
                    store[std::size_t(j)].col(col) = (s.b.row(j).array() + shift).cast<float>().transpose();
                }
                sums[c] += s.b;
                sums[c].row(0).array() += ubar;
                gsums[c] += s.gamma;
                gsums[c](0) += ubar;
                ++stored;
            }
        }
        tr.seconds_per_1000 =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() * 1000.0 / double(cfg.n_iter);
    };
    parallel_for(std::size_t(cfg.n_chains), chain, cfg.parallel_chains ? 0u : 1u);

    res.posterior_mean = Eigen::MatrixXd::Zero(P, V);
    res.gamma_mean = Eigen::VectorXd::Zero(P);
    for (Index c = 0; c < cfg.n_chains; ++c) {
        res.posterior_mean += sums[std::size_t(c)];
        res.gamma_mean += gsums[std::size_t(c)];
    }
    res.posterior_mean /= double(D);
    res.gamma_mean /= double(D);
    for (Index j = 0; j < P; ++j)
        res.maps.push_back(summarize_samples(store[std::size_t(j)], opt.summary, data.covariate_name(j)));
    return res;
}

} // namespace simba
