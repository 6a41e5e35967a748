#include "simba/diagnostics.hpp"

#include <numeric>

namespace simba {

RHat gelman_rubin(const std::vector<std::vector<double>>& traces) {
    if (traces.size() < 2) throw std::invalid_argument("gelman_rubin: need at least 2 chains");
    const std::size_t n = traces.front().size();
    for (const auto& t : traces)
        if (t.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal length");
    if (n < 10) throw std::invalid_argument("gelman_rubin: chains must have length >= 10");

    const std::size_t h = n / 2;
    std::vector<double> means, vars;
    for (const auto& t : traces)
        for (std::size_t start : {std::size_t(0), n - h}) {
            double m = 0;
            for (std::size_t k = 0; k < h; ++k) m += t[start + k];
            m /= double(h);
            double v = 0;
            for (std::size_t k = 0; k < h; ++k) v += (t[start + k] - m) * (t[start + k] - m);
            means.push_back(m);
            vars.push_back(v / double(h - 1));
        }
    const double M = double(means.size());
    const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / M;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / M;
    double B = 0;
    for (double m : means) B += (m - grand) * (m - grand);
    B *= double(h) / (M - 1);
    if (!(W > 0)) return {1.0, true};
    const double nh = double(h);
    return {std::sqrt(((nh - 1) / nh * W + B / nh) / W), false};
}

double PPCResult::envelope_coverage() const {
    if (replicated.rows() == 0) return 0.0;
    Index inside = 0;
    for (Index b = 0; b < bins(); ++b) {
        const double lo = replicated.col(b).minCoeff(), hi = replicated.col(b).maxCoeff();
        inside += observed(b) >= lo && observed(b) <= hi;
    }
    return double(inside) / double(bins());
}

Eigen::VectorXd histogram_density(const Eigen::MatrixXd& values, const Eigen::VectorXd& edges) {
    const Index bins = edges.size() - 1;
    const double lo = edges(0), hi = edges(bins), w = (hi - lo) / double(bins);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
    Index n_in = 0;
    for (Index k = 0; k < values.size(); ++k) {
        const double x = values.data()[k];
        if (!(x >= lo && x <= hi)) continue;
        const Index b = std::min<Index>(bins - 1, static_cast<Index>((x - lo) / w));
        counts(b) += 1;
        ++n_in;
    }
    if (n_in > 0) counts /= double(n_in) * w;
    return counts;
}

namespace {

const Matrix<double>& retained_responses(const TransformedDataset<double>& tdata) {
    if (!tdata.Y)
        throw DataError("posterior predictive check needs voxel-space responses; re-run with "
                        "memory.retain_responses = true");
    return *tdata.Y;
}

PPCResult ppc_core(const std::vector<ParameterState<double>>& states, const TransformedDataset<double>& tdata,
                   const PPCOptions& opt) {
    const Matrix<double>& Y = retained_responses(tdata);
    const auto& basis = *tdata.basis;
    PPCResult out;
    const double lo = Y.minCoeff(), hi = Y.maxCoeff();
    const double pad = hi > lo ? 0.1 * (hi - lo) : 0.5;
    out.edges = Eigen::VectorXd::LinSpaced(opt.bins + 1, lo - pad, hi + pad);
    out.observed = histogram_density(Y, out.edges);
    out.observed_mean = Y.mean();
    out.replicated.resize(opt.n_rep, opt.bins);
    out.rep_means.resize(opt.n_rep);
    if (opt.n_rep == 0) return out;
    if (states.empty()) throw std::invalid_argument("ppc: no posterior states supplied");

    const Matrix<double> W = basis.loading();
    const Matrix<double> We = basis.loading_eta();
    const Index S = static_cast<Index>(states.size());
    parallel_for(std::size_t(opt.n_rep), [&](std::size_t k) {
        Rng rng(derive_seed(opt.seed, k));
        ParameterState<double> s = states[std::size_t(Index(k) * S / opt.n_rep)];
        if (s.theta_eta.size() == 0) {
            s.theta_eta = Matrix<double>::Zero(tdata.n(), basis.rank_eta());
            GibbsSampler<double> local(tdata, PriorConfig{});
            local.sample_theta_eta(s, rng);
        }
        Matrix<double> C = tdata.X * s.theta_beta;
        const double sd = std::sqrt(s.sigma2_eps);
        for (Index l = 0; l < C.cols(); ++l)
            for (Index i = 0; i < C.rows(); ++i) C(i, l) += sd * std_normal<double>(rng);
        Matrix<double> Yrep = C * W.transpose();
        Yrep.noalias() += s.theta_eta * We.transpose();
        Yrep.colwise() += tdata.X * s.alpha;
        out.replicated.row(Index(k)) = histogram_density(Yrep, out.edges).transpose();
        out.rep_means(Index(k)) = Yrep.mean();
    });
    return out;
}

} // namespace

PPCResult ppc_from_states(const std::vector<ParameterState<double>>& states, const TransformedDataset<double>& tdata,
                          const PPCOptions& opt) {
    return ppc_core(states, tdata, opt);
}

PPCResult ppc_from_vi(const VariationalState<double>& q, const TransformedDataset<double>& tdata,
                      const PPCOptions& opt) {
    Rng rng(derive_seed(opt.seed, 0x5050));
    const Index P = q.alpha_mean.size(), L = q.beta_mean.cols(), N = q.eta_mean.rows();
    const Eigen::LLT<Matrix<double>> chol(q.eta_cov);
    const Matrix<double> Lc = chol.matrixL();
    std::vector<ParameterState<double>> states;
    for (Index k = 0; k < opt.n_rep; ++k) {
        ParameterState<double> s = q.mean_state();
        for (Index j = 0; j < P; ++j) {
            s.alpha(j) += std::sqrt(q.alpha_var(j)) * std_normal<double>(rng);
            for (Index l = 0; l < L; ++l) s.theta_beta(j, l) += std::sqrt(q.beta_var(j)) * std_normal<double>(rng);
        }
        Matrix<double> Z(N, Lc.rows());
        for (Index i = 0; i < N; ++i)
            for (Index l = 0; l < Z.cols(); ++l) Z(i, l) = std_normal<double>(rng);
        s.theta_eta += Z * Lc.transpose();
        s.sigma2_eps = inv_gamma<double>(rng, q.sigma2_eps.shape, q.sigma2_eps.rate);
        states.push_back(std::move(s));
    }
    return ppc_core(states, tdata, opt);
}

namespace {

TransformedDataset<double> drop_row(const TransformedDataset<double>& t, Index i) {
    TransformedDataset<double> f;
    const Index N = t.n();
    f.y_tilde.resize(N - 1, t.y_tilde.cols());
    f.X.resize(N - 1, t.X.cols());
    for (Index r = 0, k = 0; r < N; ++r) {
        if (r == i) continue;
        f.y_tilde.row(k) = t.y_tilde.row(r);
        f.X.row(k) = t.X.row(r);
        ++k;
    }
    f.basis = t.basis;
    return f;
}

// Posterior point estimates (alpha, Theta_beta) for a training set.
std::pair<Vector<double>, Matrix<double>> fit_population(const TransformedDataset<double>& t,
                                                         const LoocvOptions& opt, std::uint64_t seed) {
    if (opt.backend == LoocvBackend::VI) {
        VIConfig cfg = opt.vi;
        cfg.seed = seed;
        const auto r = run_vi(t, opt.prior, cfg);
        return {r.state.alpha_mean, r.state.beta_mean};
    }
    GibbsConfig cfg = opt.gibbs_short;
    cfg.seed = seed;
    cfg.n_chains = 1;
    const auto chain = run_chain(t, opt.prior, cfg, 0);
    Vector<double> a = Vector<double>::Zero(t.p());
    Matrix<double> b = Matrix<double>::Zero(t.p(), t.rank());
    for (const auto& d : chain.draws) {
        a += d.alpha;
        b += d.theta_beta;
    }
    const double n = double(chain.draws.size());
    return {a / n, b / n};
}

} // namespace

double loocv_pmse(const Matrix<double>& Y, const Matrix<double>& X, std::shared_ptr<const BasisSystem<double>> basis,
                  const LoocvOptions& opt) {
    const Index N = Y.rows(), V = Y.cols();
    if (N < 3) throw std::invalid_argument("loocv_pmse: need at least 3 participants");
    const auto full = transform_responses(Y, X, basis);
    const Eigen::VectorXd yy = Y.rowwise().squaredNorm();
    const Eigen::VectorXd ys = Y.rowwise().sum();
    const Eigen::VectorXd sl = basis->sqrt_lambda();
    const Eigen::VectorXd pt1 = basis->psi_t_ones;

    std::vector<double> err(static_cast<std::size_t>(N));
    parallel_for(std::size_t(N), [&](std::size_t k) {
        const Index i = Index(k);
        const auto fold = drop_row(full, i);
        const auto [alpha, theta] = fit_population(fold, opt, derive_seed(opt.seed, k));
        const double c = X.row(i).dot(alpha);
        const Eigen::VectorXd w = sl.cwiseProduct(theta.transpose() * X.row(i).transpose());
        const Eigen::VectorXd psi_t_y = sl.cwiseProduct(full.y_tilde.row(i).transpose());
        err[k] = yy(i) - 2 * c * ys(i) - 2 * w.dot(psi_t_y) + c * c * double(V) + 2 * c * w.dot(pt1) +
                 w.squaredNorm();
    });
    double total = 0;
    for (double e : err) total += e;
    return total / (double(N) * double(V));
}

double loocv_pmse(const Dataset<double>& data,
                  const std::function<std::shared_ptr<const BasisSystem<double>>(Index)>& builder, Index L,
                  const LoocvOptions& opt) {
    data.validate();
    return loocv_pmse(data.Y, data.X, builder(L), opt);
}

std::pair<Index, Index> candidate_window(const Eigen::VectorXd& lam, double lo, double hi) {
    const double total = lam.sum();
    Index first = 0, last = -1;
    double cum = 0;
    const double eps = 1e-12;
    for (Index l = 0; l < lam.size(); ++l) {
        cum += lam(l);
        const double f = cum / total;
        if (first == 0 && f >= lo - eps) first = l + 1;
        if (f <= hi + eps) last = l + 1;
    }
    if (first == 0 || last < first) return {0, -1};
    return {first, last};
}

std::vector<Index> subsample_grid(Index lo, Index hi, Index max_points) {
    std::vector<Index> out;
    if (hi < lo) return out;
    if (hi - lo + 1 <= max_points || max_points < 2) {
        for (Index L = lo; L <= hi && (max_points >= 2 || out.empty()); ++L) out.push_back(L);
        return out;
    }
    for (Index k = 0; k < max_points; ++k) {
        const Index L = lo + static_cast<Index>(std::llround(double(hi - lo) * double(k) / double(max_points - 1)));
        if (out.empty() || out.back() != L) out.push_back(L);
    }
    return out;
}

Index argmin_index(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("argmin_index: empty input");
    return static_cast<Index>(std::min_element(values.begin(), values.end()) - values.begin());
}

BasisSelection select_num_basis(const Dataset<double>& data, const KernelConfig& kernel, const SelectOptions& opt) {
    data.validate();
    kernel.validate();
    const Index Lmax = std::min(opt.L_max, data.v());
    if (Lmax < 1) throw ConfigError("basis.L_max must be positive");
    BasisSelection sel;
    const auto big = nystrom_decompose(data.domain, select_inducing(data.domain, Lmax, opt.strategy,
                                                                    derive_seed(opt.seed, 0)), kernel);
    sel.eigenvalues = big.lambda;
    Eigen::VectorXd cum(big.lambda.size());
    double acc = 0;
    for (Index l = 0; l < cum.size(); ++l) cum(l) = (acc += big.lambda(l));
    sel.cumulative_fraction = cum / acc;
    const auto [lo, hi] = candidate_window(big.lambda, opt.lower_fraction, opt.upper_fraction);
    if (hi < lo)
        throw ConfigError("select_num_basis: empty candidate range for L; increase basis.L_max (currently " +
                          std::to_string(Lmax) + ")");
    sel.window_lo = lo;
    sel.window_hi = hi;
    sel.candidates = subsample_grid(lo, hi, opt.max_candidates);
    for (Index L : sel.candidates) {
        auto basis = std::make_shared<const BasisSystem<double>>(
            build_basis_system(data.domain, kernel, L, default_L_eta(L), opt.seed, opt.strategy));
        sel.pmse.push_back(loocv_pmse(data.Y, data.X, basis, opt.loocv));
    }
    sel.chosen_L = sel.candidates[std::size_t(argmin_index(sel.pmse))];
    return sel;
}

std::string method_name(Method m) {
    switch (m) {
    case Method::SimbaGibbs: return "simba-gibbs";
    case Method::SimbaVI: return "simba-vi";
    case Method::GLM: return "glm";
    case Method::BML: return "bml";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::SimbaGibbs, Method::SimbaVI, Method::GLM, Method::BML})
        if (method_name(m) == name) return m;
    throw ConfigError("unknown method '" + name + "' (expected simba-gibbs, simba-vi, glm or bml)");
}

Eigen::MatrixXd population_surfaces(const Dataset<double>& train, Method method, const FitOptions& opt,
                                    std::shared_ptr<const BasisSystem<double>> basis) {
    if (method == Method::GLM) return glm_fit(train).coef;
    if (method == Method::BML) return bml_fit(train, opt.gibbs, opt.bml).posterior_mean;
    if (!basis)
        basis = std::make_shared<const BasisSystem<double>>(
            build_basis_system(train.domain, opt.kernel, opt.L, opt.L_eta, opt.seed));
    const auto t = transform_dataset(train, basis);
    Vector<double> alpha;
    Matrix<double> theta;
    if (method == Method::SimbaVI) {
        const auto r = run_vi(t, opt.prior, opt.vi);
        alpha = r.state.alpha_mean;
        theta = r.state.beta_mean;
    } else {
        const auto draws = pooled_draws(run_gibbs(t, opt.prior, opt.gibbs));
        alpha = Vector<double>::Zero(t.p());
        theta = Matrix<double>::Zero(t.p(), t.rank());
        for (const auto& d : draws) {
            alpha += d.alpha;
            theta += d.theta_beta;
        }
        alpha /= double(draws.size());
        theta /= double(draws.size());
    }
    Eigen::MatrixXd surf = theta * basis->loading().transpose();
    surf.colwise() += alpha;
    return surf;
}

Eigen::VectorXd CrossSiteResult::out_of_site_mean(std::size_t m) const {
    const Eigen::MatrixXd& P = pmse.at(m);
    const Index S = P.rows();
    Eigen::VectorXd out(S);
    for (Index s = 0; s < S; ++s) out(s) = (P.row(s).sum() - P(s, s)) / double(S - 1);
    return out;
}

CrossSiteResult cross_site_pmse(const std::vector<Dataset<double>>& sites, const std::vector<Method>& methods,
                                const FitOptions& opt) {
    if (sites.size() < 2) throw DataError("cross_site_pmse: need at least 2 sites");
    for (const auto& s : sites) {
        s.validate();
        if (!s.domain.same_geometry(sites.front().domain)) throw DataError("cross_site_pmse: site domains differ");
        if (s.p() != sites.front().p()) throw DataError("cross_site_pmse: site covariate sets differ");
    }
    const Index S = static_cast<Index>(sites.size());
    auto basis = std::make_shared<const BasisSystem<double>>(
        build_basis_system(sites.front().domain, opt.kernel, opt.L, opt.L_eta, opt.seed));
    CrossSiteResult out;
    out.methods = methods;
    for (Method m : methods) {
        Eigen::MatrixXd P(S, S);
        for (Index a = 0; a < S; ++a) {
            const Eigen::MatrixXd surf = population_surfaces(sites[std::size_t(a)], m, opt, basis);
            for (Index b = 0; b < S; ++b) {
                const auto& test = sites[std::size_t(b)];
                P(a, b) = (test.Y - test.X * surf).squaredNorm() / (double(test.n()) * double(test.v()));
            }
        }
        out.pmse.push_back(std::move(P));
    }
    return out;
}

} // namespace simba
