#include "simba/simstudy.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

namespace simba {

void TruthConfig::validate() const {
    if (!(snr > 0)) throw ConfigError("truth.snr must be positive");
    if (!(sigma_ref > 0)) throw ConfigError("truth.sigma_ref must be positive");
    if (!(disk_radius > 0)) throw ConfigError("truth.disk_radius must be positive");
    if (!(rect_half[0] > 0 && rect_half[1] > 0)) throw ConfigError("truth.rect_half must be positive");
    if (!(jitter >= 0)) throw ConfigError("truth.jitter must be non-negative");
    if (amplitude && !(*amplitude > 0)) throw ConfigError("truth.amplitude must be positive");
}

double taper(double u) { return u < 1.0 ? std::cos(0.5 * std::numbers::pi * std::max(0.0, u)) : 0.0; }

Truth make_truth(const SpatialDomain<double>& domain, const TruthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (domain.dim() != 2) throw DataError("make_truth: regions can only be placed on a 2D domain");
    const Eigen::MatrixXd& c = domain.coords();
    const Index V = domain.size();
    const Eigen::RowVector2d cen = c.colwise().mean();
    Rng rng(seed);
    std::uniform_real_distribution<double> jit(-cfg.jitter, cfg.jitter);
    auto place = [&](const std::array<double, 2>& off) {
        Eigen::RowVector2d p = cen + Eigen::RowVector2d(off[0], off[1]);
        if (cfg.jitter > 0) p += Eigen::RowVector2d(jit(rng), jit(rng));
        return p;
    };

    Truth t;
    t.beta = Eigen::MatrixXd::Zero(2, V);
    for (Index k = 0; k < 2; ++k) {
        const double sign = k == 0 ? 1.0 : -1.0;
        const auto dc = place(cfg.disk_offset[std::size_t(k)]);
        const auto rc = place(cfg.rect_offset[std::size_t(k)]);
        Index n_disk = 0, n_rect = 0;
        for (Index v = 0; v < V; ++v) {
            const double d = taper((c.row(v) - dc).norm() / cfg.disk_radius);
            const double r = taper(std::abs(c(v, 0) - rc(0)) / cfg.rect_half[0]) *
                             taper(std::abs(c(v, 1) - rc(1)) / cfg.rect_half[1]);
            if (d != 0 && r != 0)
                throw DataError("make_truth: disk and rectangle of map " + std::to_string(k) + " overlap");
            n_disk += d != 0;
            n_rect += r != 0;
            t.beta(k, v) = sign * (d - r);
        }
        if (n_disk < 5 || n_rect < 5)
            throw DataError("make_truth: region of map " + std::to_string(k) + " not placeable in mask");
    }
    double ms = 0;
    for (Index k = 0; k < 2; ++k) {
        const auto row = t.beta.row(k).array();
        ms += row.square().sum() / double((row != 0).count()) / 2.0;
    }
    t.amplitude = cfg.amplitude ? *cfg.amplitude : std::sqrt(cfg.snr * cfg.sigma_ref * cfg.sigma_ref / ms);
    t.beta *= t.amplitude;
    return t;
}

double signal_to_noise(const Truth& truth, double sigma_eps) {
    double ms = 0;
    Index maps = 0;
    for (Index k = 0; k < truth.beta.rows(); ++k) {
        const auto row = truth.beta.row(k).array();
        const Index n = (row != 0).count();
        if (n == 0) continue;
        ms += row.square().sum() / double(n);
        ++maps;
    }
    return maps == 0 ? 0.0 : ms / double(maps) / (sigma_eps * sigma_eps);
}

std::string SimScenario::label() const {
    std::ostringstream os;
    os << "N=" << N << ",sigma=" << sigma_eps;
    return os.str();
}

std::vector<SimScenario> default_scenarios(Index n_replicates, std::uint64_t seed, const TruthConfig& truth,
                                           int phantom_size) {
    const auto domain = SpatialDomain<double>::from_mask(phantom_mask(phantom_size));
    const Truth t = make_truth(domain, truth, derive_seed(seed, 0x7275));
    std::vector<SimScenario> out;
    Index k = 0;
    for (Index N : {50, 200})
        for (double sigma : {2.0, 5.0}) {
            SimScenario s;
            s.N = N;
            s.sigma_eps = sigma;
            s.n_replicates = n_replicates;
            s.seed = derive_seed(seed, 1, std::uint64_t(k++));
            s.domain = domain;
            s.truth = t;
            out.push_back(std::move(s));
        }
    return out;
}

Dataset<double> simulate_dataset(const SimScenario& sc, Index replicate) {
    const Index N = sc.N, V = sc.domain.size();
    if (sc.truth.beta.cols() != V) throw DataError("simulate_dataset: truth does not match the domain");
    Rng rng(derive_seed(sc.seed, std::uint64_t(replicate)));
    Dataset<double> d;
    d.domain = sc.domain;
    d.covariate_names = {"intercept", "x1"};
    d.X.resize(N, 2);
    d.X.col(0).setOnes();
    for (Index i = 0; i < N; ++i) d.X(i, 1) = std_normal<double>(rng);
    d.Y = d.X * sc.truth.beta;
    for (Index i = 0; i < N; ++i)
        for (Index v = 0; v < V; ++v) d.Y(i, v) += std_normal<double>(rng);
    if (sc.noise == NoiseMode::IID) {
        for (Index i = 0; i < N; ++i)
            for (Index v = 0; v < V; ++v) d.Y(i, v) += sc.sigma_eps * std_normal<double>(rng);
    } else {
        if (!sc.noise_basis || sc.noise_basis->num_voxels() != V)
            throw ConfigError("simulate_dataset: correlated noise needs a basis over the scenario domain");
        Eigen::MatrixXd Z(N, sc.noise_basis->rank());
        for (Index i = 0; i < N; ++i)
            for (Index l = 0; l < Z.cols(); ++l) Z(i, l) = std_normal<double>(rng);
        d.Y.noalias() += sc.sigma_eps * Z * sc.noise_basis->loading().transpose();
    }
    return d;
}

ReplicateMetrics evaluate_replicate(const Eigen::MatrixXd& truth, const std::vector<EffectMap>& maps,
                                    double threshold, Index first_map) {
    if (Index(maps.size()) < first_map + truth.rows())
        throw std::invalid_argument("evaluate_replicate: fewer effect maps than truth rows");
    double sq = 0;
    Index n = 0, n_true = 0, n_det = 0, tp = 0, fp = 0, covered = 0;
    for (Index j = 0; j < truth.rows(); ++j) {
        const EffectMap& m = maps[std::size_t(first_map + j)];
        if (m.size() != truth.cols()) throw std::invalid_argument("evaluate_replicate: map size mismatch");
        for (Index v = 0; v < truth.cols(); ++v) {
            const double t = truth(j, v);
            sq += (m.mean(v) - t) * (m.mean(v) - t);
            ++n;
            const bool real = t != 0, det = std::abs(m.e_s(v)) > threshold;
            n_true += real;
            n_det += det;
            tp += real && det;
            fp += !real && det;
            covered += m.lower(v) <= t && t <= m.upper(v);
        }
    }
    ReplicateMetrics r;
    r.mse = 100.0 * sq / double(n);
    r.tpr = n_true == 0 ? 0.0 : 100.0 * double(tp) / double(n_true);
    r.fdr = 100.0 * double(fp) / double(std::max<Index>(1, n_det));
    r.coverage = 100.0 * double(covered) / double(n);
    return r;
}

std::vector<EffectMap> fit_effect_maps(const Dataset<double>& data, Method method, const FitOptions& opt,
                                       const SummaryOptions& summary,
                                       std::shared_ptr<const BasisSystem<double>> basis) {
    if (method == Method::GLM) return glm_fit(data, summary.level).effect_maps(summary.threshold);
    if (method == Method::BML) {
        BMLOptions b = opt.bml;
        b.summary = summary;
        return bml_fit(data, opt.gibbs, b).maps;
    }
    if (!basis)
        basis = std::make_shared<const BasisSystem<double>>(
            build_basis_system(data.domain, opt.kernel, opt.L, opt.L_eta, opt.seed));
    const auto t = transform_dataset(data, basis);
    if (method == Method::SimbaGibbs)
        return summarize_gibbs(pooled_draws(run_gibbs(t, opt.prior, opt.gibbs)), *basis, summary,
                               data.covariate_names);
    const auto r = run_vi(t, opt.prior, opt.vi);
    return summarize_vi(r.state, *basis, summary, data.covariate_names, r.converged);
}

namespace {

std::pair<ReplicateMetrics, ReplicateMetrics> mean_sd(const std::vector<ReplicateMetrics>& xs) {
    ReplicateMetrics m, s;
    if (xs.empty()) return {m, s};
    const double n = double(xs.size());
    for (const auto& x : xs) {
        m.mse += x.mse / n;
        m.tpr += x.tpr / n;
        m.fdr += x.fdr / n;
        m.coverage += x.coverage / n;
    }
    if (xs.size() > 1) {
        for (const auto& x : xs) {
            s.mse += (x.mse - m.mse) * (x.mse - m.mse);
            s.tpr += (x.tpr - m.tpr) * (x.tpr - m.tpr);
            s.fdr += (x.fdr - m.fdr) * (x.fdr - m.fdr);
            s.coverage += (x.coverage - m.coverage) * (x.coverage - m.coverage);
        }
        s.mse = std::sqrt(s.mse / (n - 1));
        s.tpr = std::sqrt(s.tpr / (n - 1));
        s.fdr = std::sqrt(s.fdr / (n - 1));
        s.coverage = std::sqrt(s.coverage / (n - 1));
    }
    return {m, s};
}

} // namespace

const MetricsRow* MetricsTable::find(Index scenario, Method method) const {
    for (const auto& r : rows)
        if (r.scenario == scenario && r.method == method) return &r;
    return nullptr;
}

MetricsTable aggregate(const std::vector<SimScenario>& scenarios, const std::vector<Method>& methods,
                       std::vector<ReplicateRecord> records) {
    MetricsTable t;
    for (Index s = 0; s < Index(scenarios.size()); ++s)
        for (Method m : methods) {
            MetricsRow row;
            row.scenario = s;
            row.N = scenarios[std::size_t(s)].N;
            row.sigma_eps = scenarios[std::size_t(s)].sigma_eps;
            row.method = m;
            std::vector<ReplicateMetrics> ok;
            for (const auto& r : records)
                if (r.scenario == s && r.method == m) {
                    row.L = r.L;
                    if (r.error.empty()) ok.push_back(r.metrics);
                }
            row.n_ok = Index(ok.size());
            std::tie(row.mean, row.sd) = mean_sd(ok);
            t.rows.push_back(row);
        }
    t.records = std::move(records);
    return t;
}

std::string MetricsTable::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "scenario,N,sigma_eps,method,L,n_ok,mse_mean,mse_sd,tpr_mean,tpr_sd,fdr_mean,fdr_sd,coverage_mean,"
          "coverage_sd\n";
    for (const auto& r : rows)
        os << r.scenario << ',' << r.N << ',' << r.sigma_eps << ',' << method_name(r.method) << ',' << r.L << ','
           << r.n_ok << ',' << r.mean.mse << ',' << r.sd.mse << ',' << r.mean.tpr << ',' << r.sd.tpr << ','
           << r.mean.fdr << ',' << r.sd.fdr << ',' << r.mean.coverage << ',' << r.sd.coverage << '\n';
    return os.str();
}

std::string MetricsTable::records_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "scenario,replicate,method,L,mse,tpr,fdr,coverage,seconds,error\n";
    for (const auto& r : records) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << r.scenario << ',' << r.replicate << ',' << method_name(r.method) << ',' << r.L << ','
           << r.metrics.mse << ',' << r.metrics.tpr << ',' << r.metrics.fdr << ',' << r.metrics.coverage << ','
           << r.seconds << ',' << err << '\n';
    }
    return os.str();
}

std::string MetricsTable::to_text() const {
    std::vector<std::pair<Index, std::string>> scen;
    std::vector<Method> methods;
    for (const auto& r : rows) {
        if (std::none_of(scen.begin(), scen.end(), [&](const auto& s) { return s.first == r.scenario; })) {
            std::ostringstream os;
            os << "N=" << r.N << " sigma=" << r.sigma_eps;
            scen.emplace_back(r.scenario, os.str());
        }
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    std::ostringstream os;
    auto cell = [](double m, double s) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(1) << m << " (" << s << ")";
        return c.str();
    };
    const char* metric_names[] = {"MSE(%)", "TPR(%)", "FDR(%)", "Coverage(%)"};
    for (const auto& [sid, label] : scen) {
        os << label << '\n';
        os << std::left << std::setw(14) << "method";
        for (const char* m : metric_names) os << std::setw(16) << m;
        os << '\n';
        for (Method m : methods) {
            const MetricsRow* r = find(sid, m);
            if (!r) continue;
            os << std::setw(14) << method_name(m) << std::setw(16) << cell(r->mean.mse, r->sd.mse) << std::setw(16)
               << cell(r->mean.tpr, r->sd.tpr) << std::setw(16) << cell(r->mean.fdr, r->sd.fdr) << std::setw(16)
               << cell(r->mean.coverage, r->sd.coverage) << '\n';
        }
        os << '\n';
    }
    return os.str();
}

MetricsTable run_study(const std::vector<SimScenario>& scenarios, const StudyOptions& opt) {
    const auto& methods = opt.methods;
    const bool need_basis = std::any_of(methods.begin(), methods.end(), [](Method m) {
        return m == Method::SimbaGibbs || m == Method::SimbaVI;
    });
    std::vector<ReplicateRecord> records;
    for (Index s = 0; s < Index(scenarios.size()); ++s) {
        const SimScenario& sc = scenarios[std::size_t(s)];
        std::shared_ptr<const BasisSystem<double>> basis;
        Index L = 0;
        if (need_basis) {
            L = opt.fit.L;
            if (opt.select_L) {
                const auto sel = select_num_basis(simulate_dataset(sc, 0), opt.fit.kernel, opt.select);
                L = sel.chosen_L;
                if (opt.verbose) std::fprintf(stderr, "[study] %s: selected L=%ld\n", sc.label().c_str(), long(L));
            }
            basis = std::make_shared<const BasisSystem<double>>(
                build_basis_system(sc.domain, opt.fit.kernel, L, opt.fit.L_eta, opt.fit.seed));
        }
        const std::size_t M = methods.size();
        std::vector<ReplicateRecord> recs(std::size_t(sc.n_replicates) * M);
        parallel_for(std::size_t(sc.n_replicates), [&](std::size_t r) {
            const Dataset<double> data = simulate_dataset(sc, Index(r));
            for (std::size_t k = 0; k < M; ++k) {
                ReplicateRecord& rec = recs[r * M + k];
                rec.scenario = s;
                rec.replicate = Index(r);
                rec.method = methods[k];
                const bool simba = methods[k] == Method::SimbaGibbs || methods[k] == Method::SimbaVI;
                rec.L = simba ? L : 0;
                FitOptions f = opt.fit;
                f.gibbs.seed = derive_seed(opt.fit.gibbs.seed, std::uint64_t(s), r);
                f.vi.seed = derive_seed(opt.fit.vi.seed, std::uint64_t(s), r);
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const auto maps = fit_effect_maps(data, methods[k], f, opt.summary, simba ? basis : nullptr);
                    rec.metrics = evaluate_replicate(sc.truth.beta, maps, opt.summary.threshold);
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
                rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (opt.verbose)
                    std::fprintf(stderr, "[study] %s rep %zu %s: mse %.2f tpr %.1f fdr %.1f cov %.1f (%.1fs)%s\n",
                                 sc.label().c_str(), r, method_name(methods[k]).c_str(), rec.metrics.mse,
                                 rec.metrics.tpr, rec.metrics.fdr, rec.metrics.coverage, rec.seconds,
                                 rec.error.empty() ? "" : " FAILED");
            }
        });
        records.insert(records.end(), recs.begin(), recs.end());
    }
    return aggregate(scenarios, methods, std::move(records));
}

} // namespace simba
