// Acceptance checks 1-7. One PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: simba_acceptance [OUT_DIR] [CRITERIA], e.g. simba_acceptance out 2,3,5

#define DOCTEST_CONFIG_DISABLE
#include "alloc_counter.hpp"
#include "helpers.hpp"

#include "simba/config.hpp"
#include "simba/simstudy.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

using namespace simba;
using namespace simba::testing;
namespace fs = std::filesystem;

namespace {

// criterion 1
constexpr Index kReplicates = 20;
constexpr double kSimbaMseLo = 0.3, kSimbaMseHi = 1.5;
constexpr double kGlmMseLo = 1.8, kGlmMseHi = 3.5;
constexpr double kMaxFdr = 10.0;
constexpr double kMinCoverage = 95.0;
constexpr double kMinSimbaTpr = 40.0, kMaxGlmTpr = 15.0;
constexpr double kMaxStudySeconds = 30 * 60;
// criterion 2
constexpr double kExactTol = 1e-6, kOrthoTol = 1e-8, kPsdTol = 1e-10;
// criterion 3
constexpr double kMcSe = 3.0, kViTol = 1e-8;
// criterion 4
constexpr double kMinCorr = 0.95, kMinJaccard = 0.8;
// criterion 5
constexpr double kMaxSecPer1000 = 50.0, kMaxScaling = 2.5;
// criterion 6
constexpr double kMaxRhat = 1.1, kMinPpc = 0.9;
constexpr Index kMinL = 60, kMaxL = 220;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StudyConfig desk_config() {
    StudyConfig c;
    c.set("seed", "20240");
    c.set("simulate.replicates", std::to_string(kReplicates));
    return c;
}

struct Shared {
    fs::path out;
    StudyConfig cfg = desk_config();
    std::vector<SimScenario> scenarios = cfg.scenarios();
    std::map<Index, Index> selected;  // scenario -> L

    Index L_for(Index s) {
        auto it = selected.find(s);
        if (it != selected.end()) return it->second;
        const auto sel = select_num_basis(simulate_dataset(scenarios[std::size_t(s)], 0), cfg.kernel(), cfg.select());
        return selected[s] = sel.chosen_L;
    }
    std::shared_ptr<const BasisSystem<double>> basis_for(Index s) {
        const FitOptions f = cfg.fit();
        return std::make_shared<const BasisSystem<double>>(
            build_basis_system(scenarios[std::size_t(s)].domain, f.kernel, L_for(s), f.L_eta, f.seed));
    }
    Index scenario_index(Index N, double sigma) const {
        for (std::size_t k = 0; k < scenarios.size(); ++k)
            if (scenarios[k].N == N && scenarios[k].sigma_eps == sigma) return Index(k);
        throw std::logic_error("scenario not in grid");
    }
};

Outcome criterion1(Shared& sh) {
    const auto opt = sh.cfg.study();
    const auto t0 = std::chrono::steady_clock::now();
    StudyOptions o = opt;
    o.verbose = true;
    const auto table = run_study(sh.scenarios, o);
    const double secs = seconds_since(t0);
    fs::create_directories(sh.out);
    write_text_atomic(sh.out / "study_metrics.csv", table.to_csv());
    write_text_atomic(sh.out / "study_records.csv", table.records_csv());
    write_text_atomic(sh.out / "study_table.txt", table.to_text());
    for (const auto& r : table.rows)
        if (r.L > 0) sh.selected[r.scenario] = r.L;

    std::ostringstream why;
    bool a = true, b = true, c = true, d = true, e = true;
    const Method simba[] = {Method::SimbaGibbs, Method::SimbaVI};
    for (Method m : simba) {
        int beats_bml = 0;
        for (Index s = 0; s < Index(sh.scenarios.size()); ++s) {
            const auto* row = table.find(s, m);
            const auto* glm = table.find(s, Method::GLM);
            const auto* bml = table.find(s, Method::BML);
            if (row->n_ok != kReplicates || glm->n_ok != kReplicates || bml->n_ok != kReplicates) {
                a = false;
                why << " [" << method_name(m) << " s" << s << ": failed replicates]";
            }
            if (!(row->mean.mse < glm->mean.mse)) {
                a = false;
                why << " [" << method_name(m) << " s" << s << " mse>=glm]";
            }
            beats_bml += row->mean.mse < bml->mean.mse;
            if (!(row->mean.fdr <= kMaxFdr)) {
                c = false;
                why << " [" << method_name(m) << " s" << s << " fdr " << row->mean.fdr << "]";
            }
            if (!(row->mean.coverage >= kMinCoverage)) {
                d = false;
                why << " [" << method_name(m) << " s" << s << " coverage " << row->mean.coverage << "]";
            }
        }
        if (beats_bml < 3) {
            a = false;
            why << " [" << method_name(m) << " beats bml in " << beats_bml << "/4]";
        }
        const Index s200 = sh.scenario_index(200, 2.0);
        const double mse = table.find(s200, m)->mean.mse;
        if (!(mse >= kSimbaMseLo && mse <= kSimbaMseHi)) {
            b = false;
            why << " [" << method_name(m) << " N200/2 mse " << mse << "]";
        }
        const double tpr = table.find(sh.scenario_index(50, 5.0), m)->mean.tpr;
        if (!(tpr >= kMinSimbaTpr)) {
            e = false;
            why << " [" << method_name(m) << " N50/5 tpr " << tpr << "]";
        }
    }
    const double glm_mse = table.find(sh.scenario_index(200, 2.0), Method::GLM)->mean.mse;
    if (!(glm_mse >= kGlmMseLo && glm_mse <= kGlmMseHi)) {
        b = false;
        why << " [glm N200/2 mse " << glm_mse << "]";
    }
    const double glm_tpr = table.find(sh.scenario_index(50, 5.0), Method::GLM)->mean.tpr;
    if (!(glm_tpr <= kMaxGlmTpr)) {
        e = false;
        why << " [glm N50/5 tpr " << glm_tpr << "]";
    }
    const bool fast = secs < kMaxStudySeconds;
    std::ostringstream os;
    os << "a=" << a << " b=" << b << " c=" << c << " d=" << d << " e=" << e << " time=" << int(secs) << " s"
       << why.str();
    std::printf("%s", table.to_text().c_str());
    return {a && b && c && d && e && fast, os.str()};
}

Outcome criterion2() {
    std::ostringstream os;
    bool ok = true;

    MaskGrid g;
    g.dims = {12, 12};
    g.inside.assign(144, 1);
    const auto grid = SpatialDomain<double>::from_mask(g);
    const KernelConfig exact{1.5, 0.09, 1e-10};
    const Eigen::MatrixXd Kg = dense_gram(grid.coords(), exact);
    const auto fe = nystrom_decompose(grid, select_inducing(grid, grid.size(), InducingStrategy::FarthestPoint, 0), exact);
    const double e_exact = (Kg - fe.psi * fe.lambda.asDiagonal() * fe.psi.transpose()).norm() / Kg.norm();
    ok &= e_exact < kExactTol;
    os << "exact=" << e_exact;

    const auto big = SpatialDomain<double>::from_mask(phantom_mask());
    const auto fb = nystrom_decompose(big, select_inducing(big, 400, InducingStrategy::FarthestPoint, 0), KernelConfig{});
    const double ortho =
        (fb.psi.transpose() * fb.psi - Eigen::MatrixXd::Identity(fb.psi.cols(), fb.psi.cols())).cwiseAbs().maxCoeff();
    ok &= ortho < kOrthoTol;
    os << " ortho=" << ortho;

    const auto mid = SpatialDomain<double>::from_mask(phantom_mask(40));
    const KernelConfig k;
    const Eigen::MatrixXd K = dense_gram(mid.coords(), k);
    double prev = std::numeric_limits<double>::infinity();
    bool mono = true, psd = true;
    double worst_eig = 0;
    for (Index L : {10, 20, 40, 80, 160, 320}) {
        const auto f = nystrom_decompose(mid, select_inducing(mid, L, InducingStrategy::FarthestPoint, 0), k);
        const Eigen::MatrixXd A = f.psi * f.lambda.asDiagonal() * f.psi.transpose();
        const double e = (K - A).norm() / K.norm();
        mono &= e <= prev * (1 + 1e-12);
        prev = e;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        const double m = es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
        worst_eig = std::min(worst_eig, m);
        psd &= m > -kPsdTol;
    }
    ok &= mono && psd;
    os << " monotone=" << mono << " min_rel_eig=" << worst_eig << " err(L=320)=" << prev;
    return {ok, os.str()};
}

Outcome criterion3() {
    std::ostringstream os;
    bool ok = true;
    double worst_z = 0, worst_vi = 0;
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
        auto p = small_problem(5, 7, 3, 2, 100 + inst);
        const auto s0 = pinned_state(p.tdata);
        const auto d = dense_posterior(p.tdata, s0);
        const Eigen::VectorXd target = centered(d.mean, d, s0, *p.basis);

        GibbsConfig cfg;
        cfg.n_iter = 101000;
        cfg.n_burnin = 1000;
        cfg.seed = 7 + inst;
        cfg.store_eta = true;
        cfg.update_variances = false;
        const auto out = run_chain(p.tdata, PriorConfig{}, cfg, 0, &s0);
        Eigen::MatrixXd U(Index(out.draws.size()), target.size());
        for (std::size_t k = 0; k < out.draws.size(); ++k) U.row(Index(k)) = pack(out.draws[k]).transpose();
        const Eigen::VectorXd mc = U.colwise().mean().transpose();
        const Eigen::VectorXd se = batch_se(U, 100);
        for (Index k = 0; k < target.size(); ++k) {
            if (se(k) < 1e-12) continue;  // coordinates fixed by centering
            worst_z = std::max(worst_z, std::abs(mc(k) - target(k)) / se(k));
        }

        const auto init = variational_from_state(s0, p.tdata.n());
        VIConfig vc;
        vc.tol = 1e-13;
        vc.max_iter = 50000;
        vc.update_variances = false;
        const auto r = run_vi(p.tdata, PriorConfig{}, vc, &init);
        ParameterState<double> m = s0;
        m.alpha = r.state.alpha_mean;
        m.theta_beta = r.state.beta_mean;
        m.theta_eta = r.state.eta_mean;
        worst_vi = std::max(worst_vi, (pack(m) - target).cwiseAbs().maxCoeff());
    }
    ok = worst_z <= kMcSe && worst_vi <= kViTol;
    os << "max |gibbs-exact|/se=" << worst_z << " max |vi-exact|=" << worst_vi;
    return {ok, os.str()};
}

Outcome criterion4(Shared& sh) {
    const Index s = sh.scenario_index(200, 2.0);
    const auto data = simulate_dataset(sh.scenarios[std::size_t(s)], 0);
    const auto basis = sh.basis_for(s);
    const auto fit = sh.cfg.fit();
    const auto summary = sh.cfg.summary();
    const auto g = fit_effect_maps(data, Method::SimbaGibbs, fit, summary, basis);
    const auto v = fit_effect_maps(data, Method::SimbaVI, fit, summary, basis);
    std::ostringstream os;
    bool ok = true;
    os << "L=" << basis->rank();
    for (std::size_t j = 0; j < g.size(); ++j) {
        const Eigen::VectorXd a = g[j].mean.array() - g[j].mean.mean();
        const Eigen::VectorXd b = v[j].mean.array() - v[j].mean.mean();
        const double corr = a.dot(b) / (a.norm() * b.norm());
        const double inter = double((g[j].active && v[j].active).count());
        const double uni = double((g[j].active || v[j].active).count());
        const double jac = uni > 0 ? inter / uni : 1.0;
        ok &= corr > kMinCorr && jac > kMinJaccard;
        os << " " << g[j].covariate << ": corr=" << corr << " jaccard=" << jac;
    }
    return {ok, os.str()};
}

Outcome criterion5(Shared& sh) {
    const Index s = sh.scenario_index(200, 2.0);
    const auto data = simulate_dataset(sh.scenarios[std::size_t(s)], 0);
    const KernelConfig k = sh.cfg.kernel();
    auto per_1000 = [&](Index L, Index Le, bool count_allocs, long* large) {
        auto basis = std::make_shared<const BasisSystem<double>>(build_basis_system(data.domain, k, L, Le, 0));
        const auto t = transform_dataset(data, basis);
        GibbsSampler<double> gs(t, PriorConfig{});
        auto st = init_state(t, PriorConfig{}, 1);
        Rng rng(3);
        for (int w = 0; w < 20; ++w) gs.sweep(st, rng);
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            if (count_allocs) g_alloc_counter.arm(std::size_t(data.v()) * sizeof(double));
            const auto t0 = std::chrono::steady_clock::now();
            for (int it = 0; it < 500; ++it) gs.sweep(st, rng);
            best = std::min(best, seconds_since(t0) * 2.0);
            if (count_allocs) {
                g_alloc_counter.disarm();
                *large += g_alloc_counter.large.load();
            }
        }
        return best;
    };
    long large = 0;
    const double t160 = per_1000(160, 16, true, &large);
    const double t80 = per_1000(80, 16, false, nullptr);
    const double ratio = t160 / t80;
    std::ostringstream os;
    os << "s/1000 iter at N=200,L=160,L_eta=16: " << t160 << "; L 80->160 ratio " << ratio
       << "; V-sized allocations in loop: " << large << " (largest " << g_alloc_counter.largest.load() << " B, V=" << data.v() << ")";
    return {t160 <= kMaxSecPer1000 && ratio <= kMaxScaling && large == 0, os.str()};
}

Outcome criterion6(Shared& sh) {
    std::ostringstream os;
    bool ok = true;

    // R-hat on the small scenario
    const Index s = sh.scenario_index(50, 2.0);
    const auto data = simulate_dataset(sh.scenarios[std::size_t(s)], 0);
    const auto basis = sh.basis_for(s);
    const auto t = transform_dataset(data, basis);
    const GibbsConfig gc = sh.cfg.gibbs();
    const auto chains = run_gibbs(t, sh.cfg.prior(), gc);
    const auto& truth = sh.scenarios[std::size_t(s)].truth.beta;
    Index peak = 0;
    truth.row(1).cwiseAbs().maxCoeff(&peak);
    std::vector<std::pair<std::string, std::function<double(const ParameterState<double>&)>>> stats = {
        {"sigma2_eps", [](const auto& d) { return d.sigma2_eps; }},
        {"sigma2_beta", [](const auto& d) { return d.sigma2_beta; }},
        {"sigma2_eta", [](const auto& d) { return d.sigma2_eta; }},
        {"alpha0", [](const auto& d) { return d.alpha(0); }},
        {"alpha1", [](const auto& d) { return d.alpha(1); }},
        {"beta1_peak", [&](const auto& d) { return reconstruct_effect(d, *basis, 1)(peak); }},
    };
    std::vector<std::vector<double>> ll;
    for (const auto& c : chains) ll.emplace_back(c.cond_loglik.begin() + gc.n_burnin, c.cond_loglik.end());
    const double rhat = gelman_rubin(ll).value;
    ok &= rhat < kMaxRhat;
    os << "R-hat(cond loglik)=" << rhat << " (L=" << basis->rank() << "; parameters:";
    for (const auto& [name, f] : stats) {
        std::vector<std::vector<double>> tr;
        for (const auto& c : chains) {
            tr.emplace_back();
            for (const auto& d : c.draws) tr.back().push_back(f(d));
        }
        os << " " << name << "=" << gelman_rubin(tr).value;
    }
    os << ")";

    // PPC on data drawn from the model itself
    {
        Rng rng(44);
        const Index N = 50, P = 2, L = basis->rank(), Le = basis->rank_eta();
        Eigen::MatrixXd X(N, P);
        X.col(0).setOnes();
        X.col(1) = normal_matrix(N, 1, rng);
        ParameterState<double> truth_state;
        truth_state.alpha = normal_matrix(P, 1, rng, 0.5).col(0);
        truth_state.theta_beta = normal_matrix(P, L, rng, 0.3);
        truth_state.theta_eta = normal_matrix(N, Le, rng, 0.7);
        const double sigma = 1.5;
        const Eigen::MatrixXd C = X * truth_state.theta_beta + sigma * normal_matrix(N, L, rng);
        Eigen::MatrixXd Y = C * basis->loading().transpose() + truth_state.theta_eta * basis->loading_eta().transpose();
        Y.colwise() += X * truth_state.alpha;
        const auto tm = transform_responses<double>(Y, X, basis, MemoryMode::RetainResponses);
        const auto mc = run_gibbs(tm, sh.cfg.prior(), gc);
        PPCOptions po = sh.cfg.ppc();
        const auto ppc = ppc_from_states(pooled_draws(mc), tm, po);
        const double cov = ppc.envelope_coverage();
        ok &= cov >= kMinPpc;
        os << "; PPC envelope coverage=" << cov << " (" << po.bins << " bins, " << po.n_rep << " replicates)";
    }

    // basis selection on the simulation configuration
    os << "; selected L:";
    for (Index k = 0; k < Index(sh.scenarios.size()); ++k) {
        const Index L = sh.L_for(k);
        ok &= L >= kMinL && L <= kMaxL;
        os << " " << sh.scenarios[std::size_t(k)].label() << "->" << L;
    }
    return {ok, os.str()};
}

Outcome criterion7(Shared& sh) {
    auto sc = sh.scenarios[std::size_t(sh.scenario_index(50, 2.0))];
    std::vector<Dataset<double>> sites;
    for (std::uint64_t k = 0; k < 3; ++k) {
        sc.seed = derive_seed(sh.cfg.seed(), 0x7369, k);
        sc.N = 60;
        sites.push_back(simulate_dataset(sc, 0));
    }
    FitOptions f = sh.cfg.fit();
    f.L = select_num_basis(sites[0], f.kernel, sh.cfg.select()).chosen_L;
    const std::vector<Method> methods{Method::SimbaGibbs, Method::SimbaVI, Method::GLM};
    const auto r = cross_site_pmse(sites, methods, f);
    std::ostringstream os;
    os << "L=" << f.L << " mean out-of-site PMSE:";
    std::vector<double> means;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        means.push_back(r.out_of_site_mean(m).mean());
        os << " " << method_name(methods[m]) << "=" << means.back();
    }
    return {means[0] <= means[2] && means[1] <= means[2], os.str()};
}

} // namespace

int main(int argc, char** argv) {
    Shared sh;
    sh.out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    std::vector<int> which{1, 2, 3, 4, 5, 6, 7};
    if (argc > 2) {
        which.clear();
        std::stringstream ss(argv[2]);
        for (std::string tok; std::getline(ss, tok, ',');) which.push_back(std::stoi(tok));
    }
    std::vector<std::pair<int, Outcome>> results;
    for (int c : which) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            switch (c) {
            case 1: o = criterion1(sh); break;
            case 2: o = criterion2(); break;
            case 3: o = criterion3(); break;
            case 4: o = criterion4(sh); break;
            case 5: o = criterion5(sh); break;
            case 6: o = criterion6(sh); break;
            case 7: o = criterion7(sh); break;
            default: o = {false, "unknown criterion"};
            }
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d: %s  %s [%.1f s]\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        results.emplace_back(c, o);
    }
    std::ostringstream summary;
    bool all = true;
    for (const auto& [c, o] : results) {
        summary << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "\n";
        all &= o.pass;
    }
    fs::create_directories(sh.out);
    write_text_atomic(sh.out / "acceptance.txt", summary.str());
    return all ? 0 : 1;
}
