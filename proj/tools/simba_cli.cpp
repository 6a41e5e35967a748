#include "simba/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace simba;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
    std::string out = "out";
};

struct DataArgs {
    std::string responses, covariates, domain;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "key=value configuration file");
    cmd->add_option("--set", c.overrides, "override a configuration key (key=value)");
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--out", c.out, "output directory or path prefix");
}

void add_data(CLI::App* cmd, DataArgs& d, bool required) {
    auto* r = cmd->add_option("--responses", d.responses, "dense CSV/TSV or list of per-participant files");
    auto* x = cmd->add_option("--covariates", d.covariates, "covariate CSV with header");
    auto* m = cmd->add_option("--domain", d.domain, "mask grid, coordinate CSV or NIfTI mask");
    if (required) {
        r->required();
        x->required();
        m->required();
    }
}

StudyConfig make_config(const Common& c) {
    StudyConfig cfg = c.config.empty() ? StudyConfig() : StudyConfig::load(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed >= 0) cfg.set("seed", std::to_string(c.seed));
    return StudyConfig::parse(cfg.canonical(), "<resolved config>");
}

Provenance provenance(const StudyConfig& cfg) { return {cfg.hash(), cfg.seed()}; }

std::string abs_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); }

json kernel_json(const KernelConfig& k) {
    return {{"nu", k.nu}, {"length_scale", k.length_scale}, {"nugget", k.nugget}};
}

KernelConfig kernel_from_json(const json& j) {
    KernelConfig k;
    k.nu = j.at("nu").get<double>();
    k.length_scale = j.at("length_scale").get<double>();
    k.nugget = j.at("nugget").get<double>();
    return k;
}

std::string text_with_header(const Provenance& prov, const std::string& body) {
    return provenance_header(prov) + body;
}

// Rebuilds the basis recorded in an artifact header.
std::shared_ptr<const BasisSystem<double>> basis_from_header(const json& h, const SpatialDomain<double>& domain) {
    const auto strategy =
        h.value("inducing", std::string("farthest")) == "random" ? InducingStrategy::UniformRandom
                                                                  : InducingStrategy::FarthestPoint;
    return std::make_shared<const BasisSystem<double>>(build_basis_system(
        domain, kernel_from_json(h.at("kernel")), h.at("L").get<Index>(), h.at("L_eta").get<Index>(),
        h.at("basis_seed").get<std::uint64_t>(), strategy));
}

void write_effects(const fs::path& path, const std::vector<EffectMap>& maps, const SpatialDomain<double>& domain,
                   const Provenance& prov) {
    write_map_file(path, make_map_file(maps, domain, prov));
    std::fprintf(stderr, "wrote %s\n", path.string().c_str());
}

int cmd_simulate(const Common& c, Index scenario, Index replicates) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    const auto scen = cfg.scenarios();
    const fs::path out(c.out);
    fs::create_directories(out);
    std::string listing = "scenario,N,sigma_eps,replicate,dir\n";
    for (Index s = 0; s < Index(scen.size()); ++s) {
        if (scenario >= 0 && s != scenario) continue;
        for (Index r = 0; r < replicates; ++r) {
            const auto data = simulate_dataset(scen[std::size_t(s)], r);
            const std::string dir = "scenario" + std::to_string(s) + "_rep" + std::to_string(r);
            save_dataset(out / dir, data, prov);
            std::ostringstream row;
            row << s << ',' << scen[std::size_t(s)].N << ',' << scen[std::size_t(s)].sigma_eps << ',' << r << ','
                << dir << '\n';
            listing += row.str();
            std::fprintf(stderr, "simulated %s\n", (out / dir).string().c_str());
        }
    }
    const Truth& t = scen.front().truth;
    std::vector<EffectMap> truth_maps;
    for (Index j = 0; j < t.beta.rows(); ++j) {
        EffectMap m = detail::empty_map(t.beta.cols(), j == 0 ? "intercept" : "x1", cfg.summary());
        m.mean = m.lower = m.upper = t.beta.row(j).transpose();
        m.e_s = t.beta.row(j).transpose().array().sign();
        m.p_plus = 0.5 * (1.0 + m.e_s.array());
        m.set_threshold(0.5);
        truth_maps.push_back(std::move(m));
    }
    write_effects(out / "truth.map", truth_maps, scen.front().domain, prov);
    write_text_atomic(out / "scenarios.csv", text_with_header(prov, listing));
    return 0;
}

int cmd_select(const Common& c, const DataArgs& d) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    const auto data = load_dataset(d.responses, d.covariates, d.domain);
    const auto sel = select_num_basis(data, cfg.kernel(), cfg.select());
    const fs::path out(c.out);
    std::string csv = "L,pmse\n";
    for (std::size_t k = 0; k < sel.candidates.size(); ++k)
        csv += std::to_string(sel.candidates[k]) + "," + format_double(sel.pmse[k]) + "\n";
    write_text_atomic(out / "pmse.csv", text_with_header(prov, csv));
    std::string summary = "chosen_L " + std::to_string(sel.chosen_L) + "\nwindow " + std::to_string(sel.window_lo) +
                          " " + std::to_string(sel.window_hi) + "\n";
    write_text_atomic(out / "selection.txt", text_with_header(prov, summary));
    std::cout << sel.chosen_L << "\n";
    return 0;
}

int cmd_fit(const Common& c, const DataArgs& d, std::string method_name_arg) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    const Method method = method_name_arg.empty() ? cfg.method() : parse_method(method_name_arg);
    const auto data = load_dataset(d.responses, d.covariates, d.domain);
    const fs::path out(c.out);
    fs::create_directories(out);
    FitOptions f = cfg.fit();
    f.gibbs.verbose = true;
    const SummaryOptions summary = cfg.summary();

    json h = {{"method", method_name(method)},
              {"config_hash", prov.config_hash},
              {"seed", prov.seed},
              {"responses", abs_path(d.responses)},
              {"covariates", abs_path(d.covariates)},
              {"domain", abs_path(d.domain)},
              {"covariate_names", data.covariate_names}};
    std::ostringstream timing;
    timing << provenance_header(prov) << "method " << method_name(method) << "\nN " << data.n() << "\nV "
           << data.v() << "\n";
    const auto t0 = std::chrono::steady_clock::now();

    if (method == Method::GLM) {
        write_effects(out / "effects.map", glm_fit(data, summary.level).effect_maps(summary.threshold), data.domain,
                      prov);
    } else if (method == Method::BML) {
        BMLOptions b = f.bml;
        const auto r = bml_fit(data, f.gibbs, b);
        write_effects(out / "effects.map", r.maps, data.domain, prov);
        for (std::size_t k = 0; k < r.chains.size(); ++k)
            timing << "chain " << k << " seconds_per_1000 " << r.chains[k].seconds_per_1000 << "\n";
    } else {
        if (cfg.auto_L()) {
            f.L = select_num_basis(data, f.kernel, cfg.select()).chosen_L;
            std::fprintf(stderr, "selected L=%ld\n", long(f.L));
        }
        auto basis = std::make_shared<const BasisSystem<double>>(
            build_basis_system(data.domain, f.kernel, f.L, f.L_eta, f.seed, cfg.inducing()));
        h["kernel"] = kernel_json(f.kernel);
        h["L"] = f.L;
        h["L_eta"] = f.L_eta;
        h["basis_seed"] = f.seed;
        h["inducing"] = cfg.get("basis.inducing");
        timing << "L " << basis->rank() << "\nL_eta " << basis->rank_eta() << "\n";
        const auto t = transform_dataset(data, basis);
        if (method == Method::SimbaGibbs) {
            const auto chains = run_gibbs(t, f.prior, f.gibbs);
            write_draws(out / "draws.bin", chains, h.dump());
            write_effects(out / "effects.map", summarize_gibbs(pooled_draws(chains), *basis, summary,
                                                               data.covariate_names),
                          data.domain, prov);
            for (const auto& ch : chains)
                timing << "chain " << ch.chain_id << " seconds_per_1000 " << ch.seconds_per_1000 << "\n";
        } else {
            const auto r = run_vi(t, f.prior, f.vi);
            h["iterations"] = r.iterations;
            h["converged"] = r.converged;
            write_text_atomic(out / "vstate.json", vstate_to_json(r.state, h.dump()));
            write_effects(out / "effects.map",
                          summarize_vi(r.state, *basis, summary, data.covariate_names, r.converged), data.domain,
                          prov);
            timing << "vi_iterations " << r.iterations << "\nconverged " << (r.converged ? "true" : "false") << "\n";
            if (!r.converged) std::fprintf(stderr, "warning: VI did not converge in %ld sweeps\n", long(r.iterations));
        }
    }
    timing << "seconds_total " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
           << "\n";
    write_text_atomic(out / "timing.txt", timing.str());
    std::cerr << timing.str();
    return 0;
}

json artifact_header(const std::string& draws, const std::string& vstate, DrawsArtifact* art,
                     VariationalState<double>* q) {
    if (!draws.empty()) {
        *art = read_draws(draws);
        return json::parse(art->header_json);
    }
    if (vstate.empty()) throw ConfigError("need --draws or --vstate (missing prerequisite artifact)");
    const std::string text = read_text(vstate);
    *q = vstate_from_json(text);
    return json::parse(text).at("header");
}

int cmd_summarize(const Common& c, const std::string& draws, const std::string& vstate, std::string domain_path) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    DrawsArtifact art;
    VariationalState<double> q;
    const json h = artifact_header(draws, vstate, &art, &q);
    if (domain_path.empty()) domain_path = h.at("domain").get<std::string>();
    const auto domain = load_domain(domain_path);
    const auto basis = basis_from_header(h, domain);
    const auto names = h.at("covariate_names").get<std::vector<std::string>>();
    const auto maps = draws.empty() ? summarize_vi(q, *basis, cfg.summary(), names, h.value("converged", true))
                                    : summarize_gibbs(art.draws, *basis, cfg.summary(), names);
    write_effects(fs::path(c.out) / "effects.map", maps, domain, prov);
    return 0;
}

std::vector<char> ppc_plot(const PPCResult& p, int width = 512, int height = 256) {
    Raster r;
    r.rows = height;
    r.cols = width;
    r.rgb.assign(std::size_t(width) * height * 3, 255);
    double ymax = p.observed.maxCoeff();
    if (p.replicated.size()) ymax = std::max(ymax, p.replicated.maxCoeff());
    if (!(ymax > 0)) ymax = 1;
    auto row_of = [&](double y) { return std::clamp(int(std::lround((1 - y / ymax) * (height - 1))), 0, height - 1); };
    auto paint = [&](int rr, int cc, std::uint8_t v) {
        for (int k = 0; k < 3; ++k) r.rgb[(std::size_t(rr) * width + cc) * 3 + k] = v;
    };
    for (int cc = 0; cc < width; ++cc) {
        const Index b = std::min<Index>(p.bins() - 1, Index(cc) * p.bins() / width);
        if (p.replicated.rows() > 0) {
            const int lo = row_of(p.replicated.col(b).minCoeff()), hi = row_of(p.replicated.col(b).maxCoeff());
            for (int rr = hi; rr <= lo; ++rr) paint(rr, cc, 190);
        }
        paint(row_of(p.observed(b)), cc, 0);
    }
    return raster_to_ppm(r);
}

int cmd_diagnose(const Common& c, const std::string& draws, const std::string& vstate, bool skip_ppc) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    DrawsArtifact art;
    VariationalState<double> q;
    const json h = artifact_header(draws, vstate, &art, &q);
    const fs::path out(c.out);
    fs::create_directories(out);

    if (!draws.empty()) {
        std::string csv = "parameter,rhat,degenerate\n";
        auto add = [&](const std::string& name, const std::function<double(const ParameterState<double>&)>& get) {
            std::vector<std::vector<double>> traces(std::size_t(art.chains));
            for (Index ch = 0; ch < art.chains; ++ch)
                for (Index k = 0; k < art.per_chain; ++k)
                    traces[std::size_t(ch)].push_back(get(art.draws[std::size_t(ch * art.per_chain + k)]));
            const RHat r = gelman_rubin(traces);
            csv += name + "," + format_double(r.value) + "," + (r.degenerate ? "1" : "0") + "\n";
        };
        if (art.chains >= 2 && art.per_chain >= 10) {
            for (Index j = 0; j < art.P; ++j) {
                add("alpha" + std::to_string(j), [j](const auto& s) { return s.alpha(j); });
                for (Index l = 0; l < std::min<Index>(art.L, 5); ++l)
                    add("theta_beta" + std::to_string(j) + "_" + std::to_string(l),
                        [j, l](const auto& s) { return s.theta_beta(j, l); });
            }
            add("sigma2_alpha", [](const auto& s) { return s.sigma2_alpha; });
            add("sigma2_beta", [](const auto& s) { return s.sigma2_beta; });
            add("sigma2_eta", [](const auto& s) { return s.sigma2_eta; });
            add("sigma2_eps", [](const auto& s) { return s.sigma2_eps; });
        } else {
            std::fprintf(stderr, "R-hat needs at least 2 chains of 10 draws; table left empty\n");
        }
        write_text_atomic(out / "rhat.csv", text_with_header(prov, csv));
    }
    if (skip_ppc) return 0;

    const auto data = load_dataset(h.at("responses").get<std::string>(), h.at("covariates").get<std::string>(),
                                   h.at("domain").get<std::string>());
    const auto basis = basis_from_header(h, data.domain);
    const auto t = transform_dataset(data, basis, MemoryMode::RetainResponses);
    const PPCResult p = draws.empty() ? ppc_from_vi(q, t, cfg.ppc()) : ppc_from_states(art.draws, t, cfg.ppc());
    std::string csv = "center,observed,rep_min,rep_max,rep_mean\n";
    for (Index b = 0; b < p.bins(); ++b) {
        const bool any = p.replicated.rows() > 0;
        csv += format_double(p.centers()(b)) + "," + format_double(p.observed(b)) + "," +
               format_double(any ? p.replicated.col(b).minCoeff() : 0.0) + "," +
               format_double(any ? p.replicated.col(b).maxCoeff() : 0.0) + "," +
               format_double(any ? p.replicated.col(b).mean() : 0.0) + "\n";
    }
    write_text_atomic(out / "ppc.csv", text_with_header(prov, csv));
    write_binary_atomic(out / "ppc.ppm", ppc_plot(p));
    std::fprintf(stderr, "PPC envelope coverage %.3f\n", p.envelope_coverage());
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& truth, const std::string& maps,
                 const std::vector<std::string>& sites) {
    const StudyConfig cfg = make_config(c);
    const Provenance prov = provenance(cfg);
    const fs::path out(c.out);
    fs::create_directories(out);
    if (!truth.empty() || !maps.empty()) {
        if (truth.empty() || maps.empty()) throw ConfigError("evaluate needs both --truth and --maps");
        const MapFile t = read_map_file(truth), m = read_map_file(maps);
        if (t.size() != m.size()) throw DataError("evaluate: truth and estimate have different voxel counts");
        Eigen::MatrixXd beta(Index(t.maps.size()), t.size());
        for (std::size_t j = 0; j < t.maps.size(); ++j) beta.row(Index(j)) = t.maps[j].mean.transpose();
        const auto r = evaluate_replicate(beta, m.maps, cfg.summary().threshold);
        std::ostringstream os;
        os << "mse,tpr,fdr,coverage\n"
           << format_double(r.mse) << ',' << format_double(r.tpr) << ',' << format_double(r.fdr) << ','
           << format_double(r.coverage) << '\n';
        write_text_atomic(out / "metrics.csv", text_with_header(prov, os.str()));
        std::cout << os.str();
        return 0;
    }
    if (!sites.empty()) {
        std::vector<Dataset<double>> data;
        for (const auto& s : sites) {
            std::stringstream ss(s);
            std::string r, x, m;
            if (!std::getline(ss, r, ',') || !std::getline(ss, x, ',') || !std::getline(ss, m, ','))
                throw ConfigError("--site expects responses,covariates,domain");
            data.push_back(load_dataset(r, x, m));
        }
        const auto study = cfg.study();
        const auto res = cross_site_pmse(data, study.methods, cfg.fit());
        std::string csv = "method,train_site,test_site,pmse\n";
        for (std::size_t k = 0; k < res.methods.size(); ++k)
            for (Index a = 0; a < res.pmse[k].rows(); ++a)
                for (Index b = 0; b < res.pmse[k].cols(); ++b)
                    csv += method_name(res.methods[k]) + "," + std::to_string(a) + "," + std::to_string(b) + "," +
                           format_double(res.pmse[k](a, b)) + "\n";
        write_text_atomic(out / "cross_site_pmse.csv", text_with_header(prov, csv));
        std::cout << csv;
        return 0;
    }
    StudyOptions opt = cfg.study();
    opt.verbose = true;
    const auto table = run_study(cfg.scenarios(), opt);
    write_text_atomic(out / "metrics.csv", text_with_header(prov, table.to_csv()));
    write_text_atomic(out / "records.csv", text_with_header(prov, table.records_csv()));
    write_text_atomic(out / "table.txt", text_with_header(prov, table.to_text()));
    std::cout << table.to_text();
    return 0;
}

int cmd_render(const Common& c, const std::string& map_path, std::string covariate, const RenderOptions& ropt) {
    const MapFile f = read_map_file(map_path);
    if (f.maps.empty()) throw DataError(map_path + ": no maps");
    if (f.cells.empty()) throw DataError(map_path + ": map has no grid cells; rendering needs a mask grid");
    const EffectMap* m = &f.maps.back();
    if (!covariate.empty()) {
        m = nullptr;
        for (const auto& x : f.maps)
            if (x.covariate == covariate) m = &x;
        if (!m) throw ConfigError("render: no covariate '" + covariate + "' in " + map_path);
    }
    RenderOptions o = ropt;
    if (o.threshold < 0) o.threshold = m->threshold;
    const Raster r = render_map(*m, f.mask_shape, f.cells, o);
    fs::path prefix(c.out);
    write_binary_atomic(fs::path(prefix.string() + ".ppm"), raster_to_ppm(r));
    const Provenance prov{f.meta.count("config_hash") ? f.meta.at("config_hash") : "",
                          f.meta.count("seed") ? std::stoull(f.meta.at("seed")) : 0};
    write_text_atomic(fs::path(prefix.string() + ".csv"), text_with_header(prov, raster_to_csv(r)));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian image-on-scalar regression with low-rank Gaussian process priors"};
    app.require_subcommand(1);

    Common common;
    DataArgs data;
    std::string method, draws, vstate, domain_override, truth, maps, map_path, covariate;
    std::vector<std::string> sites;
    Index scenario = -1, replicates = 1;
    bool skip_ppc = false;
    RenderOptions ropt;
    ropt.threshold = -1;

    auto* sim = app.add_subcommand("simulate", "write simulated scenario datasets and truth maps");
    add_common(sim, common);
    sim->add_option("--scenario", scenario, "scenario index (default: all)");
    sim->add_option("--replicates", replicates, "replicates to write per scenario")->check(CLI::PositiveNumber);

    auto* sel = app.add_subcommand("select-basis", "choose L by leave-one-out predictive error");
    add_common(sel, common);
    add_data(sel, data, true);

    auto* fit = app.add_subcommand("fit", "fit a model and write artifacts and effect maps");
    add_common(fit, common);
    add_data(fit, data, true);
    fit->add_option("--method", method, "simba-gibbs | simba-vi | glm | bml");

    auto* sum = app.add_subcommand("summarize", "turn draws or a variational state into effect maps");
    add_common(sum, common);
    sum->add_option("--draws", draws);
    sum->add_option("--vstate", vstate);
    sum->add_option("--domain", domain_override);

    auto* diag = app.add_subcommand("diagnose", "R-hat table and posterior predictive check");
    add_common(diag, common);
    diag->add_option("--draws", draws);
    diag->add_option("--vstate", vstate);
    diag->add_flag("--no-ppc", skip_ppc);

    auto* eval = app.add_subcommand("evaluate", "simulation metrics table or cross-site PMSE");
    add_common(eval, common);
    eval->add_option("--truth", truth, "truth map file");
    eval->add_option("--maps", maps, "estimated effect map file");
    eval->add_option("--site", sites, "responses,covariates,domain of one site (repeat)");

    auto* ren = app.add_subcommand("render", "PPM raster and CSV grid of one effect map");
    add_common(ren, common);
    ren->add_option("--map", map_path)->required();
    ren->add_option("--covariate", covariate);
    ren->add_option("--axis", ropt.axis);
    ren->add_option("--slice", ropt.slice);
    ren->add_option("--vmax", ropt.vmax);
    ren->add_option("--threshold", ropt.threshold);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) return cmd_simulate(common, scenario, replicates);
        if (*sel) return cmd_select(common, data);
        if (*fit) return cmd_fit(common, data, method);
        if (*sum) return cmd_summarize(common, draws, vstate, domain_override);
        if (*diag) return cmd_diagnose(common, draws, vstate, skip_ppc);
        if (*eval) return cmd_evaluate(common, truth, maps, sites);
        if (*ren) return cmd_render(common, map_path, covariate, ropt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
