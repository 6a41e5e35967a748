#include "simba/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace simba {

namespace {

enum class Kind { Real, PositiveReal, Int, PositiveInt, IntOrAuto, RealOrAuto, Bool, Text, RealList, IntList, Choice };

struct KeySpec {
    Kind kind;
    std::string fallback;
    std::vector<std::string> choices = {};
};

const std::map<std::string, KeySpec>& key_table() {
    static const std::map<std::string, KeySpec> table = {
        {"seed", {Kind::Int, "0"}},
        {"kernel.family", {Kind::Choice, "matern", {"matern"}}},
        {"kernel.nu", {Kind::Choice, "1.5", {"0.5", "1.5", "2.5"}}},
        {"kernel.length_scale", {Kind::PositiveReal, "0.09"}},
        {"kernel.nugget", {Kind::Real, "1e-06"}},
        {"basis.L", {Kind::IntOrAuto, "100"}},
        {"basis.L_eta", {Kind::IntOrAuto, "auto"}},
        {"basis.L_max", {Kind::PositiveInt, "600"}},
        {"basis.max_candidates", {Kind::PositiveInt, "8"}},
        {"basis.lower_fraction", {Kind::PositiveReal, "0.8"}},
        {"basis.upper_fraction", {Kind::PositiveReal, "0.98"}},
        {"basis.inducing", {Kind::Choice, "farthest", {"farthest", "random"}}},
        {"inference.backend", {Kind::Choice, "simba-gibbs", {"simba-gibbs", "simba-vi", "glm", "bml"}}},
        {"inference.iterations", {Kind::PositiveInt, "5000"}},
        {"inference.burnin", {Kind::Int, "4000"}},
        {"inference.thin", {Kind::PositiveInt, "1"}},
        {"inference.chains", {Kind::PositiveInt, "3"}},
        {"inference.store_eta", {Kind::Bool, "false"}},
        {"inference.tol", {Kind::PositiveReal, "1e-06"}},
        {"inference.max_iter", {Kind::PositiveInt, "3000"}},
        {"loocv.backend", {Kind::Choice, "vi", {"vi", "gibbs"}}},
        {"loocv.tol", {Kind::PositiveReal, "0.0001"}},
        {"loocv.max_iter", {Kind::PositiveInt, "300"}},
        {"prior.A", {Kind::PositiveReal, "100"}},
        {"summary.threshold", {Kind::Real, "0.95"}},
        {"summary.level", {Kind::Real, "0.95"}},
        {"memory.retain_responses", {Kind::Bool, "false"}},
        {"output.dir", {Kind::Text, "."}},
        {"simulate.N", {Kind::IntList, "50,200"}},
        {"simulate.sigma", {Kind::RealList, "2,5"}},
        {"simulate.replicates", {Kind::PositiveInt, "20"}},
        {"simulate.noise", {Kind::Choice, "iid", {"iid", "correlated"}}},
        {"simulate.phantom_size", {Kind::PositiveInt, "96"}},
        {"truth.snr", {Kind::PositiveReal, "0.3"}},
        {"truth.sigma_ref", {Kind::PositiveReal, "2"}},
        {"truth.jitter", {Kind::Real, "0"}},
        {"truth.amplitude", {Kind::RealOrAuto, "auto"}},
        {"study.methods", {Kind::Text, "simba-gibbs,simba-vi,glm,bml"}},
        {"study.select_L", {Kind::Bool, "true"}},
        {"ppc.replicates", {Kind::PositiveInt, "150"}},
        {"ppc.bins", {Kind::PositiveInt, "512"}},
        {"bml.gamma_var", {Kind::PositiveReal, "10000"}},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

bool parse_real(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

bool parse_int(const std::string& s, Index& out) {
    try {
        std::size_t pos = 0;
        out = static_cast<Index>(std::stoll(s, &pos));
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

bool check(const KeySpec& spec, const std::string& v) {
    double d;
    Index i;
    switch (spec.kind) {
    case Kind::Real: return parse_real(v, d);
    case Kind::PositiveReal: return parse_real(v, d) && d > 0;
    case Kind::Int: return parse_int(v, i) && i >= 0;
    case Kind::PositiveInt: return parse_int(v, i) && i > 0;
    case Kind::IntOrAuto: return v == "auto" || (parse_int(v, i) && i > 0);
    case Kind::RealOrAuto: return v == "auto" || (parse_real(v, d) && d > 0);
    case Kind::Bool: return v == "true" || v == "false";
    case Kind::Text: return !v.empty();
    case Kind::RealList:
        for (const auto& x : split(v, ','))
            if (!parse_real(x, d) || d < 0) return false;
        return !v.empty();
    case Kind::IntList:
        for (const auto& x : split(v, ','))
            if (!parse_int(x, i) || i <= 0) return false;
        return !v.empty();
    case Kind::Choice: return std::find(spec.choices.begin(), spec.choices.end(), v) != spec.choices.end();
    }
    return false;
}

} // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

StudyConfig::StudyConfig() {
    for (const auto& [k, spec] : key_table()) values_[k] = spec.fallback;
}

void StudyConfig::set(const std::string& key, const std::string& value) {
    const auto it = key_table().find(key);
    if (it == key_table().end()) throw ConfigError("config: unknown key '" + key + "'");
    const std::string v = trim(value);
    if (!check(it->second, v)) throw ConfigError("config: invalid value '" + v + "' for key '" + key + "'");
    values_[key] = v;
}

StudyConfig StudyConfig::parse(const std::string& text, const std::string& source) {
    StudyConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError("config: expected key = value at " + where);
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " at " + where);
        }
    }
    cfg.kernel();
    cfg.gibbs();
    cfg.summary();
    cfg.select();
    if (cfg.real("truth.jitter") < 0) throw ConfigError("config: truth.jitter must be non-negative");
    for (const auto& m : split(cfg.get("study.methods"), ',')) parse_method(m);
    return cfg;
}

StudyConfig StudyConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

const std::string& StudyConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
    return it->second;
}

double StudyConfig::real(const std::string& key) const {
    double d = 0;
    if (!parse_real(get(key), d)) throw ConfigError("config: key '" + key + "' is not numeric");
    return d;
}

Index StudyConfig::integer(const std::string& key) const {
    Index i = 0;
    if (!parse_int(get(key), i)) throw ConfigError("config: key '" + key + "' is not an integer");
    return i;
}

bool StudyConfig::flag(const std::string& key) const { return get(key) == "true"; }

std::vector<double> StudyConfig::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : split(get(key), ',')) {
        double d = 0;
        if (!parse_real(s, d)) throw ConfigError("config: key '" + key + "' has a non-numeric entry");
        out.push_back(d);
    }
    return out;
}

std::vector<Index> StudyConfig::integers(const std::string& key) const {
    std::vector<Index> out;
    for (const auto& s : split(get(key), ',')) {
        Index i = 0;
        if (!parse_int(s, i)) throw ConfigError("config: key '" + key + "' has a non-integer entry");
        out.push_back(i);
    }
    return out;
}

std::uint64_t StudyConfig::seed() const { return static_cast<std::uint64_t>(integer("seed")); }

std::string StudyConfig::canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
    return os.str();
}

std::string StudyConfig::hash() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical());
    return os.str();
}

KernelConfig StudyConfig::kernel() const {
    KernelConfig k;
    k.nu = real("kernel.nu");
    k.length_scale = real("kernel.length_scale");
    k.nugget = real("kernel.nugget");
    k.validate();
    return k;
}

PriorConfig StudyConfig::prior() const {
    PriorConfig p;
    p.A = real("prior.A");
    p.validate();
    return p;
}

GibbsConfig StudyConfig::gibbs() const {
    GibbsConfig g;
    g.n_iter = integer("inference.iterations");
    g.n_burnin = integer("inference.burnin");
    g.thin = integer("inference.thin");
    g.n_chains = integer("inference.chains");
    g.store_eta = flag("inference.store_eta");
    g.seed = derive_seed(seed(), 0x6962);
    g.validate();
    return g;
}

VIConfig StudyConfig::vi() const {
    VIConfig v;
    v.max_iter = integer("inference.max_iter");
    v.tol = real("inference.tol");
    v.seed = derive_seed(seed(), 0x7669);
    v.validate();
    return v;
}

BMLOptions StudyConfig::bml() const {
    BMLOptions b;
    b.A = real("prior.A");
    b.gamma_var = real("bml.gamma_var");
    b.summary = summary();
    return b;
}

SummaryOptions StudyConfig::summary() const {
    SummaryOptions s;
    s.threshold = real("summary.threshold");
    s.level = real("summary.level");
    s.validate();
    return s;
}

PPCOptions StudyConfig::ppc() const {
    PPCOptions p;
    p.n_rep = integer("ppc.replicates");
    p.bins = integer("ppc.bins");
    p.seed = derive_seed(seed(), 0x7070);
    return p;
}

InducingStrategy StudyConfig::inducing() const {
    return get("basis.inducing") == "random" ? InducingStrategy::UniformRandom : InducingStrategy::FarthestPoint;
}

SelectOptions StudyConfig::select() const {
    SelectOptions s;
    s.L_max = integer("basis.L_max");
    s.max_candidates = integer("basis.max_candidates");
    s.lower_fraction = real("basis.lower_fraction");
    s.upper_fraction = real("basis.upper_fraction");
    if (!(s.lower_fraction < s.upper_fraction && s.upper_fraction <= 1))
        throw ConfigError("config: need 0 < basis.lower_fraction < basis.upper_fraction <= 1");
    s.strategy = inducing();
    s.seed = seed();
    s.loocv.backend = get("loocv.backend") == "gibbs" ? LoocvBackend::GibbsShort : LoocvBackend::VI;
    s.loocv.vi.tol = real("loocv.tol");
    s.loocv.vi.max_iter = integer("loocv.max_iter");
    s.loocv.prior = prior();
    s.loocv.seed = derive_seed(seed(), 0x6c6f);
    return s;
}

FitOptions StudyConfig::fit() const {
    FitOptions f;
    f.kernel = kernel();
    f.L = auto_L() ? 100 : integer("basis.L");
    f.L_eta = get("basis.L_eta") == "auto" ? 0 : integer("basis.L_eta");
    f.seed = seed();
    f.prior = prior();
    f.gibbs = gibbs();
    f.vi = vi();
    f.bml = bml();
    return f;
}

TruthConfig StudyConfig::truth() const {
    TruthConfig t;
    t.snr = real("truth.snr");
    t.sigma_ref = real("truth.sigma_ref");
    t.jitter = real("truth.jitter");
    if (get("truth.amplitude") != "auto") t.amplitude = real("truth.amplitude");
    t.validate();
    return t;
}

StudyOptions StudyConfig::study() const {
    StudyOptions s;
    s.methods.clear();
    for (const auto& m : split(get("study.methods"), ',')) s.methods.push_back(parse_method(m));
    s.fit = fit();
    s.select_L = flag("study.select_L");
    s.select = select();
    s.summary = summary();
    return s;
}

MemoryMode StudyConfig::memory() const {
    return flag("memory.retain_responses") ? MemoryMode::RetainResponses : MemoryMode::Compact;
}

Method StudyConfig::method() const { return parse_method(get("inference.backend")); }

std::vector<SimScenario> StudyConfig::scenarios() const {
    const auto domain = SpatialDomain<double>::from_mask(phantom_mask(int(integer("simulate.phantom_size"))));
    const Truth t = make_truth(domain, truth(), derive_seed(seed(), 0x7275));
    std::shared_ptr<const BasisSystem<double>> noise;
    if (get("simulate.noise") == "correlated") {
        const FitOptions f = fit();
        noise = std::make_shared<const BasisSystem<double>>(
            build_basis_system(domain, f.kernel, f.L, f.L_eta, f.seed, inducing()));
    }
    std::vector<SimScenario> out;
    std::uint64_t k = 0;
    for (Index N : integers("simulate.N"))
        for (double sigma : reals("simulate.sigma")) {
            SimScenario s;
            s.N = N;
            s.sigma_eps = sigma;
            s.n_replicates = integer("simulate.replicates");
            s.noise = noise ? NoiseMode::Correlated : NoiseMode::IID;
            s.noise_basis = noise;
            s.seed = derive_seed(seed(), 1, k++);
            s.domain = domain;
            s.truth = t;
            out.push_back(std::move(s));
        }
    return out;
}

} // namespace simba
