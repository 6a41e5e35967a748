#include "simba/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace simba {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string provenance_header(const Provenance& prov) {
    return "# config_hash " + prov.config_hash + "\n# seed " + std::to_string(prov.seed) + "\n";
}

void write_binary_atomic(const fs::path& path, const std::vector<char>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    write_binary_atomic(path, std::vector<char>(content.begin(), content.end()));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(const std::string& tok, const std::string& where) {
    double v = 0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    if (!tok.empty() && *b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) throw DataError(where + ": cannot parse number '" + tok + "'");
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value '" + tok + "'");
    return v;
}

std::string context(const fs::path& p, int line) { return p.string() + ":" + std::to_string(line); }

bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
    const std::string e = p.extension().string();
    for (const char* x : exts)
        if (e == x) return true;
    return false;
}

} // namespace

MaskGrid read_mask_text(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    int lineno = 0;
    MaskGrid m;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (m.dims.empty()) {
            int d;
            while (ls >> d) m.dims.push_back(d);
            if (m.dims.empty() || m.dims.size() > 3 || !ls.eof())
                throw DataError(context(path, lineno) + ": expected 1 to 3 grid dimensions");
            for (int d2 : m.dims)
                if (d2 <= 0) throw DataError(context(path, lineno) + ": grid dimensions must be positive");
            continue;
        }
        std::string tok;
        Index in_row = 0;
        while (ls >> tok) {
            if (tok != "0" && tok != "1") throw DataError(context(path, lineno) + ": mask entries must be 0 or 1");
            m.inside.push_back(tok == "1");
            ++in_row;
        }
        if (in_row != m.dims.back())
            throw DataError(context(path, lineno) + ": expected " + std::to_string(m.dims.back()) +
                            " entries, found " + std::to_string(in_row));
    }
    if (m.dims.empty()) throw DataError(path.string() + ": empty mask file");
    if (Index(m.inside.size()) != m.cells())
        throw DataError(path.string() + ": mask has " + std::to_string(m.inside.size()) + " cells, dims imply " +
                        std::to_string(m.cells()));
    return m;
}

std::string mask_to_text(const MaskGrid& mask) {
    std::string out;
    for (std::size_t k = 0; k < mask.dims.size(); ++k) out += (k ? " " : "") + std::to_string(mask.dims[k]);
    out += '\n';
    const int w = mask.dims.back();
    for (std::size_t c = 0; c < mask.inside.size(); ++c) {
        out += mask.inside[c] ? '1' : '0';
        out += (c + 1) % std::size_t(w) == 0 ? '\n' : ' ';
    }
    return out;
}

Table read_table(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    int lineno = 0;
    Table t;
    char sep = ',';
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        if (t.header.empty()) {
            sep = line.find('\t') != std::string::npos ? '\t' : ',';
            t.header = split(line, sep);
            continue;
        }
        const auto toks = split(line, sep);
        if (toks.size() != t.header.size())
            throw DataError(context(path, lineno) + ": expected " + std::to_string(t.header.size()) +
                            " columns, found " + std::to_string(toks.size()));
        std::vector<double> row;
        for (const auto& tok : toks) row.push_back(parse_number(tok, context(path, lineno)));
        rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(path.string() + ": missing header row");
    t.values.resize(Index(rows.size()), Index(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(Index(r), Index(c)) = rows[r][c];
    return t;
}

std::string table_to_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
    out += '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        for (Index c = 0; c < values.cols(); ++c) {
            if (c) out += ',';
            out += format_double(values(r, c));
        }
        out += '\n';
    }
    return out;
}

Eigen::VectorXd read_flat_values(const fs::path& path, Index expected) {
    std::istringstream in(read_text(path));
    std::string line, tok;
    int lineno = 0;
    std::vector<double> vals;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        std::istringstream ls(line);
        while (ls >> tok) vals.push_back(parse_number(tok, context(path, lineno)));
    }
    if (Index(vals.size()) != expected)
        throw DataError(path.string() + ": expected " + std::to_string(expected) + " in-mask values, found " +
                        std::to_string(vals.size()));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), Index(vals.size()));
}

void ensure_intercept(Table& t) {
    Index found = -1;
    for (Index c = 0; c < Index(t.header.size()); ++c) {
        std::string h = t.header[std::size_t(c)];
        std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (h == "intercept" || h == "(intercept)" || (t.values.rows() > 0 && (t.values.col(c).array() == 1.0).all())) {
            found = c;
            break;
        }
    }
    if (found == 0) return;
    Eigen::MatrixXd v(t.values.rows(), found < 0 ? t.values.cols() + 1 : t.values.cols());
    std::vector<std::string> h;
    if (found < 0) {
        v.col(0).setOnes();
        v.rightCols(t.values.cols()) = t.values;
        h.push_back("intercept");
        h.insert(h.end(), t.header.begin(), t.header.end());
    } else {
        if ((t.values.col(found).array() != 1.0).any())
            throw DataError("covariates: column '" + t.header[std::size_t(found)] + "' is not all ones");
        v.col(0) = t.values.col(found);
        h.push_back(t.header[std::size_t(found)]);
        for (Index c = 0, k = 1; c < t.values.cols(); ++c) {
            if (c == found) continue;
            v.col(k++) = t.values.col(c);
            h.push_back(t.header[std::size_t(c)]);
        }
    }
    t.values = std::move(v);
    t.header = std::move(h);
}

SpatialDomain<double> load_domain(const fs::path& domain) {
#ifdef SIMBA_WITH_NIFTI
    if (has_ext(domain, {".nii"})) {
        const NiftiVolume vol = read_nifti(domain);
        MaskGrid m;
        m.dims = vol.dims;
        m.inside.resize(vol.data.size());
        for (std::size_t k = 0; k < vol.data.size(); ++k) m.inside[k] = vol.data[k] != 0;
        return SpatialDomain<double>::from_mask(m);
    }
#else
    if (has_ext(domain, {".nii"})) throw DataError(domain.string() + ": NIfTI support was disabled at build time");
#endif
    if (has_ext(domain, {".csv", ".tsv"})) {
        const Table t = read_table(domain);
        try {
            return SpatialDomain<double>::from_coordinates(t.values);
        } catch (const DataError& e) {
            throw DataError(domain.string() + ": " + e.what());
        }
    }
    return SpatialDomain<double>::from_mask(read_mask_text(domain));
}

Dataset<double> load_dataset(const fs::path& responses, const fs::path& covariates, const fs::path& domain) {
    Dataset<double> d;
    d.domain = load_domain(domain);
    const Index V = d.domain.size();
    if (has_ext(responses, {".csv", ".tsv"})) {
        Table t = read_table(responses);
        if (t.values.cols() != V)
            throw DataError(responses.string() + ": " + std::to_string(t.values.cols()) +
                            " response columns but the domain has " + std::to_string(V) + " voxels");
        d.Y = std::move(t.values);
    } else {
        std::istringstream in(read_text(responses));
        std::string line;
        std::vector<Eigen::VectorXd> rows;
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            fs::path p(line);
            if (p.is_relative()) p = responses.parent_path() / p;
            if (has_ext(p, {".nii"})) {
#ifdef SIMBA_WITH_NIFTI
                const NiftiVolume vol = read_nifti(p);
                if (vol.dims != d.domain.mask_shape())
                    throw DataError(p.string() + ": volume dims do not match the mask volume");
                Eigen::VectorXd y(V);
                for (Index v = 0; v < V; ++v) y(v) = vol.data[std::size_t(d.domain.grid_cells()[std::size_t(v)])];
                if (!y.allFinite()) throw DataError(p.string() + ": non-finite in-mask value");
                rows.push_back(std::move(y));
#else
                throw DataError(p.string() + ": NIfTI support was disabled at build time");
#endif
            } else {
                rows.push_back(read_flat_values(p, V));
            }
        }
        d.Y.resize(Index(rows.size()), V);
        for (std::size_t i = 0; i < rows.size(); ++i) d.Y.row(Index(i)) = rows[i].transpose();
    }
    Table x = read_table(covariates);
    if (x.values.rows() != d.Y.rows())
        throw DataError(covariates.string() + ": " + std::to_string(x.values.rows()) + " covariate rows but " +
                        std::to_string(d.Y.rows()) + " participants");
    ensure_intercept(x);
    d.X = std::move(x.values);
    d.covariate_names = std::move(x.header);
    d.validate();
    return d;
}

MaskGrid mask_of(const SpatialDomain<double>& domain) {
    if (!domain.has_grid()) throw DataError("domain has no mask grid");
    MaskGrid m;
    m.dims = domain.mask_shape();
    m.inside.assign(std::size_t(m.cells()), 0);
    for (Index c : domain.grid_cells()) m.inside[std::size_t(c)] = 1;
    return m;
}

void save_dataset(const fs::path& dir, const Dataset<double>& data, const Provenance& prov,
                  const std::optional<MaskGrid>& mask) {
    fs::create_directories(dir);
    const MaskGrid m = mask ? *mask : mask_of(data.domain);
    write_text_atomic(dir / "mask.txt", provenance_header(prov) + mask_to_text(m));
    std::vector<std::string> vh;
    for (Index v = 0; v < data.v(); ++v) vh.push_back("v" + std::to_string(v));
    write_text_atomic(dir / "responses.csv", provenance_header(prov) + table_to_csv(vh, data.Y));
    std::vector<std::string> xh;
    for (Index j = 0; j < data.p(); ++j) xh.push_back(data.covariate_name(j));
    write_text_atomic(dir / "covariates.csv", provenance_header(prov) + table_to_csv(xh, data.X));
}

namespace {

const std::vector<std::string> kMapFields = {"mean", "lower", "upper", "p_plus", "e_s", "active"};

} // namespace

MapFile make_map_file(const std::vector<EffectMap>& maps, const SpatialDomain<double>& domain,
                      const Provenance& prov) {
    MapFile f;
    f.meta["config_hash"] = prov.config_hash;
    f.meta["seed"] = std::to_string(prov.seed);
    if (!maps.empty()) {
        f.meta["threshold"] = format_double(maps.front().threshold);
        f.meta["level"] = format_double(maps.front().level);
        f.meta["converged"] = maps.front().converged ? "true" : "false";
    }
    for (const auto& m : maps) {
        if (m.size() != domain.size()) throw DataError("map '" + m.covariate + "' does not match the domain size");
        f.covariates.push_back(m.covariate);
    }
    f.fields = kMapFields;
    f.mask_shape = domain.mask_shape();
    f.voxel_ids = domain.voxel_ids();
    f.cells = domain.grid_cells();
    f.coords = domain.coords();
    f.maps = maps;
    return f;
}

std::string map_file_to_text(const MapFile& f) {
    std::string out = "# simba-map " + std::to_string(f.version) + "\n";
    out += "# V " + std::to_string(f.size()) + "\n";
    out += "# d " + std::to_string(f.coords.cols()) + "\n";
    out += "# mask_shape";
    for (int d : f.mask_shape) out += " " + std::to_string(d);
    out += "\n# covariates";
    for (const auto& c : f.covariates) out += " " + c;
    out += "\n# fields";
    for (const auto& c : f.fields) out += " " + c;
    out += "\n";
    for (const auto& [k, v] : f.meta) out += "# " + k + " " + v + "\n";
    out += "voxel_id";
    if (!f.cells.empty()) out += ",cell";
    for (Index k = 0; k < f.coords.cols(); ++k) out += ",c" + std::to_string(k);
    for (const auto& c : f.covariates)
        for (const auto& fld : f.fields) out += "," + c + "." + fld;
    out += "\n";
    for (Index v = 0; v < f.size(); ++v) {
        out += std::to_string(f.voxel_ids[std::size_t(v)]);
        if (!f.cells.empty()) out += "," + std::to_string(f.cells[std::size_t(v)]);
        for (Index k = 0; k < f.coords.cols(); ++k) out += "," + format_double(f.coords(v, k));
        for (const auto& m : f.maps) {
            out += "," + format_double(m.mean(v)) + "," + format_double(m.lower(v)) + "," +
                   format_double(m.upper(v)) + "," + format_double(m.p_plus(v)) + "," + format_double(m.e_s(v)) +
                   "," + (m.active(v) ? "1" : "0");
        }
        out += "\n";
    }
    return out;
}

MapFile parse_map_file(const std::string& text, const std::string& source) {
    MapFile f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    Index V = -1, d = -1;
    bool body = false;
    std::vector<std::string> columns;
    Index row = 0;
    auto where = [&] { return source + ":" + std::to_string(lineno); };
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!body && line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key, tok;
            ls >> key;
            std::vector<std::string> rest;
            while (ls >> tok) rest.push_back(tok);
            if (key == "simba-map") f.version = rest.empty() ? 0 : std::stoi(rest[0]);
            else if (key == "V") V = std::stoll(rest.at(0));
            else if (key == "d") d = std::stoll(rest.at(0));
            else if (key == "mask_shape")
                for (const auto& r : rest) f.mask_shape.push_back(std::stoi(r));
            else if (key == "covariates") f.covariates = rest;
            else if (key == "fields") f.fields = rest;
            else f.meta[key] = rest.empty() ? "" : rest[0];
            continue;
        }
        if (!body) {
            if (f.version != 1) throw DataError(source + ": unsupported map file version");
            if (V < 0 || d < 0) throw DataError(source + ": missing V or d header line");
            if (f.fields != kMapFields) throw DataError(source + ": unexpected field list");
            columns = split(line, ',');
            const bool has_cell = columns.size() > 1 && columns[1] == "cell";
            const std::size_t expect = 1 + (has_cell ? 1 : 0) + std::size_t(d) + f.covariates.size() * f.fields.size();
            if (columns.size() != expect) throw DataError(where() + ": header columns do not match the field list");
            f.voxel_ids.resize(std::size_t(V));
            if (has_cell) f.cells.resize(std::size_t(V));
            f.coords.resize(V, d);
            for (const auto& c : f.covariates) {
                EffectMap m = detail::empty_map(V, c, SummaryOptions{});
                m.active.resize(V);
                f.maps.push_back(std::move(m));
            }
            body = true;
            continue;
        }
        const auto toks = split(line, ',');
        if (toks.size() != columns.size()) throw DataError(where() + ": wrong number of columns");
        if (row >= V) throw DataError(where() + ": more rows than V");
        std::size_t k = 0;
        f.voxel_ids[std::size_t(row)] = std::stoll(toks[k++]);
        if (!f.cells.empty()) f.cells[std::size_t(row)] = std::stoll(toks[k++]);
        for (Index c = 0; c < d; ++c) f.coords(row, c) = parse_number(toks[k++], where());
        for (auto& m : f.maps) {
            m.mean(row) = parse_number(toks[k++], where());
            m.lower(row) = parse_number(toks[k++], where());
            m.upper(row) = parse_number(toks[k++], where());
            m.p_plus(row) = parse_number(toks[k++], where());
            m.e_s(row) = parse_number(toks[k++], where());
            m.active(row) = toks[k++] == "1";
        }
        ++row;
    }
    if (!body || row != V) throw DataError(source + ": expected " + std::to_string(V) + " rows, found " + std::to_string(row));
    const double thr = f.meta.count("threshold") ? std::stod(f.meta["threshold"]) : 0.95;
    const double lvl = f.meta.count("level") ? std::stod(f.meta["level"]) : 0.95;
    for (auto& m : f.maps) {
        m.threshold = thr;
        m.level = lvl;
        m.converged = f.meta["converged"] != "false";
    }
    return f;
}

void write_map_file(const fs::path& path, const MapFile& file) { write_text_atomic(path, map_file_to_text(file)); }

MapFile read_map_file(const fs::path& path) { return parse_map_file(read_text(path), path.string()); }

namespace {

constexpr char kDrawsMagic[8] = {'S', 'I', 'M', 'B', 'A', 'D', 'R', '1'};

template <typename T>
void put(std::vector<char>& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::string& source) {
    if (pos + sizeof(T) > in.size()) throw DataError(source + ": truncated draws file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

void write_draws(const fs::path& path, const std::vector<ChainOutput<double>>& chains, const std::string& header_json) {
    if (chains.empty() || chains.front().draws.empty()) throw DataError("write_draws: no draws to write");
    const auto& first = chains.front().draws.front();
    const std::int64_t P = first.alpha.size(), L = first.theta_beta.cols();
    std::vector<char> out(kDrawsMagic, kDrawsMagic + 8);
    put<std::uint64_t>(out, header_json.size());
    out.insert(out.end(), header_json.begin(), header_json.end());
    put<std::int64_t>(out, P);
    put<std::int64_t>(out, L);
    put<std::int64_t>(out, std::int64_t(chains.size()));
    put<std::int64_t>(out, std::int64_t(chains.front().draws.size()));
    for (const auto& c : chains) {
        put<std::int64_t>(out, std::int64_t(c.cond_loglik.size()));
        for (double v : c.cond_loglik) put(out, v);
        if (c.draws.size() != chains.front().draws.size()) throw DataError("write_draws: unequal chain lengths");
        for (const auto& s : c.draws) {
            for (Index j = 0; j < P; ++j) put(out, s.alpha(j));
            for (Index j = 0; j < P; ++j)
                for (Index l = 0; l < L; ++l) put(out, s.theta_beta(j, l));
            for (double v : {s.sigma2_alpha, s.sigma2_beta, s.sigma2_eta, s.sigma2_eps, s.a_alpha, s.a_beta, s.a_eta,
                             s.a_eps})
                put(out, v);
        }
    }
    write_binary_atomic(path, out);
}

DrawsArtifact read_draws(const fs::path& path) {
    const std::string in = read_text(path);
    const std::string src = path.string();
    if (in.size() < 8 || std::memcmp(in.data(), kDrawsMagic, 8) != 0) throw DataError(src + ": not a draws file");
    std::size_t pos = 8;
    const auto hlen = take<std::uint64_t>(in, pos, src);
    if (pos + hlen > in.size()) throw DataError(src + ": truncated draws header");
    DrawsArtifact a;
    a.header_json = in.substr(pos, hlen);
    pos += hlen;
    a.P = take<std::int64_t>(in, pos, src);
    a.L = take<std::int64_t>(in, pos, src);
    a.chains = take<std::int64_t>(in, pos, src);
    a.per_chain = take<std::int64_t>(in, pos, src);
    for (Index c = 0; c < a.chains; ++c) {
        const auto n = take<std::int64_t>(in, pos, src);
        std::vector<double> ll(static_cast<std::size_t>(n));
        for (auto& v : ll) v = take<double>(in, pos, src);
        a.cond_loglik.push_back(std::move(ll));
        for (Index d = 0; d < a.per_chain; ++d) {
            ParameterState<double> s;
            s.alpha.resize(a.P);
            s.theta_beta.resize(a.P, a.L);
            for (Index j = 0; j < a.P; ++j) s.alpha(j) = take<double>(in, pos, src);
            for (Index j = 0; j < a.P; ++j)
                for (Index l = 0; l < a.L; ++l) s.theta_beta(j, l) = take<double>(in, pos, src);
            for (double* v : {&s.sigma2_alpha, &s.sigma2_beta, &s.sigma2_eta, &s.sigma2_eps, &s.a_alpha, &s.a_beta,
                              &s.a_eta, &s.a_eps})
                *v = take<double>(in, pos, src);
            a.draws.push_back(std::move(s));
        }
    }
    if (pos != in.size()) throw DataError(src + ": trailing bytes in draws file");
    return a;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd json_matrix(const json& j) {
    const Index R = Index(j.size()), C = R ? Index(j[0].size()) : 0;
    Eigen::MatrixXd m(R, C);
    for (Index r = 0; r < R; ++r) {
        if (Index(j[std::size_t(r)].size()) != C) throw DataError("vstate: ragged matrix");
        for (Index c = 0; c < C; ++c) m(r, c) = j[std::size_t(r)][std::size_t(c)].get<double>();
    }
    return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vector(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
}

json ig_json(const IGFactor& f) { return {{"shape", f.shape}, {"rate", f.rate}}; }
IGFactor json_ig(const json& j) { return {j.at("shape").get<double>(), j.at("rate").get<double>()}; }

} // namespace

std::string vstate_to_json(const VariationalState<double>& q, const std::string& header_json) {
    json j;
    j["header"] = header_json.empty() ? json::object() : json::parse(header_json);
    j["alpha_mean"] = vector_json(q.alpha_mean);
    j["alpha_var"] = vector_json(q.alpha_var);
    j["beta_mean"] = matrix_json(q.beta_mean);
    j["beta_var"] = vector_json(q.beta_var);
    j["eta_mean"] = matrix_json(q.eta_mean);
    j["eta_cov"] = matrix_json(q.eta_cov);
    j["sigma2_alpha"] = ig_json(q.sigma2_alpha);
    j["sigma2_beta"] = ig_json(q.sigma2_beta);
    j["sigma2_eta"] = ig_json(q.sigma2_eta);
    j["sigma2_eps"] = ig_json(q.sigma2_eps);
    j["a_alpha"] = ig_json(q.a_alpha);
    j["a_beta"] = ig_json(q.a_beta);
    j["a_eta"] = ig_json(q.a_eta);
    j["a_eps"] = ig_json(q.a_eps);
    return j.dump() + "\n";
}

VariationalState<double> vstate_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        VariationalState<double> q;
        q.alpha_mean = json_vector(j.at("alpha_mean"));
        q.alpha_var = json_vector(j.at("alpha_var"));
        q.beta_mean = json_matrix(j.at("beta_mean"));
        q.beta_var = json_vector(j.at("beta_var"));
        q.eta_mean = json_matrix(j.at("eta_mean"));
        q.eta_cov = json_matrix(j.at("eta_cov"));
        q.sigma2_alpha = json_ig(j.at("sigma2_alpha"));
        q.sigma2_beta = json_ig(j.at("sigma2_beta"));
        q.sigma2_eta = json_ig(j.at("sigma2_eta"));
        q.sigma2_eps = json_ig(j.at("sigma2_eps"));
        q.a_alpha = json_ig(j.at("a_alpha"));
        q.a_beta = json_ig(j.at("a_beta"));
        q.a_eta = json_ig(j.at("a_eta"));
        q.a_eps = json_ig(j.at("a_eps"));
        return q;
    } catch (const json::exception& e) {
        throw DataError(std::string("vstate: ") + e.what());
    }
}

} // namespace simba
