#pragma once

#include "simba/simstudy.hpp"

#include <map>

namespace simba {

// Plain-text key=value configuration. Every key has a default; unknown keys and
// malformed values are rejected with the offending key in the message.
class StudyConfig {
public:
    StudyConfig();

    static StudyConfig parse(const std::string& text, const std::string& source = "<string>");
    static StudyConfig load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool has_key(const std::string& key) const { return values_.count(key) != 0; }

    double real(const std::string& key) const;
    Index integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::vector<Index> integers(const std::string& key) const;

    std::uint64_t seed() const;
    // Canonical sorted key=value text; the hash is FNV-1a over it.
    std::string canonical() const;
    std::string hash() const;

    KernelConfig kernel() const;
    PriorConfig prior() const;
    GibbsConfig gibbs() const;
    VIConfig vi() const;
    BMLOptions bml() const;
    SummaryOptions summary() const;
    PPCOptions ppc() const;
    SelectOptions select() const;
    FitOptions fit() const;
    TruthConfig truth() const;
    StudyOptions study() const;
    MemoryMode memory() const;
    InducingStrategy inducing() const;
    Method method() const;
    bool auto_L() const { return get("basis.L") == "auto"; }
    std::vector<SimScenario> scenarios() const;

private:
    std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& text);

} // namespace simba
