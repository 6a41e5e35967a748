#pragma once

#include "simba/diagnostics.hpp"

#include <array>
#include <optional>

namespace simba {

// Two maps, each a tapered disk and a tapered rectangle of opposite sign. Offsets and
// half-widths are in normalized coordinates, dims order (row axis first).
struct TruthConfig {
    double snr = 0.3;
    double sigma_ref = 2.0;
    double disk_radius = 0.13;
    std::array<double, 2> rect_half{0.09, 0.12};
    std::array<std::array<double, 2>, 2> disk_offset{{{-0.10, -0.20}, {0.10, 0.20}}};
    std::array<std::array<double, 2>, 2> rect_offset{{{-0.12, 0.20}, {0.12, -0.20}}};
    double jitter = 0.0;  // uniform perturbation of every center, seeded
    std::optional<double> amplitude;  // overrides SNR calibration

    void validate() const;
};

struct Truth {
    Eigen::MatrixXd beta;  // 2 x V
    double amplitude = 0;

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support() const { return beta.array() != 0.0; }
};

double taper(double u);
Truth make_truth(const SpatialDomain<double>& domain, const TruthConfig& cfg = {}, std::uint64_t seed = 0);

// Mean of beta^2 over each map's nonzero support, averaged over maps, divided by sigma^2.
double signal_to_noise(const Truth& truth, double sigma_eps);

enum class NoiseMode { IID, Correlated };

struct SimScenario {
    Index N = 50;
    double sigma_eps = 2.0;
    Index n_replicates = 20;
    NoiseMode noise = NoiseMode::IID;
    std::uint64_t seed = 0;
    SpatialDomain<double> domain;
    Truth truth;
    std::shared_ptr<const BasisSystem<double>> noise_basis;  // Correlated mode only

    std::string label() const;
};

// Desk-scale scenario grid on the phantom: (N, sigma) in {50, 200} x {2, 5}.
std::vector<SimScenario> default_scenarios(Index n_replicates = 20, std::uint64_t seed = 0,
                                           const TruthConfig& truth = {}, int phantom_size = 96);

Dataset<double> simulate_dataset(const SimScenario& scenario, Index replicate);

struct ReplicateMetrics {
    double mse = 0, tpr = 0, fdr = 0, coverage = 0;  // percent
};

ReplicateMetrics evaluate_replicate(const Eigen::MatrixXd& truth, const std::vector<EffectMap>& maps,
                                    double threshold = 0.95, Index first_map = 0);

struct StudyOptions {
    std::vector<Method> methods{Method::SimbaGibbs, Method::SimbaVI, Method::GLM, Method::BML};
    FitOptions fit;
    bool select_L = true;
    SelectOptions select;
    SummaryOptions summary;
    bool verbose = false;
};

struct ReplicateRecord {
    Index scenario = 0;
    Index replicate = 0;
    Method method = Method::GLM;
    Index L = 0;
    ReplicateMetrics metrics;
    double seconds = 0;
    std::string error;
};

struct MetricsRow {
    Index scenario = 0;
    Index N = 0;
    double sigma_eps = 0;
    Method method = Method::GLM;
    Index L = 0;
    Index n_ok = 0;
    ReplicateMetrics mean, sd;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::vector<ReplicateRecord> records;

    const MetricsRow* find(Index scenario, Method method) const;
    std::string to_csv() const;
    std::string records_csv() const;
    std::string to_text() const;
};

// Effect maps for covariates 0..J from one of the four methods.
std::vector<EffectMap> fit_effect_maps(const Dataset<double>& data, Method method, const FitOptions& opt,
                                       const SummaryOptions& summary,
                                       std::shared_ptr<const BasisSystem<double>> basis = nullptr);

MetricsTable aggregate(const std::vector<SimScenario>& scenarios, const std::vector<Method>& methods,
                       std::vector<ReplicateRecord> records);

MetricsTable run_study(const std::vector<SimScenario>& scenarios, const StudyOptions& opt);

} // namespace simba
