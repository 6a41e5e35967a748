#pragma once

#include "simba/gibbs.hpp"
#include "simba/summaries.hpp"

#include <optional>

namespace simba {

struct BHResult {
    Eigen::VectorXd adjusted;
    Eigen::Array<bool, Eigen::Dynamic, 1> reject;
};

// Benjamini-Hochberg step-up adjustment.
BHResult bh_adjust(const Eigen::VectorXd& p_values, double q = 0.05);

// Per-voxel OLS; all matrices are (J+1) x V.
struct GLMResult {
    Eigen::MatrixXd coef, se, t, p, p_adj, sign, e_s, lower, upper;
    Index df = 0;
    double level = 0.95;
    std::vector<std::string> names;

    std::vector<EffectMap> effect_maps(double threshold = 0.95) const;
};

GLMResult glm_fit(const Dataset<double>& data, double level = 0.95, double fdr_q = 0.05);

struct BMLOptions {
    double A = 100.0;
    double gamma_var = 1e4;
    std::optional<double> fixed_tau2;  // pins every tau2_j
    SummaryOptions summary;
};

struct BMLChainTrace {
    std::vector<double> cond_loglik;
    std::vector<double> sigma2_e, tau2_u;
    Eigen::MatrixXd tau2;  // iterations x (J+1)
    double seconds_per_1000 = 0;
};

struct BMLResult {
    std::vector<EffectMap> maps;
    Eigen::MatrixXd posterior_mean;  // (J+1) x V
    Eigen::VectorXd gamma_mean;
    std::vector<BMLChainTrace> chains;
};

// Exchangeable voxelwise hierarchical model: y_iv = x_i^T b_v + u_i + e_iv, b_jv ~ N(gamma_j, tau2_j).
BMLResult bml_fit(const Dataset<double>& data, const GibbsConfig& cfg, const BMLOptions& opt = {});

} // namespace simba
