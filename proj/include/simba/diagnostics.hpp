#pragma once

#include "simba/baselines.hpp"
#include "simba/gibbs.hpp"
#include "simba/summaries.hpp"
#include "simba/vi.hpp"

#include <functional>
#include <memory>

namespace simba {

struct RHat {
    double value = 1.0;
    bool degenerate = false;  // zero within-chain variance
};

// Split-chain potential scale reduction factor.
RHat gelman_rubin(const std::vector<std::vector<double>>& traces);

struct PPCResult {
    Eigen::VectorXd edges;       // bins + 1
    Eigen::VectorXd observed;    // density per bin
    Eigen::MatrixXd replicated;  // n_rep x bins
    Eigen::VectorXd rep_means;   // mean of each replicated data set
    double observed_mean = 0;

    Index bins() const { return observed.size(); }
    double bin_width() const { return edges(1) - edges(0); }
    Eigen::VectorXd centers() const { return 0.5 * (edges.head(bins()) + edges.tail(bins())); }
    // Fraction of bins whose observed density lies within the replicated min-max envelope.
    double envelope_coverage() const;
};

struct PPCOptions {
    Index n_rep = 150;
    Index bins = 512;
    std::uint64_t seed = 0;
};

// Histogram density on a fixed grid spanning [min, max] of `observed` widened by 10% each side.
Eigen::VectorXd histogram_density(const Eigen::MatrixXd& values, const Eigen::VectorXd& edges);

// Replicates from parameter states; missing theta_eta is drawn from its full conditional.
PPCResult ppc_from_states(const std::vector<ParameterState<double>>& states, const TransformedDataset<double>& tdata,
                          const PPCOptions& opt = {});
PPCResult ppc_from_vi(const VariationalState<double>& q, const TransformedDataset<double>& tdata,
                      const PPCOptions& opt = {});

enum class LoocvBackend { VI, GibbsShort };

struct LoocvOptions {
    LoocvBackend backend = LoocvBackend::VI;
    VIConfig vi{300, 1e-4, 0, true, false};
    GibbsConfig gibbs_short{500, 250, 1, 1, 0, false, true, false, false};
    PriorConfig prior;
    std::uint64_t seed = 0;
};

// Leave-one-participant-out predictive MSE using population terms only.
double loocv_pmse(const Matrix<double>& Y, const Matrix<double>& X,
                  std::shared_ptr<const BasisSystem<double>> basis, const LoocvOptions& opt = {});
double loocv_pmse(const Dataset<double>& data, const std::function<std::shared_ptr<const BasisSystem<double>>(Index)>& builder,
                  Index L, const LoocvOptions& opt = {});

struct SelectOptions {
    Index L_max = 600;
    Index max_candidates = 8;
    double lower_fraction = 0.80;
    double upper_fraction = 0.98;
    InducingStrategy strategy = InducingStrategy::FarthestPoint;
    std::uint64_t seed = 0;
    LoocvOptions loocv;
};

struct BasisSelection {
    Index chosen_L = 0;
    Index window_lo = 0, window_hi = 0;
    std::vector<Index> candidates;
    std::vector<double> pmse;
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd cumulative_fraction;
};

// Inclusive L range whose cumulative eigenvalue fraction lies in [lo, hi]; {0, -1} when empty.
std::pair<Index, Index> candidate_window(const Eigen::VectorXd& eigenvalues, double lo, double hi);
std::vector<Index> subsample_grid(Index lo, Index hi, Index max_points);
Index argmin_index(const std::vector<double>& values);

BasisSelection select_num_basis(const Dataset<double>& data, const KernelConfig& kernel,
                                const SelectOptions& opt = {});

enum class Method { SimbaGibbs, SimbaVI, GLM, BML };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct FitOptions {
    KernelConfig kernel;
    Index L = 100;
    Index L_eta = 0;
    std::uint64_t seed = 0;
    PriorConfig prior;
    GibbsConfig gibbs;
    VIConfig vi;
    BMLOptions bml;
};

// Population-level coefficient surfaces (J+1) x V of a fitted model.
Eigen::MatrixXd population_surfaces(const Dataset<double>& train, Method method, const FitOptions& opt,
                                    std::shared_ptr<const BasisSystem<double>> basis = nullptr);

struct CrossSiteResult {
    std::vector<Method> methods;
    std::vector<Eigen::MatrixXd> pmse;  // per method, train x test; diagonal is in-sample
    Eigen::VectorXd out_of_site_mean(std::size_t method_index) const;
};

CrossSiteResult cross_site_pmse(const std::vector<Dataset<double>>& sites, const std::vector<Method>& methods,
                                const FitOptions& opt);

} // namespace simba
