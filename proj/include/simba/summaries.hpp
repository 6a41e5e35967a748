#pragma once

#include "simba/gibbs.hpp"
#include "simba/parallel.hpp"
#include "simba/vi.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <numbers>
#include <string>

namespace simba {

struct SummaryOptions {
    double level = 0.95;
    double threshold = 0.95;

    void validate() const {
        if (!(level > 0 && level < 1)) throw ConfigError("summary.level must be in (0, 1)");
        if (!(threshold >= 0 && threshold < 1)) throw ConfigError("summary.threshold must be in [0, 1)");
    }
};

// Voxelwise summary of the combined effect alpha_j + beta_j(s).
struct EffectMap {
    std::string covariate;
    Eigen::VectorXd mean, lower, upper, p_plus, e_s;
    Eigen::Array<bool, Eigen::Dynamic, 1> active;
    double threshold = 0.95;
    double level = 0.95;
    bool converged = true;

    Index size() const { return mean.size(); }
    void set_threshold(double t) {
        threshold = t;
        active = e_s.array().abs() > t;
    }
};

double evidence_score(double p_value, int sign);
double evidence_from_pplus(double p_plus);

// 1-based nearest-rank index of quantile q among n sorted values.
inline Index nearest_rank(double q, Index n) {
    const auto k = static_cast<Index>(std::ceil(q * static_cast<double>(n) - 1e-9));
    return std::clamp<Index>(k, 1, n);
}

template <typename Scalar>
Vector<Scalar> reconstruct_effect(const ParameterState<Scalar>& draw, const BasisSystem<Scalar>& basis, Index j) {
    Vector<Scalar> out = basis.psi * (basis.sqrt_lambda().cwiseProduct(draw.theta_beta.row(j).transpose()));
    out.array() += draw.alpha(j);
    return out;
}

namespace detail {

inline EffectMap empty_map(Index V, std::string name, const SummaryOptions& opt) {
    EffectMap m;
    m.covariate = std::move(name);
    m.mean.resize(V);
    m.lower.resize(V);
    m.upper.resize(V);
    m.p_plus.resize(V);
    m.e_s.resize(V);
    m.level = opt.level;
    return m;
}

inline std::string covariate_label(const std::vector<std::string>& names, Index j) {
    if (j < static_cast<Index>(names.size())) return names[std::size_t(j)];
    return j == 0 ? "intercept" : "x" + std::to_string(j);
}

// Rows of E are voxels v0.., columns are draws.
template <typename Derived>
void summarize_block(const Eigen::MatrixBase<Derived>& E, Index v0, Index k_lo, Index k_hi, EffectMap& m) {
    using Scalar = typename Derived::Scalar;
    const Index D = E.cols();
    std::vector<Scalar> buf(static_cast<std::size_t>(D));
    for (Index r = 0; r < E.rows(); ++r) {
        Index pos = 0, neg = 0;
        double sum = 0;
        for (Index d = 0; d < D; ++d) {
            const Scalar e = E(r, d);
            buf[std::size_t(d)] = e;
            sum += double(e);
            pos += e > 0;
            neg += e < 0;
        }
        const Index v = v0 + r;
        std::nth_element(buf.begin(), buf.begin() + k_lo, buf.end());
        m.lower(v) = double(buf[std::size_t(k_lo)]);
        std::nth_element(buf.begin(), buf.begin() + k_hi, buf.end());
        m.upper(v) = double(buf[std::size_t(k_hi)]);
        m.mean(v) = std::clamp(sum / double(D), m.lower(v), m.upper(v));
        m.e_s(v) = double(pos - neg) / double(D);
        m.p_plus(v) = (double(pos) + 0.5 * double(D - pos - neg)) / double(D);
    }
}

} // namespace detail

// Summary of a V x D matrix of per-voxel posterior draws.
template <typename Scalar>
EffectMap summarize_samples(const Matrix<Scalar>& samples, const SummaryOptions& opt, std::string name) {
    opt.validate();
    const Index V = samples.rows(), D = samples.cols();
    if (D < 100) throw DataError("summarize_samples: need at least 100 draws (got " + std::to_string(D) + ")");
    EffectMap m = detail::empty_map(V, std::move(name), opt);
    const Index k_lo = nearest_rank((1 - opt.level) / 2, D) - 1;
    const Index k_hi = nearest_rank(1 - (1 - opt.level) / 2, D) - 1;
    const Index block = 128;
    parallel_for(std::size_t((V + block - 1) / block), [&](std::size_t b) {
        const Index v0 = Index(b) * block, nv = std::min(block, V - v0);
        detail::summarize_block(samples.middleRows(v0, nv), v0, k_lo, k_hi, m);
    });
    m.set_threshold(opt.threshold);
    return m;
}

template <typename Scalar>
std::vector<EffectMap> summarize_gibbs(const std::vector<ParameterState<Scalar>>& draws,
                                       const BasisSystem<Scalar>& basis, const SummaryOptions& opt = {},
                                       const std::vector<std::string>& names = {}) {
    opt.validate();
    const Index D = static_cast<Index>(draws.size());
    if (D < 100) throw DataError("summarize_gibbs: need at least 100 draws (got " + std::to_string(D) + ")");
    const Index V = basis.num_voxels(), L = basis.rank(), P = draws.front().alpha.size();
    const Matrix<Scalar> W = basis.loading();
    const Index k_lo = nearest_rank((1 - opt.level) / 2, D) - 1;
    const Index k_hi = nearest_rank(1 - (1 - opt.level) / 2, D) - 1;

    std::vector<EffectMap> maps;
    for (Index j = 0; j < P; ++j) {
        EffectMap m = detail::empty_map(V, detail::covariate_label(names, j), opt);
        Matrix<Scalar> theta(L, D);
        RowVector<Scalar> alpha(D);
        for (Index d = 0; d < D; ++d) {
            theta.col(d) = draws[std::size_t(d)].theta_beta.row(j).transpose();
            alpha(d) = draws[std::size_t(d)].alpha(j);
        }
        const Index block = 128;
        const Index nblocks = (V + block - 1) / block;
        parallel_for(std::size_t(nblocks), [&](std::size_t b) {
            const Index v0 = Index(b) * block, nv = std::min(block, V - v0);
            Matrix<Scalar> E = W.middleRows(v0, nv) * theta;
            E.rowwise() += alpha;
            detail::summarize_block(E, v0, k_lo, k_hi, m);
        });
        m.set_threshold(opt.threshold);
        maps.push_back(std::move(m));
    }
    return maps;
}

template <typename Scalar>
std::vector<EffectMap> summarize_vi(const VariationalState<Scalar>& q, const BasisSystem<Scalar>& basis,
                                    const SummaryOptions& opt = {}, const std::vector<std::string>& names = {},
                                    bool converged = true) {
    opt.validate();
    const Index V = basis.num_voxels(), P = q.alpha_mean.size();
    const Matrix<Scalar> W = basis.loading();
    const Eigen::VectorXd w2 = W.rowwise().squaredNorm().template cast<double>();
    const double zq = boost::math::quantile(boost::math::normal(), 0.5 + opt.level / 2);
    std::vector<EffectMap> maps;
    for (Index j = 0; j < P; ++j) {
        EffectMap m = detail::empty_map(V, detail::covariate_label(names, j), opt);
        m.converged = converged;
        const Vector<Scalar> mu_s = W * q.beta_mean.row(j).transpose();
        const Eigen::VectorXd mu = mu_s.template cast<double>().array() + double(q.alpha_mean(j));
        const Eigen::VectorXd var = double(q.alpha_var(j)) + double(q.beta_var(j)) * w2.array();
        for (Index v = 0; v < V; ++v) {
            const double sd = std::sqrt(std::max(0.0, var(v)));
            m.mean(v) = mu(v);
            m.lower(v) = mu(v) - zq * sd;
            m.upper(v) = mu(v) + zq * sd;
            if (sd > 0) {
                const double x = mu(v) / (sd * std::numbers::sqrt2);
                m.p_plus(v) = 0.5 * boost::math::erfc(-x);
                m.e_s(v) = boost::math::erf(x);
            } else {
                m.p_plus(v) = mu(v) > 0 ? 1.0 : (mu(v) < 0 ? 0.0 : 0.5);
                m.e_s(v) = mu(v) > 0 ? 1.0 : (mu(v) < 0 ? -1.0 : 0.0);
            }
        }
        m.set_threshold(opt.threshold);
        maps.push_back(std::move(m));
    }
    return maps;
}

} // namespace simba
