// Simultaneous confidence bands: F quantiles, minimum-norm least squares
// with Working-Hotelling-Scheffe bands, and per-stratum Wilson intervals.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace safepl::bands {

/// Quantile of the F(d1, d2) distribution at probability p in (0,1).
double f_quantile(double p, double d1, double d2);

/// CDF of F(d1, d2) at x >= 0, via the regularized incomplete beta function.
double f_cdf(double x, double d1, double d2);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);

/// Point-wise band over a list of queries. Query meaning is set by the caller
/// (grid points, strata, or (action, point) pairs).
struct ConfidenceBand {
    double level = 0.0;
    std::vector<double> estimate;
    std::vector<double> lower;
    std::vector<double> upper;
    /// True where no information was available and the band is the full range.
    std::vector<bool> vacuous;

    std::size_t size() const { return estimate.size(); }
    /// lower = upper = estimate at level 0.
    static ConfidenceBand exact(std::vector<double> values);
};

/// Minimum-norm least squares fit y ~ Phi beta with a rank-revealing SVD.
struct LinearModelFit {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
    Eigen::VectorXd beta;
    Eigen::Index rank = 0;
    /// RSS / (n - r); zero when n <= r (see has_residual_dof).
    double sigma2 = 0.0;
    /// (Phi^T Phi)^+.
    Eigen::MatrixXd gram_pinv;
    /// Orthonormal basis of the null space of Phi (d x (d - r)).
    Eigen::MatrixXd null_basis;

    Eigen::Index n() const { return design.rows(); }
    Eigen::Index d() const { return design.cols(); }
    bool has_residual_dof() const { return n() > rank; }

    double predict(const Eigen::VectorXd& phi) const { return beta.dot(phi); }
    /// phi^T (Phi^T Phi)^+ phi.
    double leverage(const Eigen::VectorXd& phi) const { return phi.dot(gram_pinv * phi); }
};

/// Singular values below cutoff * sigma_max are treated as zero.
inline constexpr double kRankCutoff = 1e-10;

LinearModelFit fit_min_norm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

/// Band prediction +/- sqrt(r F_{level}(r, n-r) sigma2 phi^T (Phi^T Phi)^+ phi)
/// for each row of `queries`. `level` is the confidence 1 - alpha in [0,1).
ConfidenceBand whs_band(const LinearModelFit& fit, const Eigen::MatrixXd& queries, double level);

/// Wilson interval for a binomial proportion at confidence `level`.
std::pair<double, double> wilson_interval(double successes, double trials, double level);

/// Per-stratum Wilson intervals at level 1 - alpha/S where S counts the
/// nonempty strata. Empty strata get [0,1] and are flagged vacuous.
ConfidenceBand stratum_bands(std::span<const double> successes, std::span<const double> trials, double level);

/// WHS band on the saturated one-hot design over strata: row i belongs to
/// stratum `cell[i]`. Empty strata get [lo, hi] and are flagged vacuous.
ConfidenceBand saturated_whs_bands(std::span<const std::size_t> cell, std::span<const double> response,
                                   std::size_t strata, double level, double lo, double hi);

}  // namespace safepl::bands
