#include "safepl/bands.hpp"

#include "safepl/core.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace safepl::bands {

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_cf(double x, double a, double b) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge (a=" + std::to_string(a) +
                       ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete beta needs positive shape parameters");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
    return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double f_cdf(double x, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw NumericError("F distribution needs positive degrees of freedom");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    const double t = d1 * x / (d1 * x + d2);
    return incomplete_beta(t, d1 / 2.0, d2 / 2.0);
}

double f_quantile(double p, double d1, double d2) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("F quantile probability must lie in (0,1), got " + std::to_string(p));
    if (!(d1 > 0.0) || !(d2 > 0.0))
        throw NumericError("F quantile needs positive degrees of freedom, got (" + std::to_string(d1) + ", " +
                           std::to_string(d2) + ")");
    // 1/F(d,d) ~ F(d,d), so the median is exactly one.
    if (p == 0.5 && d1 == d2) return 1.0;

    double lo = 1.0, hi = 1.0;
    while (f_cdf(hi, d1, d2) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw NumericError("F quantile bracket overflow");
    }
    while (f_cdf(lo, d1, d2) > p) {
        hi = lo;
        lo *= 0.5;
        if (lo < 1e-300) return lo;
    }
    // Geometric bisection keeps relative precision across scales.
    for (int it = 0; it < 400 && hi / lo - 1.0 > 1e-14; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (f_cdf(mid, d1, d2) < p)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

ConfidenceBand ConfidenceBand::exact(std::vector<double> values) {
    ConfidenceBand b;
    b.level = 0.0;
    b.lower = values;
    b.upper = values;
    b.vacuous.assign(values.size(), false);
    b.estimate = std::move(values);
    return b;
}

LinearModelFit fit_min_norm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
    if (design.rows() != response.size()) throw NumericError("design and response lengths differ");
    if (design.rows() == 0 || design.cols() == 0) throw NumericError("empty design matrix");
    LinearModelFit fit;
    fit.design = design;
    fit.response = response;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cutoff = kRankCutoff * (s.size() ? s(0) : 0.0);
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > cutoff) ++r;
    fit.rank = r;

    const Eigen::MatrixXd& U = svd.matrixU();
    const Eigen::MatrixXd& V = svd.matrixV();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(r);
    for (Eigen::Index k = 0; k < r; ++k) inv(k) = 1.0 / s(k);

    const Eigen::VectorXd uty = U.leftCols(r).transpose() * response;
    fit.beta = V.leftCols(r) * inv.cwiseProduct(uty);
    fit.gram_pinv = V.leftCols(r) * inv.cwiseAbs2().asDiagonal() * V.leftCols(r).transpose();
    fit.null_basis = V.rightCols(design.cols() - r);

    const double rss = (response - design * fit.beta).squaredNorm();
    fit.sigma2 = fit.has_residual_dof() ? rss / static_cast<double>(design.rows() - r) : 0.0;
    return fit;
}

ConfidenceBand whs_band(const LinearModelFit& fit, const Eigen::MatrixXd& queries, double level) {
    if (!(level >= 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in [0,1)");
    if (queries.cols() != fit.d()) throw NumericError("query feature dimension differs from the fit");
    double scale = 0.0;
    if (level > 0.0) {
        if (!fit.has_residual_dof())
            throw NumericError("no residual degrees of freedom: n=" + std::to_string(fit.n()) +
                               " <= rank=" + std::to_string(fit.rank));
        if (fit.rank == 0) throw NumericError("design has rank zero");
        const double r = static_cast<double>(fit.rank);
        scale = r * f_quantile(level, r, static_cast<double>(fit.n() - fit.rank)) * fit.sigma2;
    }
    ConfidenceBand band;
    band.level = level;
    const auto q = static_cast<std::size_t>(queries.rows());
    band.estimate.resize(q);
    band.lower.resize(q);
    band.upper.resize(q);
    band.vacuous.assign(q, false);
    for (Eigen::Index k = 0; k < queries.rows(); ++k) {
        const Eigen::VectorXd phi = queries.row(k).transpose();
        const double est = fit.predict(phi);
        const double half = scale > 0.0 ? std::sqrt(scale * std::max(0.0, fit.leverage(phi))) : 0.0;
        const auto i = static_cast<std::size_t>(k);
        band.estimate[i] = est;
        band.lower[i] = est - half;
        band.upper[i] = est + half;
    }
    return band;
}

std::pair<double, double> wilson_interval(double successes, double trials, double level) {
    if (!(trials > 0.0)) throw NumericError("Wilson interval needs at least one trial");
    const double phat = successes / trials;
    if (level == 0.0) return {phat, phat};
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in [0,1)");
    const boost::math::normal_distribution<double> std_normal;
    const double z = boost::math::quantile(std_normal, 1.0 - (1.0 - level) / 2.0);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / trials;
    const double center = (phat + z2 / (2.0 * trials)) / denom;
    const double half = z / denom * std::sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

ConfidenceBand stratum_bands(std::span<const double> successes, std::span<const double> trials, double level) {
    if (successes.size() != trials.size()) throw NumericError("stratum counts have different lengths");
    if (!(level >= 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in [0,1)");
    std::size_t nonempty = 0;
    for (double t : trials) nonempty += t > 0.0;
    const double per_level = level == 0.0 || nonempty == 0 ? 0.0 : 1.0 - (1.0 - level) / static_cast<double>(nonempty);

    ConfidenceBand band;
    band.level = level;
    for (std::size_t s = 0; s < trials.size(); ++s) {
        if (trials[s] > 0.0) {
            const auto [lo, hi] = wilson_interval(successes[s], trials[s], per_level);
            band.estimate.push_back(successes[s] / trials[s]);
            band.lower.push_back(lo);
            band.upper.push_back(hi);
            band.vacuous.push_back(false);
        } else {
            band.estimate.push_back(0.5);
            band.lower.push_back(0.0);
            band.upper.push_back(1.0);
            band.vacuous.push_back(true);
        }
    }
    return band;
}

ConfidenceBand saturated_whs_bands(std::span<const std::size_t> cell, std::span<const double> response,
                                   std::size_t strata, double level, double lo, double hi) {
    if (cell.size() != response.size()) throw NumericError("cell index and response lengths differ");
    if (!(level >= 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in [0,1)");
    std::vector<double> count(strata, 0.0), sum(strata, 0.0);
    for (std::size_t i = 0; i < cell.size(); ++i) {
        if (cell[i] >= strata) throw NumericError("stratum index out of range");
        count[cell[i]] += 1.0;
        sum[cell[i]] += response[i];
    }
    std::size_t rank = 0;
    std::vector<double> mean(strata, 0.0);
    for (std::size_t s = 0; s < strata; ++s)
        if (count[s] > 0.0) {
            ++rank;
            mean[s] = sum[s] / count[s];
        }

    double scale = 0.0;
    if (level > 0.0) {
        const std::size_t n = cell.size();
        if (n <= rank)
            throw NumericError("no residual degrees of freedom: n=" + std::to_string(n) +
                               " <= strata=" + std::to_string(rank));
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = response[i] - mean[cell[i]];
            rss += e * e;
        }
        const double r = static_cast<double>(rank);
        const double sigma2 = rss / static_cast<double>(n - rank);
        scale = r * f_quantile(level, r, static_cast<double>(n - rank)) * sigma2;
    }

    ConfidenceBand band;
    band.level = level;
    for (std::size_t s = 0; s < strata; ++s) {
        if (count[s] > 0.0) {
            const double half = std::sqrt(scale / count[s]);
            band.estimate.push_back(mean[s]);
            band.lower.push_back(mean[s] - half);
            band.upper.push_back(mean[s] + half);
            band.vacuous.push_back(false);
        } else {
            band.estimate.push_back(0.5 * (lo + hi));
            band.lower.push_back(lo);
            band.upper.push_back(hi);
            band.vacuous.push_back(true);
        }
    }
    return band;
}

}  // namespace safepl::bands
