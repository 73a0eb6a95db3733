// Synthetic instances with known truth: the random-Fourier-feature
// simulation design, the single-covariate and two-binary-covariate worked
// examples, and a PSA-like pre-trial generator.
//
// Every generator is a pure function of its arguments. Randomness comes from
// sim::Rng substreams of the seed, so results are bit-identical across runs
// and platforms.

#pragma once

#include "safepl/core.hpp"
#include "safepl/model_classes.hpp"
#include "safepl/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace safepl::sim {

double logistic(double v);
double logit(double p);

// ---------------------------------------------------------------------------
// Random Fourier feature design
// ---------------------------------------------------------------------------

struct RffDgp {
    static constexpr std::size_t kFeatures = 100;
    std::uint64_t seed = 0;
    std::vector<double> omega, b, beta;

    /// Draws omega, b and beta from substream (seed, 0).
    static RffDgp draw(std::uint64_t seed);

    double logit0(int x) const;
    double logit1(int x) const { return logit0(x) + 0.5 * (x - 4.5) - 0.8; }
    double m(int action, int x) const { return logistic(action ? logit1(x) : logit0(x)); }
};

struct RffInstance {
    RffDgp dgp;
    Dataset data;
    /// Full grid {0,...,9} with uniform weights.
    CovariateGrid grid;
    Policy baseline;
    ModelTable truth;
    UtilitySpec util;
};

/// Baseline 1{x >= 5}, u(0) = u(1) = 10, c(0) = 0, c(1) = -1. Rows come from
/// substream (seed, 1) one at a time, so a smaller n yields a prefix of the
/// rows for a larger n.
RffInstance gen_rff_instance(std::uint64_t seed, std::size_t n);

// ---------------------------------------------------------------------------
// Single discrete covariate with a constant logit effect
// ---------------------------------------------------------------------------

struct DiscreteExample {
    CovariateGrid grid;
    Policy baseline;
    ModelTable truth;
    std::vector<double> intercepts;
    /// Largest consecutive |m(a, j+1) - m(a, j)| per action.
    std::map<int, double> lambda_true;
    UtilitySpec util;
};

/// Linear ramp from logit(0.15) to logit(0.6) over j = 0..J-1.
std::vector<double> default_intercepts(std::size_t J = 20);

/// m(a, j) = logistic(s_j + 0.15 a), baseline 1{j >= 10}, uniform weights,
/// u = 1 and zero costs.
DiscreteExample gen_discrete_example(std::vector<double> intercepts = default_intercepts());

// ---------------------------------------------------------------------------
// Two binary covariates
// ---------------------------------------------------------------------------

struct TwoBinaryExample {
    /// Points (0,0), (0,1), (1,0), (1,1), uniform.
    CovariateGrid grid;
    Policy baseline;
    /// m~ at each grid point (the baseline function).
    std::vector<double> observed;
    models::BasisSpec basis;
    UtilitySpec util;
    double m00 = 0, m10 = 0, m01 = 0, m11 = 0;

    /// (beta00, beta01, beta02, beta10, beta11, beta12) on the null-space
    /// parameterization with free (b1, b2).
    std::array<double, 6> coefficients(double b1, double b2) const;
    /// Observation constraints evaluated at those coefficients (all zero).
    std::array<double, 4> residuals(double b1, double b2) const;
    /// Control value at (1,1) under the additive model.
    double extrapolated_control() const { return m10 + m01 - m00; }
};

/// Inputs m~_{x1 x2} in [0,1].
TwoBinaryExample gen_two_binary_example(double m00, double m10, double m01, double m11);

// ---------------------------------------------------------------------------
// PSA-like pre-trial data
// ---------------------------------------------------------------------------

struct PsaRiskModel {
    // Attribute frequencies; the defaults put flag prevalence near 16%.
    double age_le20 = 0.15;
    double age_21_22 = 0.10;
    double violent = 0.29;
    double pending = 0.37;
    double prior_misd = 0.45;
    double prior_fel = 0.35;
    /// P(prior violent convictions = 0, 1, 2, 3+).
    std::array<double, 4> prior_violent{0.68, 0.15, 0.08, 0.09};
    double prior_incarceration = 0.30;
    /// P(prior FTA in past two years = 0, 1, 2+).
    std::array<double, 3> prior_fta_recent{0.75, 0.15, 0.10};
    double prior_fta_old = 0.20;
};

/// Logistic models for the cash-bail decision and for NVCA.
struct PsaOutcomeModel {
    // Decision without the PSA: logit = intercept + slope (fta + nca - 4).
    double null_intercept = -1.7;
    double null_slope = 0.25;
    // Decision with the PSA shown: adds DMF recommendation and flag terms.
    double psa_intercept = -2.0;
    double psa_slope = 0.2;
    double recommendation = 1.3;
    double flag = 0.6;
    // NVCA: logit = intercept + slope points + jump 1{points >= 6}
    //               - cash (base + per_point max(0, points - 3)).
    double nvca_intercept = -3.5;
    double nvca_slope = 0.35;
    double nvca_jump = 1.0;
    double cash_base = 0.2;
    double cash_per_point = 0.35;
    /// Probability of showing the PSA.
    double propensity = 0.5;
};

struct PsaRecord {
    /// Factors in the order violent, violent & age <= 20, pending, prior
    /// conviction, one prior violent, two prior violent, three or more.
    std::array<int, 7> factors{};
    int nvca_points = 0;
    int flag = 0;
    int fta_raw = 0, nca_raw = 0;
    int fta = 1, nca = 1;
    /// 1 = cash bail recommended.
    int dmf = 0;
    int z = 0;
    int cash = 0;
    int nvca = 0;
    /// P(no NVCA) under the null policy and under the PSA with flag 0 / 1.
    double m_null = 0.0, m_flag0 = 0.0, m_flag1 = 0.0;
};

inline constexpr std::array<int, 7> kNvcaWeights{2, 1, 1, 1, 1, 1, 2};
inline constexpr int kNvcaThreshold = 4;

/// Collapse maps for raw FTA (0..7) and NCA (0..13) sums to levels 1..6.
int fta_level(int raw);
int nca_level(int raw);

struct PsaSample {
    std::vector<PsaRecord> records;
    PsaRiskModel risk;
    PsaOutcomeModel outcome;

    /// x = [NVCA points], a = flag = 1{points >= 4}, y = 1{no NVCA}, with
    /// z, e and d = cash bail.
    Dataset nvca_points() const;
    /// x = the seven binary factors, a = flag via the integer weights.
    Dataset nvca_factors() const;
    /// x = (FTA, NCA) for unflagged rows, a = DMF recommendation.
    Dataset dmf() const;

    /// True effect tau(a, x) = P(no NVCA | PSA, flag a) - P(no NVCA | null)
    /// averaged within each NVCA points value 0..7 (unset where no rows).
    ModelTable effect_by_points() const;
};

PsaRecord draw_psa_record(Rng& rng, const PsaRiskModel& risk, const PsaOutcomeModel& outcome);

/// Rows from substream (seed, 0); smaller n is a prefix of larger n.
PsaSample gen_psa_like(std::uint64_t seed, std::size_t n, const PsaRiskModel& risk = {},
                       const PsaOutcomeModel& outcome = {});

}  // namespace safepl::sim
