// Regret certificates and the quantities they depend on: policy-weighted
// widths and Monte Carlo Rademacher complexity of enumerable classes.
// These are reports; nothing here changes a learned policy.

#pragma once

#include "safepl/model_classes.hpp"
#include "safepl/optimizer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace safepl::diag {

struct RademacherEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t replications = 0;
};

/// Monte Carlo estimate of E sup_pi |(1/n) sum_i eps_i pi(X_i)| over a
/// finite list of 0/1 policies on a grid; row i sits at grid point
/// `row_cell[i]`. Replication r uses substream (seed, r), so the result does
/// not depend on `threads`.
RademacherEstimate rademacher_estimate(const std::vector<Policy>& policies, std::span<const std::size_t> row_cell,
                                       std::size_t replications, std::uint64_t seed, unsigned threads = 1);

/// Enumerates `cls` on the grid first; non-enumerable classes raise.
RademacherEstimate rademacher_estimate(const PolicyClass& cls, const CovariateGrid& grid,
                                       std::span<const std::size_t> row_cell, std::size_t replications,
                                       std::uint64_t seed, unsigned threads = 1);

struct Complexity {
    enum class Kind { rademacher, vc };
    Kind kind = Kind::rademacher;
    /// R_n(Pi) or the VC dimension nu.
    double value = 0.0;
    /// Universal constant c of the VC form.
    double universal_constant = 1.0;
};

struct RegretCertificate {
    std::string kind;
    double bound = 0.0;
    double width_term = 0.0;
    double complexity_term = 0.0;
    double sampling_term = 0.0;
    /// The bound holds with at least this probability (1 - alpha - delta).
    double probability = 0.0;
    std::size_t n = 0;
    double alpha = 0.0;
    double delta = 0.0;
    double C = 0.0;
    Complexity complexity;
    /// Same bound with the policy-weighted width in place of the size.
    std::optional<double> policy_weighted_bound;
};

/// Regret against the baseline: 8 C R_n + 14 C sqrt(log(1/delta)/n), or in
/// VC form C/sqrt(n) (4 c sqrt(nu) + 14 sqrt(log(1/delta))).
/// Needs 0 < delta <= 1/e.
RegretCertificate safety_bound(std::size_t n, double alpha, double delta, double C, const Complexity& complexity);

/// Regret against the best policy in the class: adds 2 C times the empirical
/// size. Requires a gain u > 0 shared by all actions.
RegretCertificate optimality_bound(double size, std::size_t n, double alpha, double delta, const UtilitySpec& util,
                                   const Complexity& complexity,
                                   std::optional<double> policy_weighted_size = std::nullopt);

/// sup_pi sum_j w_j sum_a pi(a|x_j) (1 - baseline(a|x_j)) (B_u - B_l)(a, x_j).
double policy_weighted_width(const models::BoundedModelClass& cls, const CovariateGrid& grid, const Policy& baseline,
                             const std::vector<Policy>& policies);

}  // namespace safepl::diag
