#include "safepl/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace safepl::sim {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

// ---------------------------------------------------------------------------
// Random Fourier features

RffDgp RffDgp::draw(std::uint64_t seed) {
    RffDgp d;
    d.seed = seed;
    auto rng = Rng::substream(seed, 0);
    d.omega.resize(kFeatures);
    d.b.resize(kFeatures);
    d.beta.resize(kFeatures);
    for (auto& v : d.omega) v = rng.normal();
    for (auto& v : d.b) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& v : d.beta) v = rng.normal();
    return d;
}

double RffDgp::logit0(int x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < kFeatures; ++k) s += beta[k] * std::cos(omega[k] * x / 9.0 + b[k]);
    return std::sqrt(2.0 / static_cast<double>(kFeatures)) * s;
}

RffInstance gen_rff_instance(std::uint64_t seed, std::size_t n) {
    if (n == 0) throw ConfigError("simulation needs n >= 1");
    auto dgp = RffDgp::draw(seed);
    const ThresholdRule rule{{0}, 5};

    std::vector<Covariate> pts;
    for (int x = 0; x < 10; ++x) pts.push_back({x});
    auto grid = CovariateGrid::uniform(pts);
    auto baseline = Policy::from_rule(rule, grid);

    ModelTable truth(ActionSet::binary(), grid.size());
    for (int x = 0; x < 10; ++x)
        for (int a : {0, 1}) truth.set(a, static_cast<std::size_t>(x), dgp.m(a, x));

    auto rng = Rng::substream(seed, 1);
    std::vector<Observation> rows(n);
    for (auto& r : rows) {
        const int x = static_cast<int>(rng.below(10));
        // Both potential outcomes are drawn so the row stream does not depend
        // on the baseline.
        const int y0 = rng.bernoulli(dgp.m(0, x));
        const int y1 = rng.bernoulli(dgp.m(1, x));
        r.x = {x};
        r.action = x >= 5;
        r.outcome = r.action ? y1 : y0;
    }

    UtilitySpec util = UtilitySpec::constant_gain(ActionSet::binary(), 10.0, {{0, 0.0}, {1, -1.0}});
    return {std::move(dgp), Dataset(std::move(rows), ActionSet::binary(), rule), std::move(grid),
            std::move(baseline), std::move(truth), std::move(util)};
}

// ---------------------------------------------------------------------------
// Single discrete covariate

std::vector<double> default_intercepts(std::size_t J) {
    if (J < 2) throw ConfigError("discrete example needs at least two grid points");
    const double lo = logit(0.15), hi = logit(0.6);
    std::vector<double> s(J);
    for (std::size_t j = 0; j < J; ++j) s[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(J - 1);
    return s;
}

DiscreteExample gen_discrete_example(std::vector<double> intercepts) {
    const std::size_t J = intercepts.size();
    if (J == 0) throw ConfigError("discrete example needs intercepts");
    std::vector<Covariate> pts;
    for (std::size_t j = 0; j < J; ++j) pts.push_back({static_cast<int>(j)});
    DiscreteExample ex;
    ex.grid = CovariateGrid::uniform(pts);
    ex.baseline = Policy::from_rule(ThresholdRule{{0}, 10}, ex.grid);
    ex.truth = ModelTable(ActionSet::binary(), J);
    for (std::size_t j = 0; j < J; ++j)
        for (int a : {0, 1}) ex.truth.set(a, j, logistic(intercepts[j] + 0.15 * a));
    for (int a : {0, 1}) {
        double lam = 0.0;
        for (std::size_t j = 0; j + 1 < J; ++j)
            lam = std::max(lam, std::abs(ex.truth.at(a, j + 1) - ex.truth.at(a, j)));
        ex.lambda_true[a] = lam;
    }
    ex.intercepts = std::move(intercepts);
    ex.util = UtilitySpec::constant_gain(ActionSet::binary(), 1.0, {{0, 0.0}, {1, 0.0}});
    return ex;
}

// ---------------------------------------------------------------------------
// Two binary covariates

std::array<double, 6> TwoBinaryExample::coefficients(double b1, double b2) const {
    return {m00,
            m10 - m00,
            m01 - m00,
            -11.0 / 4.0 * (b1 + b2),
            15.0 / 4.0 * b1 - b2,
            15.0 / 4.0 * b2 - b1 + m11};
}

std::array<double, 4> TwoBinaryExample::residuals(double b1, double b2) const {
    const auto c = coefficients(b1, b2);
    return {c[0] - m00, c[0] + c[1] - m10, c[0] + c[2] - m01, c[3] + c[4] + c[5] - m11};
}

TwoBinaryExample gen_two_binary_example(double m00, double m10, double m01, double m11) {
    for (double v : {m00, m10, m01, m11})
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("two-binary example inputs must lie in [0,1]");
    TwoBinaryExample ex;
    ex.grid = CovariateGrid::uniform({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    TableRule rule;
    rule.table = {{{0, 0}, 0}, {{0, 1}, 0}, {{1, 0}, 0}, {{1, 1}, 1}};
    ex.baseline = Policy::from_rule(rule, ex.grid);
    ex.observed = {m00, m01, m10, m11};
    ex.basis.kind = models::BasisSpec::Kind::additive;
    ex.util = UtilitySpec::constant_gain(ActionSet::binary(), 1.0, {{0, 0.0}, {1, 0.0}});
    ex.m00 = m00;
    ex.m10 = m10;
    ex.m01 = m01;
    ex.m11 = m11;
    return ex;
}

// ---------------------------------------------------------------------------
// PSA-like data

int fta_level(int raw) {
    static constexpr std::array<int, 8> map{1, 2, 3, 4, 4, 5, 5, 6};
    if (raw < 0 || raw > 7) throw DataError("raw FTA sum " + std::to_string(raw) + " outside 0..7");
    return map[static_cast<std::size_t>(raw)];
}

int nca_level(int raw) {
    static constexpr std::array<int, 14> map{1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 6, 6, 6};
    if (raw < 0 || raw > 13) throw DataError("raw NCA sum " + std::to_string(raw) + " outside 0..13");
    return map[static_cast<std::size_t>(raw)];
}

namespace {

template <std::size_t N>
int categorical(Rng& rng, const std::array<double, N>& p) {
    double u = rng.uniform();
    for (std::size_t k = 0; k + 1 < N; ++k) {
        if (u < p[k]) return static_cast<int>(k);
        u -= p[k];
    }
    return static_cast<int>(N - 1);
}

double cash_probability(const PsaRecord& r, const PsaOutcomeModel& m, bool shown, int flag, int recommend) {
    const double risk = r.fta + r.nca - 4.0;
    if (!shown) return logistic(m.null_intercept + m.null_slope * risk);
    return logistic(m.psa_intercept + m.psa_slope * risk + m.recommendation * recommend + m.flag * flag);
}

double nvca_probability(const PsaRecord& r, const PsaOutcomeModel& m, int cash) {
    const int p = r.nvca_points;
    return logistic(m.nvca_intercept + m.nvca_slope * p + m.nvca_jump * (p >= 6) -
                    cash * (m.cash_base + m.cash_per_point * std::max(0, p - 3)));
}

double no_nvca(const PsaRecord& r, const PsaOutcomeModel& m, double q) {
    return 1.0 - (q * nvca_probability(r, m, 1) + (1.0 - q) * nvca_probability(r, m, 0));
}

}  // namespace

PsaRecord draw_psa_record(Rng& rng, const PsaRiskModel& risk, const PsaOutcomeModel& outcome) {
    PsaRecord r;
    const int age = categorical(rng, std::array<double, 3>{risk.age_le20, risk.age_21_22,
                                                          1.0 - risk.age_le20 - risk.age_21_22});
    const int violent = rng.bernoulli(risk.violent);
    const int pending = rng.bernoulli(risk.pending);
    const int misd = rng.bernoulli(risk.prior_misd);
    const int fel = rng.bernoulli(risk.prior_fel);
    const int pv = categorical(rng, risk.prior_violent);
    const int incarcerated = rng.bernoulli(risk.prior_incarceration);
    const int fta_recent = categorical(rng, risk.prior_fta_recent);
    const int fta_old = rng.bernoulli(risk.prior_fta_old);
    const int conviction = misd | fel;

    r.factors = {violent, violent & (age == 0), pending, conviction, pv == 1, pv == 2, pv == 3};
    for (std::size_t k = 0; k < 7; ++k) r.nvca_points += kNvcaWeights[k] * r.factors[k];
    r.flag = r.nvca_points >= kNvcaThreshold;

    r.fta_raw = pending + conviction + (fta_recent == 0 ? 0 : fta_recent == 1 ? 2 : 4) + fta_old;
    r.nca_raw = 2 * (age <= 1) + 3 * pending + (misd && fel ? 2 : conviction) + (pv == 0 ? 0 : pv == 3 ? 2 : 1) +
                2 * incarcerated + fta_recent;
    r.fta = fta_level(r.fta_raw);
    r.nca = nca_level(r.nca_raw);
    const int dmf_scores = r.fta >= 5 || r.nca >= 5;
    r.dmf = dmf_scores || r.flag;

    r.m_null = no_nvca(r, outcome, cash_probability(r, outcome, false, 0, 0));
    r.m_flag0 = no_nvca(r, outcome, cash_probability(r, outcome, true, 0, dmf_scores));
    r.m_flag1 = no_nvca(r, outcome, cash_probability(r, outcome, true, 1, 1));

    r.z = rng.bernoulli(outcome.propensity);
    r.cash = rng.bernoulli(cash_probability(r, outcome, r.z, r.flag, r.dmf));
    r.nvca = rng.bernoulli(nvca_probability(r, outcome, r.cash));
    return r;
}

PsaSample gen_psa_like(std::uint64_t seed, std::size_t n, const PsaRiskModel& risk, const PsaOutcomeModel& outcome) {
    if (n == 0) throw ConfigError("PSA generator needs n >= 1");
    if (!(outcome.propensity > 0.0 && outcome.propensity < 1.0))
        throw ConfigError("PSA propensity must lie in (0,1)");
    PsaSample s{{}, risk, outcome};
    s.records.reserve(n);
    auto rng = Rng::substream(seed, 0);
    for (std::size_t i = 0; i < n; ++i) s.records.push_back(draw_psa_record(rng, risk, outcome));
    return s;
}

Dataset PsaSample::nvca_points() const {
    std::vector<Observation> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back({{r.nvca_points}, r.flag, 1 - r.nvca, r.z, outcome.propensity, r.cash});
    return Dataset(std::move(rows), ActionSet::binary(), ThresholdRule{{0}, kNvcaThreshold});
}

Dataset PsaSample::nvca_factors() const {
    std::vector<Observation> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back({Covariate(r.factors.begin(), r.factors.end()), r.flag, 1 - r.nvca, r.z, outcome.propensity,
                        r.cash});
    return Dataset(std::move(rows), ActionSet::binary(),
                   IntegerWeightRule{std::vector<int>(kNvcaWeights.begin(), kNvcaWeights.end()), kNvcaThreshold});
}

Dataset PsaSample::dmf() const {
    std::vector<Observation> rows;
    for (const auto& r : records)
        if (!r.flag) rows.push_back({{r.fta, r.nca}, r.dmf, 1 - r.nvca, r.z, outcome.propensity, r.cash});
    return Dataset(std::move(rows), ActionSet::binary(), MonotoneRule{0, 1, 1, 1, 6, {4, 4, 4, 4, 0, 0}});
}

ModelTable PsaSample::effect_by_points() const {
    constexpr std::size_t P = 8;
    std::array<double, P> t0{}, t1{}, cnt{};
    for (const auto& r : records) {
        const auto p = static_cast<std::size_t>(r.nvca_points);
        t0[p] += r.m_flag0 - r.m_null;
        t1[p] += r.m_flag1 - r.m_null;
        cnt[p] += 1.0;
    }
    ModelTable tau(ActionSet::binary(), P);
    for (std::size_t p = 0; p < P; ++p)
        if (cnt[p] > 0.0) {
            tau.set(0, p, t0[p] / cnt[p]);
            tau.set(1, p, t1[p] / cnt[p]);
        }
    return tau;
}

}  // namespace safepl::sim
