#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fibound/bound.hpp"
#include "fibound/models.hpp"
#include "fibound/moments.hpp"
#include "fibound/oracle.hpp"
#include "fibound/transforms.hpp"

namespace fibound {

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::string suite;
    std::vector<ValidationCheck> checks;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    void print(std::ostream& os) const {
        for (const auto& c : checks)
            os << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << '\n';
        os << "suite '" << suite << "': " << (passed() ? "PASS" : "FAIL") << " (" << checks.size()
           << " checks)\n";
    }
};

// Moments of the leading l transforms of a bank, extracted from a summary
// of the full bank; valid because the samples are shared.
inline MomentSummary prefix_summary(const MomentSummary& s, std::size_t l) {
    MomentSummary out;
    out.mean.assign(s.mean.begin(), s.mean.begin() + l);
    out.cov = Mat(l, l);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) out.cov(i, j) = s.cov(i, j);
    out.n = s.n;
    out.theta = s.theta;
    return out;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Relative standard error of the mean across bootstrap block values.
inline double block_rel_se(const std::vector<double>& values) {
    if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    if (m == 0.0) return std::numeric_limits<double>::quiet_NaN();
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    var /= static_cast<double>(values.size() - 1);
    return std::sqrt(var / static_cast<double>(values.size())) / std::abs(m);
}

inline double bound_from_triple(const MomentTriple& t, const RegularizationPolicy& p = {}) {
    return matched_bound(derivative_mu(t), t.at_center.cov, p).value;
}

} // namespace detail

// Attainment on the four reference families: with the family's own
// sufficient statistic in the bank, the matched bound reproduces the exact
// Fisher information to Monte Carlo accuracy.
inline ValidationReport validate_tightness(std::uint64_t n_samples, std::uint64_t seed,
                                           unsigned n_threads = 0) {
    ValidationReport rep{"tightness", {}};
    struct Case {
        ModelSpec model;
        const char* transforms;
    };
    const Case cases[] = {
        {reference_model(ReferenceFamily::gaussian_mean, 1.0), "z"},
        {reference_model(ReferenceFamily::gaussian_variance), "z2"},
        {reference_model(ReferenceFamily::exponential_rate), "z"},
        {reference_model(ReferenceFamily::poisson), "z"},
    };
    EstimateOptions opt;
    opt.n_threads = n_threads;
    for (const Case& c : cases) {
        const TransformSet set = parse_transform_spec(c.transforms);
        for (double theta : {0.5, 1.0, 2.0}) {
            const double h = 0.01 * std::max(std::abs(theta), 1.0);
            const MomentTriple t = estimate_triple(c.model, set, theta, h, n_samples, seed, opt);
            const double value = detail::bound_from_triple(t);
            const double exact = fim_closed_form(c.model, theta);
            const double rel = std::abs(value / exact - 1.0);
            rep.checks.push_back({c.model.name + " theta=" + detail::fmt(theta), rel < 0.02,
                                  "|bound/F - 1| = " + detail::fmt(rel) + " (limit 0.02)"});
        }
    }
    return rep;
}

// The matched bound never exceeds the exact Fisher information beyond its
// own Monte Carlo wiggle: Rician model, full bank, several seeds.
inline ValidationReport validate_conservativeness(std::uint64_t n_samples, std::uint64_t seed,
                                                  unsigned n_threads = 0) {
    ValidationReport rep{"conservativeness", {}};
    const ModelSpec model = rician_model();
    const TransformSet set = standard_transform_set();
    EstimateOptions opt;
    opt.n_threads = n_threads;
    for (double theta : {0.25, 0.5, 1.0, 1.5, 2.0}) {
        const double exact = fim_quadrature(model, theta);
        for (int s = 0; s < 5; ++s) {
            const double h = 0.01 * std::max(std::abs(theta), 1.0);
            const auto est =
                estimate_triple_blocks(model, set, theta, h, n_samples, seed + 1000 * s, 16, opt);
            const double value = detail::bound_from_triple(est.merged);
            std::vector<double> blocks;
            for (const auto& b : est.blocks) blocks.push_back(detail::bound_from_triple(b));
            const double eps = detail::block_rel_se(blocks);
            const double limit = exact * (1.0 + 3.0 * eps);
            rep.checks.push_back({"rician theta=" + detail::fmt(theta) + " seed+" + std::to_string(s),
                                  value <= limit,
                                  "bound " + detail::fmt(value) + " vs F(1+3eps) " + detail::fmt(limit) +
                                      " (F " + detail::fmt(exact) + ", eps " + detail::fmt(eps) + ")"});
        }
    }
    return rep;
}

// The matched bound dominates the generic bound for any weight vector.
inline ValidationReport validate_matching(std::uint64_t n_samples, std::uint64_t seed,
                                          unsigned n_threads = 0) {
    ValidationReport rep{"matching", {}};
    const ModelSpec model = rician_model();
    const TransformSet set = standard_transform_set();
    EstimateOptions opt;
    opt.n_threads = n_threads;
    const MomentTriple t = estimate_triple(model, set, 1.0, 0.01, n_samples, seed, opt);
    const Vec dmu = derivative_mu(t);
    const Vec& mu = t.at_center.mean;
    const Mat& r = t.at_center.cov;
    const double matched = matched_bound(dmu, r, {}).value;

    DrawSource rng(seed, 0xbe7a);
    int violations = 0;
    double worst = 0.0;
    const int n_beta = 200;
    for (int k = 0; k < n_beta; ++k) {
        Vec beta(set.size());
        for (double& b : beta) b = rng.next_normal();
        const double g = generic_bound(beta, optimal_alpha(beta, mu), mu, dmu, r);
        const double excess = (g - matched) / matched;
        worst = std::max(worst, excess);
        if (excess > 1e-10) ++violations;
    }
    rep.checks.push_back({"matched >= generic over " + std::to_string(n_beta) + " random weights",
                          violations == 0,
                          "violations " + std::to_string(violations) + ", worst relative excess " +
                              detail::fmt(worst)});
    return rep;
}

// The offset beta.mu is the unique maximizer of the generic bound.
inline ValidationReport validate_appendix_alpha(std::uint64_t seed) {
    ValidationReport rep{"appendix_alpha", {}};
    DrawSource rng(seed, 0xa1fa);
    int violations = 0;
    const int n_fixtures = 20, n_deltas = 100;
    for (int f = 0; f < n_fixtures; ++f) {
        const std::size_t dim = 5;
        Mat a(dim, dim);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) a(i, j) = rng.next_normal();
        Mat r(dim, dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                double s = i == j ? 0.5 : 0.0;
                for (std::size_t k = 0; k < dim; ++k) s += a(k, i) * a(k, j);
                r(i, j) = s;
            }
        Vec mu(dim), dmu(dim), beta(dim);
        for (double& v : mu) v = rng.next_normal();
        for (double& v : dmu) v = rng.next_normal();
        for (double& v : beta) v = rng.next_normal();
        const double alpha_star = optimal_alpha(beta, mu);
        const double best = generic_bound(beta, alpha_star, mu, dmu, r);
        for (int d = 0; d < n_deltas; ++d) {
            double delta = 2.0 * rng.next_uniform() - 1.0;
            if (delta == 0.0) delta = 0.5;
            const double perturbed = generic_bound(beta, alpha_star + delta, mu, dmu, r);
            if (!(best > perturbed)) ++violations;
        }
    }
    rep.checks.push_back({"alpha* strictly beats every perturbation", violations == 0,
                          std::to_string(n_fixtures) + " fixtures x " + std::to_string(n_deltas) +
                              " deltas, violations " + std::to_string(violations)});
    return rep;
}

// Growing the bank never loses information: nested prefixes of the full
// bank on shared Saleh samples give nondecreasing bounds.
inline ValidationReport validate_monotonicity(std::uint64_t n_samples, std::uint64_t seed,
                                              unsigned n_threads = 0) {
    ValidationReport rep{"monotonicity", {}};
    const ModelSpec model = saleh_model(2.1587, 1.1517);
    const TransformSet set = standard_transform_set();
    EstimateOptions opt;
    opt.n_threads = n_threads;
    const MomentTriple t = estimate_triple(model, set, 1.0, 0.01, n_samples, seed, opt);
    const Vec dmu_full = derivative_mu(t);

    double prev = -std::numeric_limits<double>::infinity();
    bool ok = true;
    std::string values;
    for (std::size_t l = 1; l <= set.size(); ++l) {
        const MomentSummary center = prefix_summary(t.at_center, l);
        const Vec dmu(dmu_full.begin(), dmu_full.begin() + l);
        const double value = matched_bound(dmu, center.cov, {}).value;
        if (!(value >= prev - 1e-10)) ok = false;
        values += (l > 1 ? " -> " : "") + detail::fmt(value);
        prev = value;
    }
    rep.checks.push_back({"bound nondecreasing over nested banks", ok, values});
    return rep;
}

inline ValidationReport validate_suite(const std::string& suite, std::uint64_t n_samples = 1000000,
                                       std::uint64_t seed = 20240701, unsigned n_threads = 0) {
    if (suite == "tightness") return validate_tightness(n_samples, seed, n_threads);
    if (suite == "conservativeness") return validate_conservativeness(n_samples, seed, n_threads);
    if (suite == "matching") return validate_matching(n_samples, seed, n_threads);
    if (suite == "appendix_alpha") return validate_appendix_alpha(seed);
    if (suite == "monotonicity") return validate_monotonicity(n_samples, seed, n_threads);
    throw parse_error("unknown validation suite '" + suite +
                      "' (expected tightness, conservativeness, matching, appendix_alpha or "
                      "monotonicity)");
}

} // namespace fibound
