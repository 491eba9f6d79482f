#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fibound/errors.hpp"
#include "fibound/models.hpp"

namespace fibound {

struct QuadratureSpec {
    double rel_tol = 1e-8;           // target relative accuracy of the integral
    double fd_step_theta_rel = 1e-5; // relative step for the score's theta derivative
    int max_depth = 30;              // subdivision levels per panel before giving up
    int initial_panels = 64;         // fixed panels of the first composite pass

    void validate() const {
        if (!(rel_tol > 0.0 && rel_tol < 1e-2))
            throw validation_error("quadrature rel_tol must lie in (0, 1e-2)");
        if (!(fd_step_theta_rel > 0.0)) throw validation_error("fd_step_theta_rel must be positive");
    }
};

namespace detail {

// Recursive adaptive Simpson refinement of one panel.
inline double adapt_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth, int max_depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h6 = (b - a) / 12.0;
    const double left = h6 * (fa + 4.0 * flm + fm);
    const double right = h6 * (fm + 4.0 * frm + fb);
    const double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol) return left + right + err;
    if (depth >= max_depth)
        throw quadrature_failure_error("adaptive quadrature did not converge after " +
                                       std::to_string(max_depth) + " levels; last estimates " +
                                       std::to_string(whole) + " and " + std::to_string(left + right));
    return adapt_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1, max_depth) +
           adapt_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1, max_depth);
}

// Adaptive composite Simpson on [a, b]: a fixed composite pass sizes the
// absolute tolerance, then every panel is refined adaptively.
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 const QuadratureSpec& spec) {
    const int p = spec.initial_panels;
    std::vector<double> fx(2 * p + 1);
    for (int i = 0; i <= 2 * p; ++i)
        fx[i] = f(a + (b - a) * static_cast<double>(i) / (2.0 * p));
    double rough = 0.0;
    for (int i = 0; i < p; ++i) {
        const double w = (b - a) / (6.0 * p);
        rough += w * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
    }
    if (rough == 0.0) return 0.0;

    const double panel_tol = spec.rel_tol * std::abs(rough) / p;
    double total = 0.0;
    for (int i = 0; i < p; ++i) {
        const double pa = a + (b - a) * static_cast<double>(i) / p;
        const double pb = a + (b - a) * static_cast<double>(i + 1) / p;
        const double w = (pb - pa) / 6.0;
        const double whole = w * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
        total += adapt_simpson(f, pa, pb, fx[2 * i], fx[2 * i + 1], fx[2 * i + 2], whole, panel_tol, 0,
                               spec.max_depth);
    }
    return total;
}

// Maps the model support onto a finite parameter interval and integrates
// integrand(z) dz over it. Half-infinite supports use z = lo + t/(1-t) with
// Jacobian 1/(1-t)^2; the full line uses z = t/(1-t^2) with Jacobian
// (1+t^2)/(1-t^2)^2.
inline double integrate_over_support(const Support& support,
                                     const std::function<double(double)>& integrand,
                                     const QuadratureSpec& spec) {
    switch (support.kind) {
        case SupportKind::finite_interval:
            return integrate_adaptive(integrand, support.lo, support.hi, spec);
        case SupportKind::half_line: {
            auto g = [&](double t) {
                if (t >= 1.0) return 0.0;
                const double u = 1.0 - t;
                const double z = support.lo + t / u;
                const double v = integrand(z) / (u * u);
                return std::isfinite(v) ? v : 0.0;
            };
            return integrate_adaptive(g, 0.0, 1.0, spec);
        }
        case SupportKind::real_line: {
            auto g = [&](double t) {
                if (t <= -1.0 || t >= 1.0) return 0.0;
                const double u = 1.0 - t * t;
                const double z = t / u;
                const double v = integrand(z) * (1.0 + t * t) / (u * u);
                return std::isfinite(v) ? v : 0.0;
            };
            return integrate_adaptive(g, -1.0, 1.0, spec);
        }
        case SupportKind::nonneg_integers:
            throw unsupported_error("integrate_over_support: discrete support requires summation");
    }
    throw unsupported_error("integrate_over_support: unknown support kind");
}

} // namespace detail

// Exact input-side or family Fisher information, where the model has one.
inline double fim_closed_form(const ModelSpec& model, double theta) {
    if (!model.input_fisher)
        throw unsupported_error("model '" + model.name + "' has no closed-form Fisher information");
    return model.input_fisher(theta);
}

// Fisher information by numerical integration of the squared score against
// the density, with the score obtained by central differences of ln p in
// theta. Discrete supports are summed until the remaining tail mass is
// negligible at the requested tolerance.
inline double fim_quadrature(const ModelSpec& model, double theta, const QuadratureSpec& spec = {}) {
    spec.validate();
    if (!model.log_pdf && !model.pdf)
        throw unsupported_error("model '" + model.name + "' has no analytic density for quadrature");

    std::function<double(double, double)> logp = model.log_pdf;
    if (!logp) logp = [pdf = model.pdf](double z, double t) { return std::log(pdf(z, t)); };
    std::function<double(double, double)> pdf = model.pdf;
    if (!pdf) pdf = [lp = model.log_pdf](double z, double t) { return std::exp(lp(z, t)); };

    const double d = spec.fd_step_theta_rel * std::max(std::abs(theta), 1.0);

    auto score_sq_p = [&](double z) {
        const double p = pdf(z, theta);
        if (!(p > 0.0) || !std::isfinite(p)) return 0.0;
        const double s = (logp(z, theta + d) - logp(z, theta - d)) / (2.0 * d);
        if (!std::isfinite(s)) return 0.0;
        return s * s * p;
    };

    if (model.support.kind == SupportKind::nonneg_integers) {
        double mass = 0.0, total = 0.0;
        const long k_cap = 1000000;
        for (long k = 0;; ++k) {
            if (k > k_cap)
                throw quadrature_failure_error("discrete summation exceeded " + std::to_string(k_cap) +
                                               " terms");
            const double z = static_cast<double>(k);
            const double p = pdf(z, theta);
            total += score_sq_p(z);
            mass += p;
            if (z > theta && mass > 0.0) {
                // Geometric bound on the remaining mass, driven well below
                // rel_tol: the squared score grows with k, so the truncated
                // part of the integrand outweighs its share of the mass.
                const double ratio = theta / (z + 1.0);
                const double tail = p * ratio / (1.0 - ratio);
                if (tail < 1e-4 * spec.rel_tol * mass) break;
            }
        }
        return total;
    }

    return detail::integrate_over_support(model.support, score_sq_p, spec);
}

// Integral of the density itself; handy for verifying normalization.
inline double pdf_normalization(const ModelSpec& model, double theta, const QuadratureSpec& spec = {}) {
    spec.validate();
    if (!model.pdf) throw unsupported_error("model '" + model.name + "' has no density");
    if (model.support.kind == SupportKind::nonneg_integers) {
        double mass = 0.0;
        for (long k = 0; k <= 1000000; ++k) {
            const double p = model.pdf(static_cast<double>(k), theta);
            mass += p;
            if (k > theta && p < spec.rel_tol * mass * 1e-3) break;
        }
        return mass;
    }
    auto f = [&](double z) {
        const double p = model.pdf(z, theta);
        return std::isfinite(p) ? p : 0.0;
    };
    return detail::integrate_over_support(model.support, f, spec);
}

// Cramer-Rao floor on the variance of an unbiased estimator from n samples.
inline double crlb(double fisher_value, std::uint64_t n_samples) {
    if (n_samples < 1) throw validation_error("crlb: need at least one sample");
    if (!(fisher_value > 0.0))
        throw degenerate_information_error("crlb: nonpositive Fisher information (unbounded variance)");
    return 1.0 / (static_cast<double>(n_samples) * fisher_value);
}

} // namespace fibound
