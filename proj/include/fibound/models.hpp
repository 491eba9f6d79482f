#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "fibound/errors.hpp"
#include "fibound/rng.hpp"
#include "fibound/special.hpp"

namespace fibound {

struct ThetaDomain {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_inclusive = false;
    bool hi_inclusive = false;

    bool contains(double theta) const {
        if (theta < lo || (theta == lo && !lo_inclusive)) return false;
        if (theta > hi || (theta == hi && !hi_inclusive)) return false;
        return true;
    }

    std::string describe() const {
        auto num = [](double v) {
            if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
            return std::to_string(v);
        };
        return (lo_inclusive ? "[" : "(") + num(lo) + ", " + num(hi) + (hi_inclusive ? "]" : ")");
    }
};

namespace detail {
inline void require_theta_in(const ThetaDomain& dom, const std::string& name, double theta) {
    if (!dom.contains(theta))
        throw domain_error("model '" + name + "': theta=" + std::to_string(theta) +
                           " outside domain " + dom.describe());
}
} // namespace detail

// Support of the output z, used by the quadrature oracle.
enum class SupportKind { real_line, half_line, finite_interval, nonneg_integers };

struct Support {
    SupportKind kind = SupportKind::real_line;
    double lo = 0.0;
    double hi = 0.0;
};

// A black-box stochastic system z(theta, draws). The sampler is the only
// mandatory piece; pdf/log_pdf and input_fisher exist where an analytic
// reference is available. All members are pure given the DrawSource, so a
// ModelSpec can be shared freely across workers.
struct ModelSpec {
    std::string name;
    std::function<double(double theta, DrawSource&)> sample;
    std::function<double(double z, double theta)> pdf;        // may be empty
    std::function<double(double z, double theta)> log_pdf;    // may be empty
    std::function<double(double theta)> input_fisher;         // may be empty
    ThetaDomain theta_domain;
    Support support;

    void require_theta(double theta) const { detail::require_theta_in(theta_domain, name, theta); }
};

// Deterministic response maps, separated from the samplers so the
// input-to-output behaviour is directly testable.
inline double saleh_response(double a, double b, double x) { return a * x / (1.0 + b * x * x); }
inline double rician_magnitude(double theta, double angle, double n1, double n2) {
    return std::hypot(theta * std::cos(angle) + n1, theta * std::sin(angle) + n2);
}
inline double cubic_response(double theta, double x) { return theta * x * x * x + x; }

// Poisson quantile by sequential CDF search; exact and deterministic for the
// small means used here. The probability recurrence can stall just below 1
// once terms underflow, so the walk stops when that happens.
inline long poisson_inverse_cdf(double theta, double u) {
    double p = std::exp(-theta);
    double cum = p;
    long k = 0;
    while (u > cum) {
        ++k;
        p *= theta / static_cast<double>(k);
        cum += p;
        if (p < 1e-290 && k > theta) break;
    }
    return k;
}

// Memoryless amplifier nonlinearity z = a*x / (1 + b*x^2) with Gaussian
// input x ~ N(0, theta); theta is the input power being measured.
inline ModelSpec saleh_model(double a, double b) {
    if (a == 0.0) throw validation_error("saleh_model: gain a must be nonzero");
    if (!(b > 0.0)) throw validation_error("saleh_model: saturation b must be positive");
    ModelSpec m;
    m.name = "saleh";
    m.theta_domain = {0.0, std::numeric_limits<double>::infinity(), false, false};
    // |z| <= a / (2 sqrt(b)), so the support is a finite interval.
    const double zmax = std::abs(a) / (2.0 * std::sqrt(b));
    m.support = {SupportKind::finite_interval, -zmax, zmax};
    m.sample = [dom = m.theta_domain, name = m.name, a, b](double theta, DrawSource& d) {
        detail::require_theta_in(dom, name, theta);
        const double x = std::sqrt(theta) * d.next_normal();
        return saleh_response(a, b, x);
    };
    m.input_fisher = [dom = m.theta_domain, name = m.name](double theta) {
        detail::require_theta_in(dom, name, theta);
        return 1.0 / (2.0 * theta * theta);
    };
    return m;
}

// Magnitude of a bivariate Gaussian with mean distance theta and unit
// component variances: z = sqrt(x1^2 + x2^2). The density depends on theta
// only, not on the angle.
inline ModelSpec rician_model(double angle_a = std::numbers::pi / 7.0) {
    ModelSpec m;
    m.name = "rician";
    m.theta_domain = {0.0, std::numeric_limits<double>::infinity(), true, false};
    m.support = {SupportKind::half_line, 0.0, 0.0};
    m.sample = [dom = m.theta_domain, name = m.name, angle_a](double theta, DrawSource& d) {
        detail::require_theta_in(dom, name, theta);
        const double n1 = d.next_normal();
        const double n2 = d.next_normal();
        return rician_magnitude(theta, angle_a, n1, n2);
    };
    m.log_pdf = [](double z, double theta) {
        if (z <= 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(z) - (z * z + theta * theta) / 2.0 + log_bessel_i0(z * theta);
    };
    m.pdf = [lp = m.log_pdf](double z, double theta) { return z > 0.0 ? std::exp(lp(z, theta)) : 0.0; };
    m.input_fisher = [dom = m.theta_domain, name = m.name](double theta) {
        detail::require_theta_in(dom, name, theta);
        return 1.0;
    };
    return m;
}

// Cubic regression system z = theta*x^3 + x with Gaussian input x ~ N(a, b).
inline ModelSpec cubic_model(double input_mean_a, double input_var_b) {
    if (!(input_var_b > 0.0)) throw validation_error("cubic_model: input variance b must be positive");
    ModelSpec m;
    m.name = "cubic";
    m.theta_domain = {0.0, std::numeric_limits<double>::infinity(), false, false};
    m.support = {SupportKind::real_line, 0.0, 0.0};
    const double sd = std::sqrt(input_var_b);
    m.sample = [dom = m.theta_domain, name = m.name, input_mean_a, sd](double theta, DrawSource& d) {
        detail::require_theta_in(dom, name, theta);
        const double x = input_mean_a + sd * d.next_normal();
        return cubic_response(theta, x);
    };
    return m;
}

enum class ReferenceFamily { gaussian_mean, gaussian_variance, exponential_rate, poisson };

// Exponential-family reference systems with known Fisher information,
// used as tightness and conservativeness oracles.
inline ModelSpec reference_model(ReferenceFamily family, double sigma2 = 1.0) {
    ModelSpec m;
    const ThetaDomain positive{0.0, std::numeric_limits<double>::infinity(), false, false};
    switch (family) {
        case ReferenceFamily::gaussian_mean: {
            if (!(sigma2 > 0.0)) throw validation_error("reference_model: sigma2 must be positive");
            m.name = "ref:gauss-mean";
            m.theta_domain = {};  // all of R
            m.support = {SupportKind::real_line, 0.0, 0.0};
            const double sd = std::sqrt(sigma2);
            m.sample = [sd](double theta, DrawSource& d) { return theta + sd * d.next_normal(); };
            m.log_pdf = [sigma2](double z, double theta) {
                const double r = z - theta;
                return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - r * r / (2.0 * sigma2);
            };
            m.input_fisher = [sigma2](double) { return 1.0 / sigma2; };
            break;
        }
        case ReferenceFamily::gaussian_variance: {
            m.name = "ref:gauss-var";
            m.theta_domain = positive;
            m.support = {SupportKind::real_line, 0.0, 0.0};
            m.sample = [positive, name = m.name](double theta, DrawSource& d) {
                detail::require_theta_in(positive, name, theta);
                return std::sqrt(theta) * d.next_normal();
            };
            m.log_pdf = [](double z, double theta) {
                return -0.5 * std::log(2.0 * std::numbers::pi * theta) - z * z / (2.0 * theta);
            };
            m.input_fisher = [positive, name = m.name](double theta) {
                detail::require_theta_in(positive, name, theta);
                return 1.0 / (2.0 * theta * theta);
            };
            break;
        }
        case ReferenceFamily::exponential_rate: {
            m.name = "ref:exp";
            m.theta_domain = positive;
            m.support = {SupportKind::half_line, 0.0, 0.0};
            m.sample = [positive, name = m.name](double theta, DrawSource& d) {
                detail::require_theta_in(positive, name, theta);
                return -std::log1p(-d.next_uniform()) / theta;
            };
            m.log_pdf = [](double z, double theta) {
                if (z < 0.0) return -std::numeric_limits<double>::infinity();
                return std::log(theta) - theta * z;
            };
            m.input_fisher = [positive, name = m.name](double theta) {
                detail::require_theta_in(positive, name, theta);
                return 1.0 / (theta * theta);
            };
            break;
        }
        case ReferenceFamily::poisson: {
            m.name = "ref:poisson";
            m.theta_domain = positive;
            m.support = {SupportKind::nonneg_integers, 0.0, 0.0};
            m.sample = [positive, name = m.name](double theta, DrawSource& d) {
                detail::require_theta_in(positive, name, theta);
                return static_cast<double>(poisson_inverse_cdf(theta, d.next_uniform()));
            };
            m.log_pdf = [](double z, double theta) {
                return -theta + z * std::log(theta) - std::lgamma(z + 1.0);
            };
            m.input_fisher = [positive, name = m.name](double theta) {
                detail::require_theta_in(positive, name, theta);
                return 1.0 / theta;
            };
            break;
        }
    }
    if (!m.pdf && m.log_pdf)
        m.pdf = [lp = m.log_pdf](double z, double theta) { return std::exp(lp(z, theta)); };
    return m;
}

} // namespace fibound
