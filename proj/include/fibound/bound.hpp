#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fibound/errors.hpp"
#include "fibound/linalg.hpp"
#include "fibound/moments.hpp"

namespace fibound {

enum class RegularizationMode { ridge, truncated_spectrum };

// How to treat an ill-conditioned covariance estimate when solving R x = v.
// Ridge shifts the whole spectrum; truncated_spectrum drops the numerically
// degenerate directions and applies the pseudo-inverse, which keeps the
// quadratic form a valid lower bound restricted to realizable directions.
struct RegularizationPolicy {
    RegularizationMode mode = RegularizationMode::truncated_spectrum;
    double tol_rel = 1e-10;  // lambda_rel (ridge) or rank_tol_rel (truncation), in (0, 1)

    static RegularizationPolicy ridge(double lambda_rel = 1e-10) {
        return {RegularizationMode::ridge, lambda_rel};
    }
    static RegularizationPolicy truncated(double rank_tol_rel = 1e-10) {
        return {RegularizationMode::truncated_spectrum, rank_tol_rel};
    }

    void validate() const {
        if (!(tol_rel > 0.0 && tol_rel < 1.0))
            throw validation_error("regularization tolerance must lie in (0, 1)");
    }
};

struct CovarianceSolution {
    Vec x;
    double cond = 0.0;        // largest / smallest retained eigenvalue
    int effective_rank = 0;
};

struct BoundPoint {
    double theta = std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;   // lower bound on F(theta), nonnegative
    Vec weights;          // solve of the covariance against dmu, unnormalized
    Vec dmu;              // estimated d/dtheta of the transform mean
    double cond = 0.0;
    int effective_rank = 0;
    bool clipped = false;  // true if a tiny negative quadratic form was clipped to 0
};

namespace detail {

inline void require_symmetric(const Mat& r) {
    if (!r.square()) throw validation_error("covariance must be square");
    const double gap = symmetry_gap(r);
    if (gap > 1e-12 * (1.0 + max_abs(r)))
        throw validation_error("covariance not symmetric: gap " + std::to_string(gap));
}

} // namespace detail

// Central-difference slope of the transform mean across a CRN triple.
inline Vec derivative_mu(const MomentTriple& triple) {
    if (!(triple.h > 0.0)) throw validation_error("derivative_mu: triple has nonpositive h");
    const std::size_t d = triple.at_plus.mean.size();
    if (triple.at_minus.mean.size() != d) throw validation_error("derivative_mu: dimension mismatch");
    Vec out(d);
    const double inv = 1.0 / (2.0 * triple.h);
    for (std::size_t i = 0; i < d; ++i) out[i] = (triple.at_plus.mean[i] - triple.at_minus.mean[i]) * inv;
    return out;
}

// Solves R x = v under the given policy and reports conditioning.
//
// The transform variances can span many orders of magnitude (a z^4 column
// next to a ln|z| column), so the truncated mode works on the diagonally
// equilibrated matrix C = S R S with S = diag(R_ii^-1/2): the exact
// quadratic form is invariant under this rescaling, while a rank tolerance
// applied to the raw spectrum of R would silently delete small-scale
// transforms that are not degenerate at all. Exact linear dependencies
// (duplicated columns) stay at eigenvalue zero in C and are still removed.
inline CovarianceSolution solve_covariance(const Mat& r, const Vec& v,
                                           const RegularizationPolicy& policy = {}) {
    policy.validate();
    detail::require_symmetric(r);
    const std::size_t n = r.rows();
    if (v.size() != n) throw validation_error("solve_covariance: vector length mismatch");

    CovarianceSolution sol;

    if (policy.mode == RegularizationMode::ridge) {
        const SymEigen eig = jacobi_eigen(r);
        const double lam_max = eig.values.front();
        if (!(lam_max > 0.0))
            throw degenerate_covariance_error("covariance has no positive eigenvalue");
        const double shift = policy.tol_rel * lam_max;
        Mat shifted = r;
        for (std::size_t i = 0; i < n; ++i) shifted(i, i) += shift;
        if (!cholesky_factor(shifted))
            throw degenerate_covariance_error(
                "ridge-shifted covariance is not positive definite; use truncated spectrum");
        sol.x = cholesky_solve(shifted, v);
        const double lam_min = eig.values.back();
        sol.cond = lam_min > 0.0 ? lam_max / lam_min : std::numeric_limits<double>::infinity();
        sol.effective_rank = static_cast<int>(n);
        return sol;
    }

    // Truncated spectrum on the equilibrated matrix.
    Vec scale(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = r(i, i);
        scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    Mat c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = r(i, j) * scale[i] * scale[j];

    const SymEigen eig = jacobi_eigen(c);
    const double lam_max = eig.values.front();
    if (!(lam_max > 0.0))
        throw degenerate_covariance_error("covariance has no eigenvalue above the rank tolerance");
    const double tol = policy.tol_rel * lam_max;

    Vec vs(n);
    for (std::size_t i = 0; i < n; ++i) vs[i] = v[i] * scale[i];

    Vec xs(n, 0.0);
    double lam_min_kept = lam_max;
    int rank = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = eig.values[k];
        if (!(lam > tol)) break;  // values are sorted descending
        ++rank;
        lam_min_kept = lam;
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += eig.vectors(i, k) * vs[i];
        const double coef = proj / lam;
        for (std::size_t i = 0; i < n; ++i) xs[i] += coef * eig.vectors(i, k);
    }
    sol.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.x[i] = xs[i] * scale[i];
    sol.cond = lam_max / lam_min_kept;
    sol.effective_rank = rank;
    return sol;
}

// Matched lower bound on the Fisher information: the quadratic form of the
// mean slope against the inverse covariance. Fills every BoundPoint field
// except theta, which the caller owns.
inline BoundPoint matched_bound(const Vec& dmu, const Mat& r, const RegularizationPolicy& policy = {}) {
    CovarianceSolution sol = solve_covariance(r, dmu, policy);
    BoundPoint p;
    p.value = dot(dmu, sol.x);
    if (p.value < 0.0) {
        // Spectral truncation can leave a tiny negative residue; the
        // information measure itself is nonnegative.
        p.value = 0.0;
        p.clipped = true;
    }
    p.weights = std::move(sol.x);
    p.dmu = dmu;
    p.cond = sol.cond;
    p.effective_rank = sol.effective_rank;
    return p;
}

// Unit-norm optimal weight direction: R^(-1/2) dmu normalized, computed via
// the spectral square root of R under the policy. Up to sign this equals
// the principal eigenvector of the rank-one matrix
// R^(-1/2) dmu dmu^T R^(-1/2), whose eigenvalue is the matched bound.
inline Vec optimal_weights_normalized(const Vec& dmu, const Mat& r,
                                      const RegularizationPolicy& policy = {}) {
    policy.validate();
    detail::require_symmetric(r);
    const std::size_t n = r.rows();
    if (dmu.size() != n) throw validation_error("optimal_weights_normalized: length mismatch");

    const SymEigen eig = jacobi_eigen(r);
    const double lam_max = eig.values.front();
    if (!(lam_max > 0.0)) throw degenerate_covariance_error("covariance has no positive eigenvalue");

    Vec w(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double lam = eig.values[k];
        if (policy.mode == RegularizationMode::ridge) {
            lam += policy.tol_rel * lam_max;
            if (!(lam > 0.0)) continue;
        } else {
            if (!(lam > policy.tol_rel * lam_max)) break;
        }
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += eig.vectors(i, k) * dmu[i];
        const double coef = proj / std::sqrt(lam);
        for (std::size_t i = 0; i < n; ++i) w[i] += coef * eig.vectors(i, k);
    }
    const double norm = norm2(w);
    if (!(norm > 0.0))
        throw degenerate_weights_error("mean slope is orthogonal to every retained direction");
    for (double& x : w) x /= norm;
    return w;
}

// Cauchy-Schwarz lower bound with free weights beta and offset alpha:
//   (beta.dmu)^2 / (beta'R beta + (alpha - beta.mu)^2).
// With alpha = beta.mu the second denominator term vanishes and the bound
// takes its strongest form for that beta.
inline double generic_bound(const Vec& beta, double alpha, const Vec& mu, const Vec& dmu,
                            const Mat& r) {
    const std::size_t n = beta.size();
    if (mu.size() != n || dmu.size() != n || r.rows() != n || !r.square())
        throw validation_error("generic_bound: dimension mismatch");
    bool all_zero = true;
    for (double b : beta)
        if (b != 0.0) all_zero = false;
    if (all_zero) throw degenerate_weights_error("generic_bound: beta is identically zero");

    const double num_root = dot(beta, dmu);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += r(i, j) * beta[j];
        quad += beta[i] * row;
    }
    const double off = alpha - dot(beta, mu);
    const double den = quad + off * off;
    if (!(den > 0.0))
        throw degenerate_weights_error("generic_bound: zero denominator (beta in covariance null space"
                                       " with alpha matched)");
    return num_root * num_root / den;
}

// The offset that maximizes generic_bound for fixed beta.
inline double optimal_alpha(const Vec& beta, const Vec& mu) {
    if (beta.size() != mu.size()) throw validation_error("optimal_alpha: length mismatch");
    return dot(beta, mu);
}

} // namespace fibound
