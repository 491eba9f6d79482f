#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fibound/bound.hpp"
#include "fibound/models.hpp"
#include "fibound/moments.hpp"
#include "fibound/transforms.hpp"

using namespace fibound;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Plain Gaussian elimination with partial pivoting; the independent solve
// oracle for the regularized paths.
Vec dense_solve(Mat a, Vec b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    Vec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t c = ii + 1; c < n; ++c) s -= a(ii, c) * x[c];
        x[ii] = s / a(ii, ii);
    }
    return x;
}

Mat random_spd(std::size_t n, DrawSource& rng, double jitter = 0.3) {
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.next_normal();
    Mat r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = i == j ? jitter : 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a(k, i) * a(k, j);
            r(i, j) = s;
        }
    return r;
}

Vec random_vec(std::size_t n, DrawSource& rng) {
    Vec v(n);
    for (double& x : v) x = rng.next_normal();
    return v;
}

} // namespace

TEST_CASE("jacobi eigendecomposition on a known matrix") {
    Mat m(2, 2);
    m(0, 0) = 2.0; m(0, 1) = 1.0;
    m(1, 0) = 1.0; m(1, 1) = 2.0;
    const SymEigen e = jacobi_eigen(m);
    CHECK_THAT(e.values[0], WithinRel(3.0, 1e-14));
    CHECK_THAT(e.values[1], WithinRel(1.0, 1e-14));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK_THAT(std::abs(e.vectors(0, 0)), WithinRel(inv_sqrt2, 1e-12));
    CHECK_THAT(std::abs(e.vectors(1, 0)), WithinRel(inv_sqrt2, 1e-12));
}

TEST_CASE("jacobi reconstructs random symmetric matrices") {
    DrawSource rng(17, 0);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 7;
        const Mat r = random_spd(n, rng);
        const SymEigen e = jacobi_eigen(r);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
                CHECK_THAT(s, WithinAbs(r(i, j), 1e-10 * (1.0 + std::abs(r(i, j)))));
            }
    }
}

TEST_CASE("derivative_mu on synthetic triples") {
    // exact quadratic mean: mu(theta) = theta^2 at theta=1, h=0.1
    MomentTriple t;
    t.h = 0.1;
    t.at_minus.mean = {0.81};
    t.at_center.mean = {1.0};
    t.at_plus.mean = {1.21};
    CHECK_THAT(derivative_mu(t)[0], WithinRel(2.0, 1e-14));
    t.h = -1.0;
    CHECK_THROWS_AS(derivative_mu(t), validation_error);
}

TEST_CASE("gaussian variance slope of the z^2 transform") {
    const ModelSpec m = reference_model(ReferenceFamily::gaussian_variance);
    const MomentTriple t = estimate_triple(m, parse_transform_spec("z2"), 1.0, 0.01, 1000000, 99);
    CHECK_THAT(derivative_mu(t)[0], WithinRel(1.0, 0.01));
}

TEST_CASE("solve_covariance identity and pseudo-inverse cases") {
    const Mat eye = Mat::identity(3);
    const Vec v{1.0, 0.0, 0.0};
    for (auto policy : {RegularizationPolicy::truncated(), RegularizationPolicy::ridge()}) {
        const CovarianceSolution s = solve_covariance(eye, v, policy);
        for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(s.x[i], WithinAbs(v[i], 1e-9));
        CHECK(s.effective_rank == 3);
    }

    Mat ones(2, 2, 1.0);
    const CovarianceSolution s = solve_covariance(ones, Vec{1.0, 1.0}, RegularizationPolicy::truncated());
    CHECK_THAT(s.x[0], WithinRel(0.5, 1e-12));
    CHECK_THAT(s.x[1], WithinRel(0.5, 1e-12));
    CHECK(s.effective_rank == 1);
}

TEST_CASE("ridge converges to the exact dense solve") {
    DrawSource rng(23, 1);
    const std::size_t n = 7;
    const Mat r = random_spd(n, rng);
    const Vec v = random_vec(n, rng);
    const Vec exact = dense_solve(r, v);
    const CovarianceSolution s = solve_covariance(r, v, RegularizationPolicy::ridge(1e-12));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (s.x[i] - exact[i]) * (s.x[i] - exact[i]);
        den += exact[i] * exact[i];
    }
    CHECK(std::sqrt(num / den) < 1e-8);
}

TEST_CASE("solve_covariance error paths") {
    Mat asym(2, 2);
    asym(0, 0) = 1.0; asym(0, 1) = 0.5;
    asym(1, 0) = 0.2; asym(1, 1) = 1.0;
    CHECK_THROWS_AS(solve_covariance(asym, Vec{1.0, 1.0}), validation_error);

    const Mat zero(2, 2, 0.0);
    CHECK_THROWS_AS(solve_covariance(zero, Vec{1.0, 1.0}), degenerate_covariance_error);
    CHECK_THROWS_AS(solve_covariance(zero, Vec{1.0, 1.0}, RegularizationPolicy::ridge()),
                    degenerate_covariance_error);

    CHECK_THROWS_AS(solve_covariance(Mat::identity(2), Vec{1.0, 1.0, 1.0}), validation_error);
    CHECK_THROWS_AS(solve_covariance(Mat::identity(2), Vec{1.0, 1.0},
                                     RegularizationPolicy{RegularizationMode::ridge, 1.5}),
                    validation_error);
}

TEST_CASE("matched bound on small fixtures") {
    CHECK_THAT(matched_bound(Vec{1.0, 0.0}, Mat::identity(2)).value, WithinRel(1.0, 1e-12));

    Mat diag(2, 2);
    diag(0, 0) = 1.0;
    diag(1, 1) = 4.0;
    CHECK_THAT(matched_bound(Vec{1.0, 1.0}, diag).value, WithinRel(1.25, 1e-12));

    const Mat ones(2, 2, 1.0);
    const BoundPoint p = matched_bound(Vec{1.0, 1.0}, ones);
    CHECK_THAT(p.value, WithinRel(1.0, 1e-12));
    CHECK(p.effective_rank == 1);
    CHECK(p.value >= 0.0);
    CHECK_FALSE(p.clipped);
}

TEST_CASE("optimal weights on identity metrics") {
    const Vec w1 = optimal_weights_normalized(Vec{1.0, 0.0}, Mat::identity(2));
    CHECK_THAT(w1[0], WithinRel(1.0, 1e-12));
    CHECK_THAT(w1[1], WithinAbs(0.0, 1e-12));
    const Vec w2 = optimal_weights_normalized(Vec{3.0, 4.0}, Mat::identity(2));
    CHECK_THAT(w2[0], WithinRel(0.6, 1e-12));
    CHECK_THAT(w2[1], WithinRel(0.8, 1e-12));
}

TEST_CASE("weights match the dominant eigenvector of the explicit rank-one matrix") {
    DrawSource rng(31, 2);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 7;
        const Mat r = random_spd(n, rng);
        const Vec dmu = random_vec(n, rng);

        // explicit route: form S = R^(-1/2) spectrally, then D = S dmu (S dmu)^T
        const SymEigen er = jacobi_eigen(r);
        Mat s(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    acc += er.vectors(i, k) * er.vectors(j, k) / std::sqrt(er.values[k]);
                s(i, j) = acc;
            }
        const Vec w = s * dmu;
        Mat d(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d(i, j) = w[i] * w[j];
        const SymEigen ed = jacobi_eigen(d);

        const Vec got = optimal_weights_normalized(dmu, r);
        double sign = 0.0;
        for (std::size_t i = 0; i < n; ++i) sign += got[i] * ed.vectors(i, 0);
        for (std::size_t i = 0; i < n; ++i)
            CHECK_THAT(got[i] * (sign < 0 ? -1.0 : 1.0), WithinAbs(ed.vectors(i, 0), 1e-10));

        const double matched = matched_bound(dmu, r).value;
        CHECK_THAT(matched, WithinRel(ed.values[0], 1e-10));
    }
}

TEST_CASE("generic bound recovers the exact gaussian information") {
    const double theta = 0.7, sigma2 = 2.0;
    const Vec mu{theta}, dmu{1.0};
    Mat r(1, 1);
    r(0, 0) = sigma2;

    CHECK_THAT(generic_bound(Vec{1.0}, theta, mu, dmu, r), WithinRel(1.0 / sigma2, 1e-14));
    CHECK_THAT(generic_bound(Vec{-2.5}, -2.5 * theta, mu, dmu, r), WithinRel(1.0 / sigma2, 1e-14));
    CHECK_THAT(generic_bound(Vec{1.0}, theta + 1.0, mu, dmu, r),
               WithinRel(1.0 / (sigma2 + 1.0), 1e-14));
}

TEST_CASE("generic bound is scale invariant") {
    DrawSource rng(5, 5);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 4;
        const Mat r = random_spd(n, rng);
        const Vec mu = random_vec(n, rng), dmu = random_vec(n, rng), beta = random_vec(n, rng);
        const double alpha = rng.next_normal();
        const double base = generic_bound(beta, alpha, mu, dmu, r);
        for (double c : {-3.0, 0.5, 10.0}) {
            Vec cb = beta;
            for (double& x : cb) x *= c;
            CHECK_THAT(generic_bound(cb, c * alpha, mu, dmu, r), WithinRel(base, 1e-12));
        }
    }
}

TEST_CASE("generic bound error paths") {
    const Mat eye = Mat::identity(2);
    CHECK_THROWS_AS(generic_bound(Vec{0.0, 0.0}, 0.0, Vec{0.0, 0.0}, Vec{1.0, 1.0}, eye),
                    degenerate_weights_error);
    const Mat zero(1, 1, 0.0);
    CHECK_THROWS_AS(generic_bound(Vec{1.0}, 0.0, Vec{0.0}, Vec{1.0}, zero), degenerate_weights_error);
    CHECK_THROWS_AS(generic_bound(Vec{1.0}, 0.0, Vec{0.0, 1.0}, Vec{1.0}, zero), validation_error);
}

TEST_CASE("optimal alpha") {
    CHECK(optimal_alpha(Vec{1.0}, Vec{0.7}) == 0.7);
    CHECK(optimal_alpha(Vec{1.0, -2.0}, Vec{3.0, 1.0}) == 1.0);
    CHECK_THROWS_AS(optimal_alpha(Vec{1.0}, Vec{1.0, 2.0}), validation_error);
}

TEST_CASE("optimal alpha maximizes the generic bound") {
    DrawSource rng(8, 3);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 5;
        const Mat r = random_spd(n, rng);
        const Vec mu = random_vec(n, rng), dmu = random_vec(n, rng), beta = random_vec(n, rng);
        const double star = optimal_alpha(beta, mu);
        const double best = generic_bound(beta, star, mu, dmu, r);
        for (int d = 0; d < 40; ++d) {
            double delta = 2.0 * rng.next_uniform() - 1.0;
            if (delta == 0.0) delta = 0.3;
            CHECK(best > generic_bound(beta, star + delta, mu, dmu, r));
        }
    }
}

TEST_CASE("matched bound dominates the generic bound on estimated moments") {
    const MomentTriple t =
        estimate_triple(rician_model(), standard_transform_set(), 1.0, 0.01, 50000, 77);
    const Vec dmu = derivative_mu(t);
    const double matched = matched_bound(dmu, t.at_center.cov).value;
    DrawSource rng(12, 9);
    for (int k = 0; k < 100; ++k) {
        const Vec beta = random_vec(7, rng);
        const double g = generic_bound(beta, optimal_alpha(beta, t.at_center.mean), t.at_center.mean,
                                       dmu, t.at_center.cov);
        CHECK(g <= matched * (1.0 + 1e-10));
    }
}

TEST_CASE("nested transform banks never lose information") {
    const MomentTriple t =
        estimate_triple(saleh_model(2.1587, 1.1517), standard_transform_set(), 1.0, 0.01, 100000, 3);
    const Vec dmu_full = derivative_mu(t);
    double prev = 0.0;
    for (std::size_t l = 1; l <= 7; ++l) {
        Mat sub(l, l);
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t j = 0; j < l; ++j) sub(i, j) = t.at_center.cov(i, j);
        const Vec dmu(dmu_full.begin(), dmu_full.begin() + l);
        const double value = matched_bound(dmu, sub).value;
        CHECK(value >= prev - 1e-10);
        prev = value;
    }
}
