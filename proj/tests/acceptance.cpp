// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fibound/bound.hpp"
#include "fibound/experiments.hpp"
#include "fibound/models.hpp"
#include "fibound/moments.hpp"
#include "fibound/oracle.hpp"
#include "fibound/transforms.hpp"
#include "fibound/validate.hpp"

using namespace fibound;

namespace {

constexpr std::uint64_t kSeed = 20240701;
constexpr std::uint64_t kSamples = 1000000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& fn,
            double time_limit_s = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = fn();
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (time_limit_s > 0.0) {
        if (secs >= time_limit_s) out.pass = false;
        char lim[64];
        std::snprintf(lim, sizeof lim, "; runtime limit %.0f s", time_limit_s);
        out.detail += lim;
    }
    if (!out.pass) ++g_failures;
    std::printf("[%2d] %s  %s (%s; %.1f s)\n", id, out.pass ? "PASS" : "FAIL", name.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
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

double db(double x) { return 10.0 * std::log10(x); }

Outcome from_report(const ValidationReport& rep, const std::string& summary) {
    Outcome out;
    out.pass = rep.passed();
    int failed = 0;
    for (const auto& c : rep.checks)
        if (!c.passed) ++failed;
    std::ostringstream os;
    os << summary;
    if (failed > 0) {
        os << "; " << failed << " failed:";
        for (const auto& c : rep.checks)
            if (!c.passed) os << " [" << c.name << ": " << c.detail << "]";
    }
    out.detail = os.str();
    return out;
}

// ---- criteria -------------------------------------------------------------

Outcome criterion_tightness() {
    const ValidationReport rep = validate_tightness(kSamples, kSeed);
    double worst = 0.0;
    for (const auto& c : rep.checks) {
        const auto pos = c.detail.find("= ");
        if (pos != std::string::npos) worst = std::max(worst, std::stod(c.detail.substr(pos + 2)));
    }
    return from_report(rep, "4 families x 3 thetas, max |bound/F - 1| = " + fmt(worst) +
                                ", limit 0.02");
}

Outcome criterion_conservativeness() {
    const ValidationReport rep = validate_conservativeness(kSamples, kSeed);
    return from_report(rep, "rician, 5 thetas x 5 seeds vs quadrature FIM (1 + 3 eps)");
}

Outcome criterion_eigen_shortcut() {
    DrawSource rng(kSeed, 0xe16e);
    double worst_vec = 0.0, worst_val = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 7;
        const Mat r = random_spd(n, rng);
        const Vec dmu = random_vec(n, rng);

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
        double dotsign = 0.0;
        for (std::size_t i = 0; i < n; ++i) dotsign += got[i] * ed.vectors(i, 0);
        const double flip = dotsign < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            worst_vec = std::max(worst_vec, std::abs(flip * got[i] - ed.vectors(i, 0)));

        const double matched = matched_bound(dmu, r).value;
        worst_val = std::max(worst_val, std::abs(matched / ed.values[0] - 1.0));
    }
    Outcome out;
    out.pass = worst_vec < 1e-10 && worst_val < 1e-10;
    out.detail = "50 fixtures, eigenvector gap " + fmt(worst_vec) + ", eigenvalue rel gap " +
                 fmt(worst_val) + ", limits 1e-10";
    return out;
}

Outcome criterion_matching() {
    const ValidationReport rep = validate_matching(kSamples, kSeed);
    return from_report(rep, "200 random weight vectors on rician moments at theta=1");
}

Outcome criterion_alpha() {
    const ValidationReport rep = validate_appendix_alpha(kSeed);
    return from_report(rep, "20 fixtures x 100 offset perturbations");
}

Outcome criterion_scale_invariance() {
    DrawSource rng(kSeed, 0x5ca1e);
    double worst = 0.0;
    for (int f = 0; f < 20; ++f) {
        const std::size_t n = 5;
        const Mat r = random_spd(n, rng);
        const Vec mu = random_vec(n, rng), dmu = random_vec(n, rng), beta = random_vec(n, rng);
        const double alpha = rng.next_normal();
        const double base = generic_bound(beta, alpha, mu, dmu, r);
        for (double c : {-3.0, 0.5, 10.0}) {
            Vec cb = beta;
            for (double& x : cb) x *= c;
            const double scaled = generic_bound(cb, c * alpha, mu, dmu, r);
            worst = std::max(worst, std::abs(scaled / base - 1.0));
        }
    }
    Outcome out;
    out.pass = worst < 1e-12;
    out.detail = "20 fixtures x c in {-3, 0.5, 10}, worst rel diff " + fmt(worst) + ", limit 1e-12";
    return out;
}

Outcome criterion_monotonicity() {
    const ValidationReport rep = validate_monotonicity(kSamples, kSeed);
    return from_report(rep, "saleh theta=1, nested banks [z] .. full, shared samples");
}

Outcome criterion_figure_saleh() {
    ExperimentConfig cfg;
    cfg.model = "saleh";
    cfg.n_samples = kSamples;
    cfg.seed = kSeed;
    const BoundCurve curve = run_experiment(cfg);

    double lo = 1e300, hi = -1e300;
    for (const auto& p : curve.points) {
        lo = std::min(lo, p.loss_db);
        hi = std::max(hi, p.loss_db);
    }
    const double at_02 = curve.points[1].loss_db;   // theta = 0.2
    const double at_1 = curve.points[9].loss_db;    // theta = 1.0
    const double at_4 = curve.points[39].loss_db;   // theta = 4.0

    Outcome out;
    out.pass = lo >= -10.0 && hi <= 0.0 && at_1 < at_02 && at_1 < at_4;
    out.detail = "loss range [" + fmt(lo) + ", " + fmt(hi) + "] dB in [-10, 0]; loss(1)=" + fmt(at_1) +
                 " below loss(0.2)=" + fmt(at_02) + " and loss(4)=" + fmt(at_4);
    return out;
}

Outcome criterion_figure_rician() {
    ExperimentConfig cfg;
    cfg.model = "rician";
    cfg.n_samples = kSamples;
    cfg.seed = kSeed;
    const BoundCurve curve = run_experiment(cfg);

    double lo = 1e300, hi = -1e300;
    for (const auto& p : curve.points) {
        lo = std::min(lo, p.loss_db);
        hi = std::max(hi, p.loss_db);
    }
    const double at_01 = curve.points[0].loss_db;   // theta = 0.1
    const double at_2 = curve.points[39].loss_db;   // theta = 2.0
    bool monotone = true;
    double worst_dip = 0.0;
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
        const double wiggle = db(1.0 + 3.0 * curve.points[i].mc_rel_se) +
                              db(1.0 + 3.0 * curve.points[i + 1].mc_rel_se);
        const double dip = curve.points[i].loss_db - curve.points[i + 1].loss_db;
        worst_dip = std::max(worst_dip, dip - wiggle);
        if (dip > wiggle) monotone = false;
    }

    Outcome out;
    out.pass = lo >= -25.0 && hi <= 0.0 && at_01 < -12.0 && at_2 > -3.0 && monotone;
    out.detail = "loss range [" + fmt(lo) + ", " + fmt(hi) + "] dB in [-25, 0]; loss(0.1)=" +
                 fmt(at_01) + " < -12; loss(2)=" + fmt(at_2) + " > -3; " +
                 (monotone ? "nondecreasing within wiggle" : "dip beyond wiggle " + fmt(worst_dip));
    return out;
}

Outcome criterion_figure_cubic() {
    ExperimentConfig cfg;
    cfg.model = "cubic";
    cfg.n_samples = kSamples;
    cfg.seed = kSeed;
    const auto curves = run_configured(cfg);

    bool decreasing = true, ordered = true;
    double worst_rise = 0.0;
    for (const auto& [label, curve] : curves) {
        for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
            // 3 eps wiggle on the bound is about 1.5 eps on its square root
            const double tol = 1.5 * (curve.points[i].mc_rel_se + curve.points[i + 1].mc_rel_se);
            const double rise = curve.points[i + 1].nrmse / curve.points[i].nrmse - 1.0;
            worst_rise = std::max(worst_rise, rise - tol);
            if (rise > tol) decreasing = false;
        }
    }
    for (std::size_t i = 0; i < curves[0].second.points.size(); ++i) {
        const double worst_case = curves[0].second.points[i].nrmse;  // a=0, b=1
        const double best_case = curves[3].second.points[i].nrmse;   // a=2, b=2
        for (const auto& [label, curve] : curves) {
            if (curve.points[i].nrmse > worst_case + 1e-12) ordered = false;
            if (curve.points[i].nrmse < best_case - 1e-12) ordered = false;
        }
    }

    Outcome out;
    out.pass = decreasing && ordered;
    out.detail = std::string("4 setups x 19 thetas; ") +
                 (decreasing ? "all curves decreasing within wiggle"
                             : "rise beyond wiggle " + fmt(worst_rise)) +
                 "; a0b1 max / a2b2 min " + (ordered ? "holds" : "violated");
    return out;
}

Outcome criterion_oracle_consistency() {
    double worst = 0.0;
    const ModelSpec families[] = {
        reference_model(ReferenceFamily::gaussian_mean, 1.0),
        reference_model(ReferenceFamily::gaussian_variance),
        reference_model(ReferenceFamily::exponential_rate),
        reference_model(ReferenceFamily::poisson),
    };
    for (const ModelSpec& m : families)
        for (double theta : {0.5, 1.0, 2.0})
            worst = std::max(worst,
                             std::abs(fim_quadrature(m, theta) / m.input_fisher(theta) - 1.0));
    const double rice10 = fim_quadrature(rician_model(), 10.0);

    Outcome out;
    out.pass = worst < 1e-6 && std::abs(rice10 - 1.0) < 0.05;
    out.detail = "families worst rel err " + fmt(worst) + " (limit 1e-6); rician F(10) = " +
                 fmt(rice10) + " within 5% of 1";
    return out;
}

Outcome criterion_determinism() {
    ExperimentConfig cfg;
    cfg.model = "rician";
    cfg.theta_min = 0.4;
    cfg.theta_max = 1.2;
    cfg.theta_steps = 5;
    cfg.n_samples = 50000;
    cfg.seed = kSeed;

    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = dir / "fibound_acc_det1.csv";
    const auto p2 = dir / "fibound_acc_det2.csv";
    const auto p3 = dir / "fibound_acc_det3.csv";

    cfg.n_threads = 1;
    emit_csv(run_experiment(cfg), p1.string());
    emit_csv(run_experiment(cfg), p2.string());
    cfg.n_threads = 8;
    emit_csv(run_experiment(cfg), p3.string());

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    const std::string a = slurp(p1), b = slurp(p2), c = slurp(p3);

    Outcome out;
    out.pass = !a.empty() && a == b && a == c;
    out.detail = std::string("repeat run ") + (a == b ? "byte-identical" : "differs") +
                 "; 8-thread vs serial " + (a == c ? "byte-identical" : "differs");
    return out;
}

} // namespace

int main() {
    std::printf("acceptance: seed %llu, %llu samples per estimate\n",
                static_cast<unsigned long long>(kSeed), static_cast<unsigned long long>(kSamples));

    report(1, "tightness on exponential families", criterion_tightness, 30.0);
    report(2, "conservativeness against the quadrature oracle", criterion_conservativeness);
    report(3, "rank-one eigen shortcut identities", criterion_eigen_shortcut);
    report(4, "matched bound dominates generic bound", criterion_matching);
    report(5, "offset optimality", criterion_alpha);
    report(6, "weight scale invariance", criterion_scale_invariance);
    report(7, "transform-set monotonicity", criterion_monotonicity);
    report(8, "saleh loss curve shape", criterion_figure_saleh, 180.0);
    report(9, "rician loss curve shape", criterion_figure_rician);
    report(10, "cubic nrmse curve shape", criterion_figure_cubic);
    report(11, "oracle self-consistency", criterion_oracle_consistency);
    report(12, "deterministic output", criterion_determinism);

    if (g_failures == 0) {
        std::printf("acceptance: all 12 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return 1;
}
