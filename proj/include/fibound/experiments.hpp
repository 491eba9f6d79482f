#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fibound/bound.hpp"
#include "fibound/errors.hpp"
#include "fibound/models.hpp"
#include "fibound/moments.hpp"
#include "fibound/oracle.hpp"
#include "fibound/transforms.hpp"

namespace fibound {

// Flat experiment description. Keys in config files and CLI flags carry the
// same names (dashes in place of underscores). NaN / negative sentinels mean
// "use the model's default".
struct ExperimentConfig {
    std::string model = "rician";
    double a = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();
    double sigma2 = 1.0;
    std::string transforms = "z,z2,z3,z4,abs,logabs,logabs2";
    double theta_min = std::numeric_limits<double>::quiet_NaN();
    double theta_max = std::numeric_limits<double>::quiet_NaN();
    int theta_steps = -1;
    std::uint64_t n_samples = 1000000;
    double fd_step = 0.01;  // h = fd_step * max(|theta|, 1), halved into the domain
    std::uint64_t seed = 1;
    std::string reg_mode = "trunc";  // trunc | ridge
    double reg_tol = 1e-10;
    std::string csv;
    std::string svg;
    unsigned n_threads = 0;  // 0 = hardware; has no effect on results

    RegularizationPolicy regularization() const {
        if (reg_mode == "trunc") return RegularizationPolicy::truncated(reg_tol);
        if (reg_mode == "ridge") return RegularizationPolicy::ridge(reg_tol);
        throw parse_error("unknown reg-mode '" + reg_mode + "' (expected trunc or ridge)");
    }
};

struct CurvePoint {
    BoundPoint point;
    double input_fisher = std::numeric_limits<double>::quiet_NaN();
    double loss_db = std::numeric_limits<double>::quiet_NaN();
    double crlb = std::numeric_limits<double>::quiet_NaN();
    double nrmse = std::numeric_limits<double>::quiet_NaN();
    double mc_rel_se = std::numeric_limits<double>::quiet_NaN();  // 16-block bootstrap
    std::string error;  // empty when the point succeeded
    bool flagged = false;
};

struct BoundCurve {
    std::vector<CurvePoint> points;
    std::string meta;          // canonical config echo
    std::uint64_t fingerprint = 0;
};

// Ratio of the measured output bound to the input-side information, in dB.
// A bound of exactly zero (or below the -300 dB floor) is reported as the
// distinguished floor marker -300.
inline double information_loss_db(double bound_value, double input_fisher) {
    if (!(input_fisher > 0.0)) throw domain_error("information_loss_db: input_fisher must be positive");
    if (!(bound_value > 0.0)) return -300.0;
    const double db = 10.0 * std::log10(bound_value / input_fisher);
    return db < -300.0 ? -300.0 : db;
}

// Root of the single-sample pessimistic CRLB normalized by |theta|.
inline double nrmse(double crlb_value, double theta) {
    if (theta == 0.0) throw domain_error("nrmse: theta must be nonzero");
    if (!(crlb_value > 0.0)) throw validation_error("nrmse: crlb must be positive");
    return std::sqrt(crlb_value) / std::abs(theta);
}

namespace detail {

inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

} // namespace detail

// Model selection string -> ModelSpec, applying per-model parameter
// defaults. For "cubic" both a and b must be resolved by the caller (see
// run_configured, which expands the four-figure setup).
inline ModelSpec make_model(const ExperimentConfig& cfg) {
    const bool has_a = !std::isnan(cfg.a);
    const bool has_b = !std::isnan(cfg.b);
    if (cfg.model == "saleh")
        return saleh_model(has_a ? cfg.a : 2.1587, has_b ? cfg.b : 1.1517);
    if (cfg.model == "rician")
        return rician_model(has_a ? cfg.a : std::numbers::pi / 7.0);
    if (cfg.model == "cubic")
        return cubic_model(has_a ? cfg.a : 0.0, has_b ? cfg.b : 1.0);
    if (cfg.model == "ref:gauss-mean") return reference_model(ReferenceFamily::gaussian_mean, cfg.sigma2);
    if (cfg.model == "ref:gauss-var") return reference_model(ReferenceFamily::gaussian_variance);
    if (cfg.model == "ref:exp") return reference_model(ReferenceFamily::exponential_rate);
    if (cfg.model == "ref:poisson") return reference_model(ReferenceFamily::poisson);
    throw parse_error("unknown model '" + cfg.model + "'");
}

// Default grids mirror the displayed ranges of the three case studies.
// The Rician grid starts at 0.1: at smaller distances the true output
// information falls below the -25 dB display floor.
inline void default_grid(const std::string& model, double& lo, double& hi, int& steps) {
    if (model == "saleh") { lo = 0.1; hi = 4.0; steps = 40; }
    else if (model == "rician") { lo = 0.1; hi = 2.0; steps = 40; }
    else if (model == "cubic") { lo = 0.1; hi = 1.0; steps = 19; }
    else { lo = 0.25; hi = 2.0; steps = 8; }
}

inline std::vector<double> theta_grid(const ExperimentConfig& cfg) {
    double lo = cfg.theta_min, hi = cfg.theta_max;
    int steps = cfg.theta_steps;
    double dlo, dhi;
    int dsteps;
    default_grid(cfg.model, dlo, dhi, dsteps);
    if (std::isnan(lo)) lo = dlo;
    if (std::isnan(hi)) hi = dhi;
    if (steps <= 0) steps = dsteps;
    if (!(lo < hi) && steps > 1) throw validation_error("theta grid must be strictly increasing");
    std::vector<double> grid(steps);
    if (steps == 1) {
        grid[0] = lo;
    } else {
        for (int i = 0; i < steps; ++i)
            grid[i] = lo + (hi - lo) * static_cast<double>(i) / (steps - 1);
    }
    return grid;
}

// Finite-difference step for one grid point: fd_step * max(|theta|, 1),
// halved until theta +- h stays inside the model domain.
inline double fd_step_for(const ModelSpec& model, double theta, double fd_step_rel) {
    double h = fd_step_rel * std::max(std::abs(theta), 1.0);
    for (int i = 0; i < 200; ++i) {
        if (model.theta_domain.contains(theta - h) && model.theta_domain.contains(theta + h)) return h;
        h *= 0.5;
    }
    throw domain_error("no finite-difference step fits inside the domain at theta=" +
                       std::to_string(theta));
}

inline std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    auto g9 = detail::format_g9;
    os << "model = " << cfg.model << '\n';
    if (!std::isnan(cfg.a)) os << "a = " << g9(cfg.a) << '\n';
    if (!std::isnan(cfg.b)) os << "b = " << g9(cfg.b) << '\n';
    os << "sigma2 = " << g9(cfg.sigma2) << '\n';
    os << "transforms = " << cfg.transforms << '\n';
    if (!std::isnan(cfg.theta_min)) os << "theta-min = " << g9(cfg.theta_min) << '\n';
    if (!std::isnan(cfg.theta_max)) os << "theta-max = " << g9(cfg.theta_max) << '\n';
    if (cfg.theta_steps > 0) os << "theta-steps = " << cfg.theta_steps << '\n';
    os << "n-samples = " << cfg.n_samples << '\n';
    os << "fd-step = " << g9(cfg.fd_step) << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "reg-mode = " << cfg.reg_mode << '\n';
    os << "reg-tol = " << g9(cfg.reg_tol) << '\n';
    return os.str();
}

// Flat "key = value" config file, one key per line, '#' comments. Keys match
// the CLI flag names; CLI flags override file values.
inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw parse_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        try {
            if (key == "model") cfg.model = value;
            else if (key == "a") cfg.a = std::stod(value);
            else if (key == "b") cfg.b = std::stod(value);
            else if (key == "sigma2") cfg.sigma2 = std::stod(value);
            else if (key == "transforms") cfg.transforms = value;
            else if (key == "theta-min") cfg.theta_min = std::stod(value);
            else if (key == "theta-max") cfg.theta_max = std::stod(value);
            else if (key == "theta-steps") cfg.theta_steps = std::stoi(value);
            else if (key == "n-samples") cfg.n_samples = std::stoull(value);
            else if (key == "fd-step") cfg.fd_step = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "reg-mode") cfg.reg_mode = value;
            else if (key == "reg-tol") cfg.reg_tol = std::stod(value);
            else if (key == "csv") cfg.csv = value;
            else if (key == "svg") cfg.svg = value;
            else throw parse_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": value out of range for '" + key + "'");
        }
    }
    return cfg;
}

// Sweeps the theta grid: moment triple -> mean slope -> matched bound ->
// derived columns. Per-point failures are recorded in the point's error
// field and the sweep continues; more than 20% failed points aborts the
// run. Results are deterministic for a fixed config, including under any
// worker count.
inline BoundCurve run_experiment_with(const ModelSpec& model, const ExperimentConfig& cfg) {
    const TransformSet set = parse_transform_spec(cfg.transforms);
    const RegularizationPolicy policy = cfg.regularization();
    const std::vector<double> grid = theta_grid(cfg);

    EstimateOptions opt;
    opt.n_threads = cfg.n_threads;

    BoundCurve curve;
    curve.meta = canonical_config_text(cfg);
    curve.fingerprint = detail::fnv1a64(curve.meta);
    curve.points.resize(grid.size());

    std::size_t failed = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        CurvePoint& cp = curve.points[g];
        const double theta = grid[g];
        cp.point.theta = theta;
        try {
            const double h = fd_step_for(model, theta, cfg.fd_step);
            const auto est = estimate_triple_blocks(model, set, theta, h, cfg.n_samples, cfg.seed, 16, opt);
            const Vec dmu = derivative_mu(est.merged);
            BoundPoint bp = matched_bound(dmu, est.merged.at_center.cov, policy);
            bp.theta = theta;
            cp.point = std::move(bp);

            if (model.input_fisher) {
                cp.input_fisher = model.input_fisher(theta);
                cp.loss_db = information_loss_db(cp.point.value, cp.input_fisher);
            }
            if (cp.point.value > 0.0) {
                cp.crlb = crlb(cp.point.value, 1);
                if (theta != 0.0) cp.nrmse = nrmse(cp.crlb, theta);
            } else {
                cp.crlb = std::numeric_limits<double>::infinity();
            }

            // Bootstrap spread of the bound over the sample blocks.
            Vec block_bounds;
            for (const MomentTriple& blk : est.blocks) {
                try {
                    const Vec bd = derivative_mu(blk);
                    block_bounds.push_back(matched_bound(bd, blk.at_center.cov, policy).value);
                } catch (const error&) {
                }
            }
            if (block_bounds.size() >= 4) {
                double m = 0.0;
                for (double v : block_bounds) m += v;
                m /= static_cast<double>(block_bounds.size());
                double var = 0.0;
                for (double v : block_bounds) var += (v - m) * (v - m);
                var /= static_cast<double>(block_bounds.size() - 1);
                if (m != 0.0)
                    cp.mc_rel_se = std::sqrt(var / static_cast<double>(block_bounds.size())) / std::abs(m);
            }
        } catch (const std::exception& e) {
            cp.flagged = true;
            cp.error = e.what();
            ++failed;
        }
    }

    if (grid.size() > 0 && static_cast<double>(failed) > 0.2 * static_cast<double>(grid.size()))
        throw error("run failed: " + std::to_string(failed) + " of " + std::to_string(grid.size()) +
                    " grid points flagged");
    return curve;
}

inline BoundCurve run_experiment(const ExperimentConfig& cfg) {
    return run_experiment_with(make_model(cfg), cfg);
}

// Expands the configured experiment into one or more labelled runs. A cubic
// run without explicit a/b covers the four input setups of the case study.
inline std::vector<std::pair<std::string, BoundCurve>> run_configured(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, BoundCurve>> out;
    if (cfg.model == "cubic" && std::isnan(cfg.a) && std::isnan(cfg.b)) {
        const std::pair<double, double> setups[4] = {{0.0, 1.0}, {1.0, 1.0}, {0.0, 2.0}, {2.0, 2.0}};
        for (const auto& [a, b] : setups) {
            ExperimentConfig c = cfg;
            c.a = a;
            c.b = b;
            std::ostringstream label;
            label << "cubic_a" << a << "_b" << b;
            out.emplace_back(label.str(), run_experiment(c));
        }
        return out;
    }
    out.emplace_back(cfg.model, run_experiment(cfg));
    return out;
}

// CSV with the fixed column set; floating point at 9 significant digits.
inline void emit_csv(const BoundCurve& curve, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << "theta,bound,input_fisher,loss_db,crlb,nrmse,effective_rank,cond,error\n";
    for (const CurvePoint& cp : curve.points) {
        std::string err = cp.error;
        for (char& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        os << detail::format_g9(cp.point.theta) << ',' << detail::format_g9(cp.point.value) << ','
           << detail::format_g9(cp.input_fisher) << ',' << detail::format_g9(cp.loss_db) << ','
           << detail::format_g9(cp.crlb) << ',' << detail::format_g9(cp.nrmse) << ','
           << cp.point.effective_rank << ',' << detail::format_g9(cp.point.cond) << ',' << err << '\n';
    }
    if (!os) throw io_error("write failure on '" + path + "'");
}

// Minimal static line chart: one polyline of y_column against theta, axis
// ticks and labels, no external assets.
inline void emit_svg(const BoundCurve& curve, const std::string& path, const std::string& y_column) {
    if (curve.points.empty()) throw validation_error("emit_svg: refusing to render an empty curve");

    auto column = [&](const CurvePoint& cp) -> double {
        if (y_column == "bound") return cp.point.value;
        if (y_column == "loss_db") return cp.loss_db;
        if (y_column == "crlb") return cp.crlb;
        if (y_column == "nrmse") return cp.nrmse;
        if (y_column == "cond") return cp.point.cond;
        throw validation_error("emit_svg: unknown y column '" + y_column + "'");
    };

    std::vector<std::pair<double, double>> pts;
    for (const CurvePoint& cp : curve.points) {
        const double y = column(cp);
        if (!cp.flagged && std::isfinite(y)) pts.emplace_back(cp.point.theta, y);
    }
    if (pts.empty()) throw validation_error("emit_svg: no finite values in column '" + y_column + "'");

    double xmin = pts.front().first, xmax = pts.front().first;
    double ymin = pts.front().second, ymax = pts.front().second;
    for (const auto& [x, y] : pts) {
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
    if (xmin == xmax) { xmin -= 1.0; xmax += 1.0; }
    if (ymin == ymax) { ymin -= 1.0; ymax += 1.0; }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double width = 720, height = 480;
    const double ml = 80, mr = 24, mt = 24, mb = 56;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    char buf[256];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
          "viewBox=\"0 0 720 480\">\n";
    os << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";

    // axes
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                  ml, height - mb, width - mr, height - mb);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", ml, mt,
                  ml, height - mb);
    os << buf;

    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                      sx(fx), height - mb, sx(fx), height - mb + 5);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%.4g</text>\n",
                      sx(fx), height - mb + 20, fx);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                      ml - 5, sy(fy), ml, sy(fy));
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">%.4g</text>\n",
                      ml - 9, sy(fy) + 4, fy);
        os << buf;
    }

    os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", sx(pts[i].first), sy(pts[i].second));
        os << buf;
    }
    os << "\"/>\n";

    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\">theta</text>\n",
                  (ml + width - mr) / 2, height - 12);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 %.2f %.2f)\">%s</text>\n",
                  18.0, (mt + height - mb) / 2, 18.0, (mt + height - mb) / 2, y_column.c_str());
    os << buf;
    os << "</svg>\n";
    if (!os) throw io_error("write failure on '" + path + "'");
}

} // namespace fibound
