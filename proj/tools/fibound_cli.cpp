// Command-line front end: runs bound sweeps, validation suites, Fisher
// information oracles and fixture regeneration.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fibound/experiments.hpp"
#include "fibound/models.hpp"
#include "fibound/oracle.hpp"
#include "fibound/validate.hpp"

namespace {

// Output path for one labelled curve of a multi-curve run: the label is
// inserted before the extension ("out.csv" -> "out_cubic_a0_b1.csv").
std::string labelled_path(const std::string& path, const std::string& label, bool multi) {
    if (!multi) return path;
    const auto dot = path.rfind('.');
    const auto slash = path.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + "_" + label;
    return path.substr(0, dot) + "_" + label + path.substr(dot);
}

int cmd_run(const fibound::ExperimentConfig& cfg) {
    const auto curves = fibound::run_configured(cfg);
    const bool multi = curves.size() > 1;
    for (const auto& [label, curve] : curves) {
        std::size_t flagged = 0;
        for (const auto& p : curve.points)
            if (p.flagged) ++flagged;
        std::printf("%s: %zu points, %zu flagged, fingerprint %016llx\n", label.c_str(),
                    curve.points.size(), flagged,
                    static_cast<unsigned long long>(curve.fingerprint));
        if (!cfg.csv.empty()) {
            const std::string path = labelled_path(cfg.csv, label, multi);
            emit_csv(curve, path);
            std::printf("  csv: %s\n", path.c_str());
        }
        if (!cfg.svg.empty()) {
            // loss against the input information where it exists, otherwise
            // the relative accuracy curve
            const std::string column = fibound::make_model(cfg).input_fisher ? "loss_db" : "nrmse";
            const std::string path = labelled_path(cfg.svg, label, multi);
            emit_svg(curve, path, column);
            std::printf("  svg: %s (%s)\n", path.c_str(), column.c_str());
        }
    }
    return 0;
}

int cmd_validate(const std::string& suite, std::uint64_t n_samples, std::uint64_t seed) {
    const fibound::ValidationReport rep = fibound::validate_suite(suite, n_samples, seed);
    rep.print(std::cout);
    return rep.passed() ? 0 : 1;
}

int cmd_oracle(fibound::ExperimentConfig cfg, double theta) {
    const fibound::ModelSpec model = fibound::make_model(cfg);
    std::printf("model: %s, theta = %.9g\n", model.name.c_str(), theta);
    if (model.input_fisher)
        std::printf("closed_form: %.12g\n", fibound::fim_closed_form(model, theta));
    else
        std::printf("closed_form: unavailable\n");
    if (model.pdf || model.log_pdf)
        std::printf("quadrature:  %.12g\n", fibound::fim_quadrature(model, theta));
    else
        std::printf("quadrature:  unavailable\n");
    return 0;
}

int cmd_regen_fixtures(const std::string& out) {
    fibound::QuadratureSpec spec;
    spec.rel_tol = 1e-10;
    const fibound::ModelSpec model = fibound::rician_model();
    std::FILE* f = std::fopen(out.c_str(), "wb");
    if (!f) throw fibound::io_error("cannot open '" + out + "' for writing");
    std::fprintf(f, "theta,fim,rel_tol\n");
    for (double theta : {0.25, 0.5, 1.0, 1.5, 2.0})
        std::fprintf(f, "%.9g,%.15g,%.1e\n", theta, fibound::fim_quadrature(model, theta, spec),
                     spec.rel_tol);
    std::fclose(f);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measurement-driven Fisher information lower bounds"};
    app.require_subcommand(1);

    fibound::ExperimentConfig cfg;
    std::string config_path;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--model", cfg.model,
                        "saleh | rician | cubic | ref:gauss-mean | ref:gauss-var | ref:exp | ref:poisson");
        cmd->add_option("--a", cfg.a, "model parameter a (saleh gain, rician angle, cubic input mean)");
        cmd->add_option("--b", cfg.b, "model parameter b (saleh saturation, cubic input variance)");
        cmd->add_option("--sigma2", cfg.sigma2, "gaussian-mean reference variance");
    };

    CLI::App* run = app.add_subcommand("run", "sweep a theta grid and emit the bound curve");
    add_model_flags(run);
    run->add_option("--transforms", cfg.transforms, "comma-separated transform bank");
    run->add_option("--theta-min", cfg.theta_min, "grid start");
    run->add_option("--theta-max", cfg.theta_max, "grid end");
    run->add_option("--theta-steps", cfg.theta_steps, "grid size");
    run->add_option("--n-samples", cfg.n_samples, "draws per theta (default 1e6)");
    run->add_option("--seed", cfg.seed, "base seed");
    run->add_option("--fd-step", cfg.fd_step, "relative finite-difference step (default 0.01)");
    run->add_option("--reg-mode", cfg.reg_mode, "trunc | ridge");
    run->add_option("--reg-tol", cfg.reg_tol, "regularization tolerance (default 1e-10)");
    run->add_option("--csv", cfg.csv, "CSV output path");
    run->add_option("--svg", cfg.svg, "SVG chart output path");
    run->add_option("--config", config_path, "config file (CLI flags override file values)");

    std::string suite;
    std::uint64_t val_samples = 1000000, val_seed = 20240701;
    CLI::App* validate = app.add_subcommand("validate", "run a property suite");
    validate->add_option("--suite", suite,
                         "tightness | conservativeness | matching | appendix_alpha | monotonicity")
        ->required();
    validate->add_option("--n-samples", val_samples, "draws per estimate (default 1e6)");
    validate->add_option("--seed", val_seed, "base seed");

    double oracle_theta = 1.0;
    CLI::App* oracle = app.add_subcommand("oracle", "print closed-form and quadrature information");
    add_model_flags(oracle);
    oracle->add_option("--theta", oracle_theta, "parameter value")->required();

    std::string fixture_out = "tests/data/rician_fim_reference.csv";
    CLI::App* regen = app.add_subcommand("regen-fixtures", "regenerate the frozen reference table");
    regen->add_option("--out", fixture_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            if (!config_path.empty()) {
                // file first, then explicitly passed flags on top
                fibound::ExperimentConfig file_cfg = fibound::load_config_file(config_path);
                for (const CLI::Option* opt : run->get_options()) {
                    if (opt->count() == 0) continue;
                    const std::string name = opt->get_name();
                    if (name == "--model") file_cfg.model = cfg.model;
                    else if (name == "--a") file_cfg.a = cfg.a;
                    else if (name == "--b") file_cfg.b = cfg.b;
                    else if (name == "--sigma2") file_cfg.sigma2 = cfg.sigma2;
                    else if (name == "--transforms") file_cfg.transforms = cfg.transforms;
                    else if (name == "--theta-min") file_cfg.theta_min = cfg.theta_min;
                    else if (name == "--theta-max") file_cfg.theta_max = cfg.theta_max;
                    else if (name == "--theta-steps") file_cfg.theta_steps = cfg.theta_steps;
                    else if (name == "--n-samples") file_cfg.n_samples = cfg.n_samples;
                    else if (name == "--seed") file_cfg.seed = cfg.seed;
                    else if (name == "--fd-step") file_cfg.fd_step = cfg.fd_step;
                    else if (name == "--reg-mode") file_cfg.reg_mode = cfg.reg_mode;
                    else if (name == "--reg-tol") file_cfg.reg_tol = cfg.reg_tol;
                    else if (name == "--csv") file_cfg.csv = cfg.csv;
                    else if (name == "--svg") file_cfg.svg = cfg.svg;
                }
                cfg = file_cfg;
            }
            return cmd_run(cfg);
        }
        if (validate->parsed()) return cmd_validate(suite, val_samples, val_seed);
        if (oracle->parsed()) return cmd_oracle(cfg, oracle_theta);
        if (regen->parsed()) return cmd_regen_fixtures(fixture_out);
    } catch (const fibound::parse_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
