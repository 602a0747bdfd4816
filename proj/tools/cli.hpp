#pragma once

// Command-line front end for the incentive simulator.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "p2pinc/p2pinc.hpp"

namespace p2pinc::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 2,
    kValidationError = 3,
    kRuntimeError = 4,
};

/// Invalid option value; the message names the offending flag.
class ValidationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;

    // instance
    std::size_t n = 1000;
    double density = 0.02;
    std::vector<double> b_av{6.0};
    std::string distribution = "gamma";
    double gamma_shape = 2.0;
    double benefit_stddev = 0.5;
    double initial_mean = 1.0;
    double initial_stddev = 0.25;
    std::uint64_t seed = 1;

    // learning
    double alpha = 1.0;
    double tolerance = 1e-6;
    std::size_t max_iterations = 10000;

    // experiments
    std::size_t repeats = 5;
    unsigned threads = 0;
    std::vector<double> alive_fraction{1.0, 0.8, 0.6, 0.5, 0.4, 0.35, 0.3};
    std::vector<double> frozen_fraction{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> frozen_value{0.5, 1.0, 2.0, 4.0};
    std::size_t bins = 20;

    // analytic
    double b_total = 6.0;
    std::optional<double> b12;
    std::optional<double> b21;

    std::string instance_in;
    std::string out;
    std::string summary_out;
    bool strict = false;
};

namespace detail {

inline std::string fixed6(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << v;
    return s.str();
}

inline std::string critical_text(double b_c) {
    if (b_c == std::floor(b_c)) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(1) << b_c;
        return s.str();
    }
    return fixed6(b_c);
}

inline std::string join(const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s += (i ? "," : "") + format_double(values[i]);
    }
    return s;
}

inline void check(bool ok, const std::string& flag, const std::string& requirement) {
    if (!ok) {
        throw ValidationFailure("invalid value for --" + flag + ": " + requirement);
    }
}

inline bool positive(double v) { return std::isfinite(v) && v > 0.0; }
inline bool nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

inline InstanceSpec instance_spec(const RunConfig& c) {
    InstanceSpec spec;
    spec.n = c.n;
    spec.density = c.density;
    spec.target_b_av = c.b_av.empty() ? 0.0 : c.b_av.front();
    if (c.distribution == "gamma") {
        spec.benefit_distribution = BenefitDistribution::gamma(c.gamma_shape);
    } else if (c.distribution == "gaussian") {
        spec.benefit_distribution = BenefitDistribution::gaussian(c.benefit_stddev);
    } else {
        spec.benefit_distribution = BenefitDistribution::constant();
    }
    spec.initial_mean = c.initial_mean;
    spec.initial_stddev = c.initial_stddev;
    spec.seed = c.seed;
    return spec;
}

inline LearningConfig learning_config(const RunConfig& c) { return {c.alpha, c.tolerance, c.max_iterations}; }

inline experiments::ExperimentSetup setup(const RunConfig& c) {
    return {instance_spec(c), learning_config(c), c.repeats, c.threads};
}

/// Rejects out-of-range values for everything the command will use.
inline void validate(const RunConfig& c) {
    check(positive(c.alpha), "alpha", "must be positive");
    const std::string& cmd = c.command;
    if (cmd == "analytic") {
        check(positive(c.b_total), "b-total", "must be positive");
        check(!c.b12 || positive(*c.b12), "b12", "must be positive");
        check(!c.b21 || positive(*c.b21), "b21", "must be positive");
        check(c.b12.has_value() == c.b21.has_value(), "b12", "--b12 and --b21 must be given together");
        check(!c.b12 || c.alpha == 1.0, "alpha", "the two-player solver requires alpha = 1");
        return;
    }

    check(positive(c.tolerance), "tolerance", "must be positive");
    check(c.max_iterations >= 1, "max-iterations", "must be at least 1");
    check(c.gamma_shape > 0.0 && std::isfinite(c.gamma_shape), "gamma-shape", "must be positive");
    check(nonnegative(c.benefit_stddev), "benefit-stddev", "must be non-negative");
    check(nonnegative(c.initial_mean), "initial-mean", "must be non-negative");
    check(nonnegative(c.initial_stddev), "initial-stddev", "must be non-negative");

    if (!(cmd == "run" && !c.instance_in.empty())) {
        check(c.n >= 2, "n", "must be at least 2");
        check(c.density > 0.0 && c.density <= 1.0, "density", "must lie in (0, 1]");
        check(c.density * static_cast<double>(c.n - 1) >= 1.0, "density",
              "density * (n - 1) must be at least 1 so every peer has a partner");
        check(!c.b_av.empty(), "b-av", "at least one value is required");
        for (double v : c.b_av) {
            check(positive(v), "b-av", "values must be positive");
        }
        const bool multi = cmd == "sweep" || cmd == "convergence";
        check(multi || c.b_av.size() == 1, "b-av", "command '" + cmd + "' takes a single value");
    }
    if (cmd == "sweep" || cmd == "convergence" || cmd == "churn" || cmd == "freeze") {
        check(c.repeats >= 1, "repeats", "must be at least 1");
    }
    if (cmd == "churn") {
        check(!c.alive_fraction.empty(), "alive-fraction", "at least one value is required");
        for (double f : c.alive_fraction) {
            check(f > 0.0 && f <= 1.0, "alive-fraction", "values must lie in (0, 1]");
        }
    }
    if (cmd == "freeze") {
        check(!c.frozen_fraction.empty(), "frozen-fraction", "at least one value is required");
        for (double f : c.frozen_fraction) {
            check(f >= 0.0 && f <= 1.0, "frozen-fraction", "values must lie in [0, 1]");
        }
        check(!c.frozen_value.empty(), "frozen-value", "at least one value is required");
        for (double v : c.frozen_value) {
            check(nonnegative(v), "frozen-value", "values must be non-negative");
        }
    }
    if (cmd == "hist") {
        check(c.bins >= 1, "bins", "must be at least 1");
    }
}

/// Opens the output file up front so an unwritable path fails before any work.
inline std::unique_ptr<std::ofstream> open_output(const std::string& path) {
    if (path.empty()) {
        return nullptr;
    }
    auto file = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file) {
        throw std::ios_base::failure("cannot write output file '" + path + "'");
    }
    return file;
}

inline std::string default_output(const std::string& command) {
    if (command == "analytic") {
        return "";
    }
    if (command == "generate") {
        return "instance.txt";
    }
    return command + ".csv";
}

inline void finish(std::ofstream* file, const std::string& path) {
    if (file) {
        file->flush();
        if (!*file) {
            throw std::ios_base::failure("failed writing output file '" + path + "'");
        }
    }
}

inline int analytic_command(const RunConfig& c, std::ostream& out) {
    const auto b_c = analytic::critical_benefit(c.alpha).value;
    const auto eq = analytic::homogeneous_equilibrium(c.b_total, c.alpha);
    if (!eq.exists) {
        out << "no equilibrium (b_total*alpha < 4)\n";
    } else {
        out << "d_lo=" << fixed6(eq.d_lo) << " d_hi=" << fixed6(eq.d_hi) << " b_c=" << critical_text(b_c);
        if (c.alpha == 1.0) {
            out << " stable_lambda=" << fixed6(analytic::stability_eigenvalue(eq.d_hi, eq.d_hi));
        }
        out << '\n';
    }
    if (c.b12 && c.b21) {
        const auto fp = analytic::two_player_fixed_point(*c.b12, *c.b21);
        if (fp) {
            out << "two_player d1=" << fixed6(fp->d1) << " d2=" << fixed6(fp->d2) << '\n';
        } else {
            out << "two_player collapse (both contributions 0)\n";
        }
    }
    return kSuccess;
}

inline std::string status_name(const PeerStatus& s) {
    switch (s.kind()) {
        case PeerStatus::Kind::active:
            return "active";
        case PeerStatus::Kind::removed:
            return "removed";
        case PeerStatus::Kind::frozen:
            return "frozen";
    }
    return "?";
}

inline int run_command(const RunConfig& c, const std::string& out_path, std::ostream& out, std::ostream& err) {
    Instance instance;
    if (!c.instance_in.empty()) {
        std::ifstream in(c.instance_in);
        if (!in) {
            throw std::ios_base::failure("cannot read instance file '" + c.instance_in + "'");
        }
        instance = read_instance(in);
    }
    auto file = open_output(out_path);
    if (c.instance_in.empty()) {
        instance = generate_instance(instance_spec(c));
    }
    const auto learning = learning_config(c);
    const auto record = iterate_to_equilibrium(instance.benefits, instance.initial, learning);
    const auto nash = verify_nash(instance.benefits, record.final_profile, ProbabilityCurve(c.alpha), 1e-5);
    if (file) {
        *file << "peer,status,initial,final,row_benefit\n";
        for (std::size_t i = 0; i < instance.benefits.size(); ++i) {
            *file << i << ",active," << format_double(instance.initial[i]) << ','
                  << format_double(record.final_profile[i]) << ','
                  << format_double(instance.benefits.row_benefit(i)) << '\n';
        }
    }
    finish(file.get(), out_path);
    const double b_av = instance.benefits.average_benefit();
    out << "run n=" << instance.benefits.size() << " b_av=" << format_double(b_av) << " seed=" << instance.seed
        << " mean=" << fixed6(record.final_profile.mean())
        << " prediction=" << fixed6(experiments::homogeneous_prediction(b_av, c.alpha))
        << " iterations=" << record.iterations << " converged=" << (record.converged ? "true" : "false")
        << " max_gain=" << format_double(nash.max_gain) << " out=" << out_path << '\n';
    if (c.strict && !record.converged) {
        err << "error: learning did not converge within " << c.max_iterations << " iterations\n";
        return kRuntimeError;
    }
    return kSuccess;
}

inline int generate_command(const RunConfig& c, const std::string& out_path, std::ostream& out) {
    auto file = open_output(out_path);
    const auto instance = generate_instance(instance_spec(c));
    write_instance(*file, instance);
    finish(file.get(), out_path);
    out << "generate n=" << c.n << " density=" << format_double(c.density)
        << " b_av=" << format_double(instance.benefits.average_benefit()) << " seed=" << c.seed
        << " nonzeros=" << instance.benefits.nonzeros() << " out=" << out_path << '\n';
    return kSuccess;
}

inline int sweep_command(const RunConfig& c, const std::string& out_path, std::ostream& out, std::ostream& err) {
    auto file = open_output(out_path);
    auto summary_file = open_output(c.summary_out);
    const auto s = setup(c);
    experiments::SweepResult result;
    std::string headline;
    if (c.command == "sweep" || c.command == "convergence") {
        result = c.command == "sweep" ? experiments::benefit_sweep(c.n, c.b_av, s)
                                      : experiments::convergence_profile(c.n, c.b_av, s);
        headline = "b_av=" + join(c.b_av);
    } else if (c.command == "churn") {
        result = experiments::churn_experiment(c.n, c.b_av.front(), c.alive_fraction, s);
        headline = "b_av=" + format_double(c.b_av.front()) + " alive_fraction=" + join(c.alive_fraction);
    } else {
        result = experiments::freeze_experiment(c.n, c.b_av.front(), c.frozen_fraction, c.frozen_value, s);
        headline = "b_av=" + format_double(c.b_av.front()) + " frozen_fraction=" + join(c.frozen_fraction) +
                   " frozen_value=" + join(c.frozen_value);
    }
    experiments::write_csv(*file, result);
    finish(file.get(), out_path);
    if (summary_file) {
        experiments::write_summary_csv(*summary_file, result);
        finish(summary_file.get(), c.summary_out);
    }

    std::size_t converged = 0;
    for (const auto& row : result.rows) {
        converged += row.converged ? 1 : 0;
    }
    out << c.command << " n=" << c.n << ' ' << headline << " repeats=" << c.repeats << " rows=" << result.rows.size()
        << " converged=" << converged << '/' << result.rows.size() << " means=";
    const auto points = result.summarize();
    for (std::size_t k = 0; k < points.size(); ++k) {
        out << (k ? "," : "") << fixed6(points[k].mean_contribution);
    }
    out << " out=" << out_path << '\n';
    if (c.strict && converged != result.rows.size()) {
        err << "error: " << (result.rows.size() - converged) << " run(s) did not converge\n";
        return kRuntimeError;
    }
    return kSuccess;
}

inline int hist_command(const RunConfig& c, const std::string& out_path, std::ostream& out, std::ostream& err) {
    auto file = open_output(out_path);
    const auto result = experiments::histogram_experiment(c.n, c.b_av.front(), setup(c), c.bins);
    experiments::write_csv(*file, result);
    finish(file.get(), out_path);
    out << "hist n=" << c.n << " b_av=" << format_double(c.b_av.front()) << " seed=" << c.seed
        << " benefit_mean=" << format_double(result.benefits.mean)
        << " contribution_mean=" << fixed6(result.contributions.mean)
        << " prediction=" << fixed6(result.homogeneous_prediction) << " iterations=" << result.iterations
        << " converged=" << (result.converged ? "true" : "false") << " out=" << out_path << '\n';
    if (c.strict && !result.converged) {
        err << "error: learning did not converge\n";
        return kRuntimeError;
    }
    return kSuccess;
}

}  // namespace detail

/// Declares every flag on `app`, bound to `c`.
inline void configure(CLI::App& app, RunConfig& c) {
    app.description("Differential-service incentive simulator for peer-to-peer systems");
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Flat 'key = value' file; command-line flags override it (default: none)");
    app.require_subcommand(1, 1);

    const std::vector<std::pair<std::string, std::string>> commands{
        {"analytic", "Closed-form homogeneous equilibria and stability"},
        {"run", "Learn one equilibrium and write per-peer contributions"},
        {"generate", "Write a generated instance file"},
        {"sweep", "Mean equilibrium contribution versus average benefit"},
        {"convergence", "Iterations to equilibrium versus average benefit"},
        {"churn", "Equilibria after a fraction of peers leaves"},
        {"freeze", "Equilibria with peers holding a fixed contribution"},
        {"hist", "Histograms of benefits and equilibrium contributions"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->fallthrough()->callback([&c, name = name] { c.command = name; });
    }

    app.add_option("--n", c.n, "Number of peers");
    app.add_option("--density", c.density, "Fraction of peers each peer draws benefit from");
    app.add_option("--b-av", c.b_av, "Target average total benefit (comma-separated list for sweep/convergence)")
        ->delimiter(',');
    app.add_option("--distribution", c.distribution, "Benefit distribution")
        ->check(CLI::IsMember({"gamma", "gaussian", "constant"}));
    app.add_option("--gamma-shape", c.gamma_shape, "Shape parameter of gamma-distributed benefits");
    app.add_option("--benefit-stddev", c.benefit_stddev, "Relative stddev of gaussian benefits");
    app.add_option("--initial-mean", c.initial_mean, "Mean initial contribution");
    app.add_option("--initial-stddev", c.initial_stddev, "Stddev of initial contributions");
    app.add_option("--seed", c.seed, "Instance seed (repeats use seed, seed+1, ...)");
    app.add_option("--alpha", c.alpha, "Exponent of the service probability d^a/(1+d^a)");
    app.add_option("--tolerance", c.tolerance, "Convergence threshold on mean |change| per round");
    app.add_option("--max-iterations", c.max_iterations, "Round limit for learning");
    app.add_option("--repeats", c.repeats, "Seeds per parameter point");
    app.add_option("--threads", c.threads, "Worker threads for sweeps (0 = all cores)");
    app.add_option("--alive-fraction", c.alive_fraction, "Alive fractions for churn")->delimiter(',');
    app.add_option("--frozen-fraction", c.frozen_fraction, "Frozen fractions for freeze")->delimiter(',');
    app.add_option("--frozen-value", c.frozen_value, "Frozen contributions for freeze")->delimiter(',');
    app.add_option("--bins", c.bins, "Histogram bins");
    app.add_option("--b-total", c.b_total, "Total benefit b(N-1) for analytic");
    app.add_option("--b12", c.b12, "Two-player benefit of peer 1 from peer 2 (analytic)");
    app.add_option("--b21", c.b21, "Two-player benefit of peer 2 from peer 1 (analytic)");
    app.add_option("--instance", c.instance_in, "Instance file to load instead of generating (run)");
    app.add_option("--out", c.out, "Output path (default <command>.csv, instance.txt for generate)");
    app.add_option("--summary-out", c.summary_out, "Per-point mean/stddev CSV for sweeps");
    app.add_flag("--strict", c.strict, "Exit with status 4 if any learning run fails to converge (default: off)");
}

/// Parses argv, runs the command and returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig config;
    CLI::App app;
    configure(app, config);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ConversionError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return kUsageError;
    }

    try {
        detail::validate(config);
    } catch (const ValidationFailure& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    }

    const std::string out_path = config.out.empty() ? detail::default_output(config.command) : config.out;
    try {
        const auto& cmd = config.command;
        if (cmd == "analytic") {
            return detail::analytic_command(config, out);
        }
        if (cmd == "run") {
            return detail::run_command(config, out_path, out, err);
        }
        if (cmd == "generate") {
            return detail::generate_command(config, out_path, out);
        }
        if (cmd == "hist") {
            return detail::hist_command(config, out_path, out, err);
        }
        return detail::sweep_command(config, out_path, out, err);
    } catch (const ValidationFailure& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace p2pinc::cli
