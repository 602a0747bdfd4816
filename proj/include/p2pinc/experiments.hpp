#pragma once

/**
 * Parameter sweeps over generated populations.
 *
 * Every row is a function of (setup, parameter, seed) alone. Points run in
 * parallel on independent instances; rows are sorted by parameter, then
 * frozen value, then seed, so output order never depends on scheduling.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "p2pinc/analytic.hpp"
#include "p2pinc/dynamics.hpp"
#include "p2pinc/format.hpp"
#include "p2pinc/model.hpp"
#include "p2pinc/synth.hpp"

namespace p2pinc::experiments {

/// Mean contribution below which a run counts as collapsed.
inline constexpr double kCollapseThreshold = 1e-3;

struct ExperimentSetup {
    InstanceSpec instance;  ///< template; n and target_b_av are overridden per experiment
    LearningConfig learning;
    std::size_t repeats = 5;  ///< seeds instance.seed, instance.seed + 1, ...
    unsigned threads = 0;     ///< 0 = hardware concurrency

    void validate() const {
        learning.validate();
        if (repeats < 1) {
            throw std::invalid_argument("repeats must be at least 1");
        }
    }
};

struct SweepRow {
    double parameter = 0.0;
    std::optional<double> frozen_value;
    std::uint64_t seed = 0;
    double realized_b_av = 0.0;
    double mean_contribution = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool collapsed = false;
    double homogeneous_prediction = 0.0;
    double max_gain = 0.0;
    std::optional<double> predicted_iterations;
};

struct PointSummary {
    double parameter = 0.0;
    std::optional<double> frozen_value;
    std::size_t runs = 0;
    double mean_contribution = 0.0;
    double stddev_contribution = 0.0;
    double mean_iterations = 0.0;
    bool all_converged = true;
    double homogeneous_prediction = 0.0;
};

struct SweepResult {
    std::string parameter_name;
    bool has_frozen_value = false;
    bool has_predicted_iterations = false;
    std::vector<SweepRow> rows;

    /// Mean and sample standard deviation across seeds for each parameter point.
    [[nodiscard]] std::vector<PointSummary> summarize() const {
        std::vector<PointSummary> out;
        for (std::size_t begin = 0; begin < rows.size();) {
            std::size_t end = begin;
            while (end < rows.size() && rows[end].parameter == rows[begin].parameter &&
                   rows[end].frozen_value == rows[begin].frozen_value) {
                ++end;
            }
            PointSummary s;
            s.parameter = rows[begin].parameter;
            s.frozen_value = rows[begin].frozen_value;
            s.runs = end - begin;
            double prediction = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                s.mean_contribution += rows[k].mean_contribution;
                s.mean_iterations += static_cast<double>(rows[k].iterations);
                s.all_converged = s.all_converged && rows[k].converged;
                prediction += rows[k].homogeneous_prediction;
            }
            const auto count = static_cast<double>(s.runs);
            s.mean_contribution /= count;
            s.mean_iterations /= count;
            s.homogeneous_prediction = prediction / count;
            if (s.runs > 1) {
                double ss = 0.0;
                for (std::size_t k = begin; k < end; ++k) {
                    const double dev = rows[k].mean_contribution - s.mean_contribution;
                    ss += dev * dev;
                }
                s.stddev_contribution = std::sqrt(ss / (count - 1.0));
            }
            out.push_back(s);
            begin = end;
        }
        return out;
    }
};

/// d_hi for total benefit b, or 0 when no equilibrium exists.
[[nodiscard]] inline double homogeneous_prediction(double b_total, double alpha) {
    if (!(b_total > 0.0)) {
        return 0.0;
    }
    const auto eq = analytic::homogeneous_equilibrium(b_total, alpha);
    return eq.exists ? eq.d_hi : 0.0;
}

namespace detail {

inline unsigned worker_count(unsigned requested, std::size_t tasks) {
    unsigned threads = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(tasks, 1)));
}

/// Runs independent tasks on a small pool; results keep task order.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& tasks, unsigned threads) {
    std::vector<T> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next.fetch_add(1); k < tasks.size(); k = next.fetch_add(1)) {
            try {
                results[k] = tasks[k]();
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned count = worker_count(threads, tasks.size());
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(count);
        for (unsigned t = 0; t < count; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return results;
}

inline InstanceSpec instance_for(const ExperimentSetup& setup, std::size_t n, double b_av, std::uint64_t seed) {
    InstanceSpec spec = setup.instance;
    spec.n = n;
    spec.target_b_av = b_av;
    spec.seed = seed;
    spec.validate();
    return spec;
}

inline void sort_rows(std::vector<SweepRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        const double fa = a.frozen_value.value_or(0.0);
        const double fb = b.frozen_value.value_or(0.0);
        return std::tie(a.parameter, fa, a.seed) < std::tie(b.parameter, fb, b.seed);
    });
}

/// Runs the dynamics on one instance and fills the measured columns of a row.
inline SweepRow measure(const Instance& instance, std::span<const PeerStatus> statuses,
                        const LearningConfig& learning) {
    const auto record = iterate_to_equilibrium(instance.benefits, instance.initial, statuses, learning);
    SweepRow row;
    row.seed = instance.seed;
    row.realized_b_av = instance.benefits.average_benefit();
    row.mean_contribution = mean_contribution(record.final_profile, statuses);
    row.iterations = record.iterations;
    row.converged = record.converged;
    row.collapsed = row.mean_contribution < kCollapseThreshold;
    row.max_gain = verify_nash(instance.benefits, record.final_profile, ProbabilityCurve(learning.alpha),
                               std::numeric_limits<double>::infinity(), statuses)
                       .max_gain;
    return row;
}

inline void require_positive(std::span<const double> values, const char* what) {
    if (values.empty()) {
        throw std::invalid_argument(std::string(what) + " list is empty");
    }
    for (double v : values) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw std::invalid_argument(std::string(what) + " values must be positive");
        }
    }
}

inline void require_fractions(std::span<const double> values, bool allow_zero, const char* what) {
    if (values.empty()) {
        throw std::invalid_argument(std::string(what) + " list is empty");
    }
    for (double v : values) {
        const bool low_ok = allow_zero ? v >= 0.0 : v > 0.0;
        if (!low_ok || !(v <= 1.0)) {
            throw std::invalid_argument(std::string(what) + (allow_zero ? " must lie in [0, 1]" : " must lie in (0, 1]"));
        }
    }
}

inline std::size_t rounded_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace detail

/// Mean equilibrium contribution versus average benefit, `setup.repeats` seeds per point.
[[nodiscard]] inline SweepResult benefit_sweep(std::size_t n, std::span<const double> b_av_values,
                                               const ExperimentSetup& setup) {
    setup.validate();
    detail::require_positive(b_av_values, "b_av");
    std::vector<std::function<SweepRow()>> tasks;
    for (double b_av : b_av_values) {
        for (std::size_t r = 0; r < setup.repeats; ++r) {
            const auto spec = detail::instance_for(setup, n, b_av, setup.instance.seed + r);
            tasks.emplace_back([spec, b_av, &setup] {
                auto row = detail::measure(generate_instance(spec), {}, setup.learning);
                row.parameter = b_av;
                row.homogeneous_prediction = homogeneous_prediction(row.realized_b_av, setup.learning.alpha);
                return row;
            });
        }
    }
    SweepResult result{"b_av", false, false, detail::run_parallel(tasks, setup.threads)};
    detail::sort_rows(result.rows);
    return result;
}

/**
 * Iterations to convergence versus average benefit. Alongside the measured
 * count each row carries the count predicted by the homogeneous contraction
 * rate lambda = (d_hi + 1) / (2 d_hi): the first k with
 * e0 lambda^(k-1) (1 - lambda) < tol, where e0 = |initial_mean - d_hi|.
 */
[[nodiscard]] inline SweepResult convergence_profile(std::size_t n, std::span<const double> b_av_values,
                                                     const ExperimentSetup& setup) {
    auto result = benefit_sweep(n, b_av_values, setup);
    result.has_predicted_iterations = true;
    for (auto& row : result.rows) {
        const double d_hi = row.homogeneous_prediction;
        const double error = std::abs(setup.instance.initial_mean - d_hi);
        if (d_hi <= 1.0 || error == 0.0) {
            continue;
        }
        const double lambda = analytic::stability_eigenvalue(d_hi, d_hi);
        const double k = 1.0 + std::log(setup.learning.tolerance / (error * (1.0 - lambda))) / std::log(lambda);
        row.predicted_iterations = std::max(1.0, std::ceil(k));
    }
    return result;
}

/**
 * Equilibria after a fraction of peers leaves. For each alive fraction f,
 * round((1 - f) n) peers chosen at random are removed before learning
 * starts. The mean is taken over survivors; the prediction is d_hi(f b_av).
 */
[[nodiscard]] inline SweepResult churn_experiment(std::size_t n, double b_av, std::span<const double> alive_fractions,
                                                  const ExperimentSetup& setup) {
    setup.validate();
    detail::require_positive(std::span<const double>(&b_av, 1), "b_av");
    detail::require_fractions(alive_fractions, false, "alive fraction");
    std::vector<std::function<SweepRow()>> tasks;
    for (double fraction : alive_fractions) {
        for (std::size_t r = 0; r < setup.repeats; ++r) {
            const auto spec = detail::instance_for(setup, n, b_av, setup.instance.seed + r);
            tasks.emplace_back([spec, fraction, &setup] {
                const auto removed = pick_peers(spec.n, detail::rounded_count(1.0 - fraction, spec.n), spec.seed,
                                                Stream::removal);
                std::vector<PeerStatus> statuses(spec.n);
                for (std::size_t i : removed) {
                    statuses[i] = PeerStatus::removed();
                }
                auto row = detail::measure(generate_instance(spec), statuses, setup.learning);
                row.parameter = fraction;
                row.homogeneous_prediction =
                    homogeneous_prediction(fraction * row.realized_b_av, setup.learning.alpha);
                return row;
            });
        }
    }
    SweepResult result{"alive_fraction", false, false, detail::run_parallel(tasks, setup.threads)};
    detail::sort_rows(result.rows);
    return result;
}

/**
 * Equilibria with uncooperative peers. For each (fraction, value) pair,
 * round(fraction n) random peers hold `value` throughout; their
 * contributions count toward everyone's benefit and toward the mean.
 */
[[nodiscard]] inline SweepResult freeze_experiment(std::size_t n, double b_av,
                                                   std::span<const double> frozen_fractions,
                                                   std::span<const double> frozen_values,
                                                   const ExperimentSetup& setup) {
    setup.validate();
    detail::require_positive(std::span<const double>(&b_av, 1), "b_av");
    detail::require_fractions(frozen_fractions, true, "frozen fraction");
    if (frozen_values.empty()) {
        throw std::invalid_argument("frozen value list is empty");
    }
    for (double v : frozen_values) {
        p2pinc::detail::require_finite_nonnegative(v, "frozen value");
    }
    std::vector<std::function<SweepRow()>> tasks;
    for (double fraction : frozen_fractions) {
        for (double value : frozen_values) {
            for (std::size_t r = 0; r < setup.repeats; ++r) {
                const auto spec = detail::instance_for(setup, n, b_av, setup.instance.seed + r);
                tasks.emplace_back([spec, fraction, value, &setup] {
                    const auto frozen =
                        pick_peers(spec.n, detail::rounded_count(fraction, spec.n), spec.seed, Stream::freezing);
                    std::vector<PeerStatus> statuses(spec.n);
                    for (std::size_t i : frozen) {
                        statuses[i] = PeerStatus::frozen(value);
                    }
                    auto row = detail::measure(generate_instance(spec), statuses, setup.learning);
                    row.parameter = fraction;
                    row.frozen_value = value;
                    row.homogeneous_prediction = homogeneous_prediction(row.realized_b_av, setup.learning.alpha);
                    return row;
                });
            }
        }
    }
    SweepResult result{"frozen_fraction", true, false, detail::run_parallel(tasks, setup.threads)};
    detail::sort_rows(result.rows);
    return result;
}

struct Histogram {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<std::size_t> counts;
    double mean = 0.0;

    [[nodiscard]] double bin_lower(std::size_t k) const {
        return lower + (upper - lower) * static_cast<double>(k) / static_cast<double>(counts.size());
    }
    [[nodiscard]] double bin_upper(std::size_t k) const {
        return k + 1 == counts.size() ? upper : bin_lower(k + 1);
    }
};

/// Equal-width bins over [min, max]. A degenerate range yields a single bin.
[[nodiscard]] inline Histogram make_histogram(std::span<const double> values, std::size_t bins) {
    if (bins < 1) {
        throw std::invalid_argument("histogram needs at least one bin");
    }
    Histogram h;
    if (values.empty()) {
        h.counts.assign(bins, 0);
        return h;
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    h.lower = *lo;
    h.upper = *hi;
    h.counts.assign(h.lower == h.upper ? 1 : bins, 0);
    const double width = h.upper - h.lower;
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        std::size_t k = 0;
        if (width > 0.0) {
            k = static_cast<std::size_t>((v - h.lower) / width * static_cast<double>(bins));
            k = std::min(k, bins - 1);
        }
        ++h.counts[k];
    }
    h.mean = sum / static_cast<double>(values.size());
    return h;
}

struct HistogramResult {
    Histogram benefits;       ///< nonzero b_ij
    Histogram contributions;  ///< equilibrium d_i
    double realized_b_av = 0.0;
    double homogeneous_prediction = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Distributions of nonzero benefits and of equilibrium contributions for one instance (seed = setup.instance.seed).
[[nodiscard]] inline HistogramResult histogram_experiment(std::size_t n, double b_av, const ExperimentSetup& setup,
                                                          std::size_t bins = 20) {
    setup.validate();
    const auto spec = detail::instance_for(setup, n, b_av, setup.instance.seed);
    const auto instance = generate_instance(spec);
    const auto record = iterate_to_equilibrium(instance.benefits, instance.initial, setup.learning);

    std::vector<double> weights;
    weights.reserve(instance.benefits.nonzeros());
    for (const auto& e : instance.benefits.entries()) {
        weights.push_back(e.weight);
    }
    HistogramResult result;
    result.benefits = make_histogram(weights, bins);
    result.contributions = make_histogram(record.final_profile.values(), bins);
    result.realized_b_av = instance.benefits.average_benefit();
    result.homogeneous_prediction = homogeneous_prediction(result.realized_b_av, setup.learning.alpha);
    result.iterations = record.iterations;
    result.converged = record.converged;
    return result;
}

namespace detail {

inline std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace detail

inline void write_csv(std::ostream& out, const SweepResult& result) {
    out << result.parameter_name;
    if (result.has_frozen_value) {
        out << ",frozen_value";
    }
    out << ",seed,realized_b_av,mean_contribution,iterations,converged,collapsed,homogeneous_prediction,max_gain";
    if (result.has_predicted_iterations) {
        out << ",predicted_iterations";
    }
    out << '\n';
    for (const auto& row : result.rows) {
        out << format_double(row.parameter);
        if (result.has_frozen_value) {
            out << ',' << detail::optional_field(row.frozen_value);
        }
        out << ',' << row.seed << ',' << format_double(row.realized_b_av) << ','
            << format_double(row.mean_contribution) << ',' << row.iterations << ','
            << (row.converged ? "true" : "false") << ',' << (row.collapsed ? "true" : "false") << ','
            << format_double(row.homogeneous_prediction) << ',' << format_double(row.max_gain);
        if (result.has_predicted_iterations) {
            out << ',' << detail::optional_field(row.predicted_iterations);
        }
        out << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, const SweepResult& result) {
    out << result.parameter_name;
    if (result.has_frozen_value) {
        out << ",frozen_value";
    }
    out << ",runs,mean_contribution,stddev_contribution,mean_iterations,all_converged,homogeneous_prediction\n";
    for (const auto& s : result.summarize()) {
        out << format_double(s.parameter);
        if (result.has_frozen_value) {
            out << ',' << detail::optional_field(s.frozen_value);
        }
        out << ',' << s.runs << ',' << format_double(s.mean_contribution) << ','
            << format_double(s.stddev_contribution) << ',' << format_double(s.mean_iterations) << ','
            << (s.all_converged ? "true" : "false") << ',' << format_double(s.homogeneous_prediction) << '\n';
    }
}

inline void write_csv(std::ostream& out, const HistogramResult& result) {
    out << "series,bin_lower,bin_upper,count,series_mean\n";
    auto emit = [&out](const char* name, const Histogram& h) {
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            out << name << ',' << format_double(h.bin_lower(k)) << ',' << format_double(h.bin_upper(k)) << ','
                << h.counts[k] << ',' << format_double(h.mean) << '\n';
        }
    };
    emit("benefit", result.benefits);
    emit("contribution", result.contributions);
}

}  // namespace p2pinc::experiments
