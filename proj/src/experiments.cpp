#include "rhbt/experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "json.hpp"
#include "rhbt/config.hpp"
#include "rhbt/parallel.hpp"
#include "rhbt/random.hpp"
#include "rhbt/simulator.hpp"

namespace rhbt {

namespace {

enum RunKind : std::size_t { simultaneous = 0, pulse_1_alone = 1, pulse_2_alone = 2, kRunKinds = 3 };

ExperimentSpec point_spec(const ExperimentSpec& base, std::size_t point, RunKind kind, double mu1,
                          double mu2)
{
    ExperimentSpec spec = base;
    spec.source_1.mean_photons_per_pulse = kind == pulse_2_alone ? 0.0 : mu1;
    spec.source_2.mean_photons_per_pulse = kind == pulse_1_alone ? 0.0 : mu2;
    spec.rng_seed = derive_seed(base.rng_seed, point * kRunKinds + kind);
    return spec;
}

SweepResult run_sweep(std::string name, const ExperimentSpec& base,
                      const std::vector<std::pair<double, double>>& points,
                      const SweepOptions& options)
{
    base.validate();
    if (points.empty()) {
        throw std::invalid_argument("sweep grid is empty");
    }
    SweepResult result{std::move(name), base, classify_regime(base), {}};
    result.rows.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        // validates every point before any simulation starts
        point_spec(base, i, simultaneous, points[i].first, points[i].second).validate();
    }

    std::vector<ClickProbabilities> measured(points.size() * kRunKinds);
    parallel_for(measured.size(), options.threads, [&](std::size_t task) {
        const std::size_t point = task / kRunKinds;
        const auto kind = static_cast<RunKind>(task % kRunKinds);
        const ExperimentSpec spec =
            point_spec(base, point, kind, points[point].first, points[point].second);
        measured[task] = measure_click_probs(spec, 1, options.gate_bin_width);
    });

    for (std::size_t i = 0; i < points.size(); ++i) {
        SweepRow& row = result.rows[i];
        row.real_mu1 = points[i].first;
        row.real_mu2 = points[i].second;
        row.measured_1_simultaneous = measured[i * kRunKinds + simultaneous].pulse_1;
        row.measured_2_simultaneous = measured[i * kRunKinds + simultaneous].pulse_2;
        row.measured_1_independent = measured[i * kRunKinds + pulse_1_alone].pulse_1;
        row.measured_2_independent = measured[i * kRunKinds + pulse_2_alone].pulse_2;

        const ExperimentSpec spec = point_spec(base, i, simultaneous, row.real_mu1, row.real_mu2);
        const MeasuredMeans independent = predicted_independent_means(spec.source_1, spec.source_2);
        const MeasuredMeans together =
            predicted_simultaneous_means(spec.source_1, spec.source_2, result.regime);
        row.predicted_1 = independent.pulse_1;
        row.predicted_2_independent = independent.pulse_2;
        row.predicted_2_simultaneous = together.pulse_2;
    }
    return result;
}

nlohmann::json spec_json(const ExperimentSpec& s)
{
    const auto source = [](const SourceSpec& src) {
        return nlohmann::json{{"mean_photons_per_pulse", src.mean_photons_per_pulse},
                              {"efficiency", src.efficiency},
                              {"gate_offset_ticks", src.gate_offset},
                              {"pulse_width_ticks", src.pulse_width}};
    };
    return {{"period_ticks", s.period},
            {"source_1", source(s.source_1)},
            {"source_2", source(s.source_2)},
            {"detector",
             {{"dead_time_ticks", s.detector.dead_time},
              {"dark_count_rate_hz", s.detector.dark_count_rate}}},
            {"n_periods", s.n_periods},
            {"rng_seed", s.rng_seed},
            {"tick_resolution_ps", s.tick_resolution_ps}};
}

}  // namespace

ClickProbabilities measure_click_probs(const ExperimentSpec& spec, unsigned threads,
                                       Ticks gate_bin_width)
{
    const SimulationResult run = simulate_experiment(spec, {threads});
    const PulseClickMatrix matrix =
        classify_clicks(run.clicks, default_gates(spec, gate_bin_width), spec.period, spec.n_periods);
    return estimate_click_probs(matrix);
}

SweepResult sweep_joint_intensity(const ExperimentSpec& base, std::span<const double> mu1_grid,
                                  double ratio, const SweepOptions& options)
{
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw std::invalid_argument("sweep_joint_intensity: ratio must be positive");
    }
    std::vector<std::pair<double, double>> points;
    for (const double mu1 : mu1_grid) {
        points.emplace_back(mu1, ratio * mu1);
    }
    return run_sweep("joint-intensity", base, points, options);
}

SweepResult sweep_anticorrelation(const ExperimentSpec& base, std::span<const double> mu1_grid,
                                  double fixed_mu2, const SweepOptions& options)
{
    if (!(fixed_mu2 >= 0.0) || !std::isfinite(fixed_mu2)) {
        throw std::invalid_argument("sweep_anticorrelation: fixed_mu2 must be >= 0");
    }
    std::vector<std::pair<double, double>> points;
    for (const double mu1 : mu1_grid) {
        points.emplace_back(mu1, fixed_mu2);
    }
    return run_sweep("anticorrelation", base, points, options);
}

void write_sweep_csv(const SweepResult& result, std::ostream& out)
{
    out << "real_mu1,real_mu2,"
           "measured_1_independent,measured_1_independent_err,"
           "measured_1_simultaneous,measured_1_simultaneous_err,"
           "measured_2_independent,measured_2_independent_err,"
           "measured_2_simultaneous,measured_2_simultaneous_err,"
           "predicted_1,predicted_2_independent,predicted_2_simultaneous\n";
    const auto flags = out.flags();
    const auto precision = out.precision(10);
    for (const SweepRow& r : result.rows) {
        out << r.real_mu1 << ',' << r.real_mu2;
        for (const auto* e : {&r.measured_1_independent, &r.measured_1_simultaneous,
                              &r.measured_2_independent, &r.measured_2_simultaneous}) {
            out << ',' << e->value << ',' << e->std_error;
        }
        out << ',' << r.predicted_1 << ',' << r.predicted_2_independent << ','
            << r.predicted_2_simultaneous << '\n';
    }
    out.precision(precision);
    out.flags(flags);
}

void write_sweep_metadata(const SweepResult& result, const std::string& parameters_json,
                          std::ostream& out)
{
    nlohmann::json meta{
        {"experiment", result.experiment},
        {"regime", std::string(to_string(result.regime.kind))},
        {"base_spec", spec_json(result.base_spec)},
        {"base_spec_digest", to_hex(spec_digest(result.base_spec))},
        {"seed", result.base_spec.rng_seed},
        {"points", result.rows.size()},
        {"seed_derivation", "point i, run r (0 simultaneous, 1 pulse 2 blocked, 2 pulse 1 blocked) "
                            "uses derive_seed(seed, 3 * i + r)"},
    };
    meta["parameters"] = parameters_json.empty() ? nlohmann::json::object()
                                                 : nlohmann::json::parse(parameters_json);
    out << meta.dump(2) << '\n';
}

std::vector<double> linear_grid(double start, double stop, double step)
{
    if (!(step > 0.0) || stop < start) {
        throw std::invalid_argument("linear_grid: need step > 0 and stop >= start");
    }
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = start + static_cast<double>(i) * step;
    }
    return grid;
}

CurvePeak locate_curve_peak(std::span<const double> x, std::span<const double> y,
                            double half_window)
{
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument("locate_curve_peak: need equal, nonempty x and y");
    }
    const auto best = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const CurvePeak discrete{x[best], y[best]};

    std::vector<std::size_t> window;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i] - x[best]) <= half_window + 1e-12) {
            window.push_back(i);
        }
    }
    if (window.size() < 5) {
        return discrete;
    }

    // y = c0 + c1 u + c2 u^2 + c3 u^3 with u = x - x[best]
    Eigen::MatrixXd design(window.size(), 4);
    Eigen::VectorXd rhs(window.size());
    for (std::size_t r = 0; r < window.size(); ++r) {
        const double u = x[window[r]] - x[best];
        design.row(static_cast<Eigen::Index>(r)) << 1.0, u, u * u, u * u * u;
        rhs(static_cast<Eigen::Index>(r)) = y[window[r]];
    }
    const Eigen::Vector4d c = design.colPivHouseholderQr().solve(rhs);
    const auto value_at = [&](double u) { return c(0) + u * (c(1) + u * (c(2) + u * c(3))); };

    // stationary points of the cubic that are maxima inside the window
    std::vector<double> roots;
    if (std::abs(c(3)) < 1e-12) {
        if (c(2) < 0.0) {
            roots.push_back(-c(1) / (2.0 * c(2)));
        }
    } else {
        const double disc = 4.0 * c(2) * c(2) - 12.0 * c(3) * c(1);
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            for (const double u : {(-2.0 * c(2) + s) / (6.0 * c(3)), (-2.0 * c(2) - s) / (6.0 * c(3))}) {
                if (2.0 * c(2) + 6.0 * c(3) * u < 0.0) {
                    roots.push_back(u);
                }
            }
        }
    }
    for (const double u : roots) {
        if (std::abs(u) <= half_window) {
            return {x[best] + u, value_at(u)};
        }
    }
    return discrete;
}

CountTableReport table1_reproduction(const ExperimentSpec& spec_template,
                                     std::span<const ReferenceCounts> table,
                                     const SweepOptions& options)
{
    spec_template.validate();
    CountTableReport report{spec_template, {}};
    report.rows.resize(table.size());
    const double n_ref = static_cast<double>(kReferencePeriods);
    const Regime regime = classify_regime(spec_template);

    parallel_for(table.size(), options.threads, [&](std::size_t i) {
        CountComparison& row = report.rows[i];
        row.reference = table[i];
        const double p1 = static_cast<double>(table[i].pulse_1_independent) / n_ref;
        const double p2 = static_cast<double>(table[i].pulse_2_independent) / n_ref;
        if (p1 < 1.0) {
            row.mu1_eff = -std::log1p(-p1);
        }
        if (p2 < 1.0) {
            row.mu2_eff = -std::log1p(-p2);
        }
        if (!row.mu1_eff || !row.mu2_eff) {
            row.error = "independent click fraction >= 1, cannot invert";
            return;
        }

        ExperimentSpec spec = spec_template;
        spec.source_1.mean_photons_per_pulse = *row.mu1_eff;
        spec.source_1.efficiency = 1.0;
        spec.source_2.mean_photons_per_pulse = *row.mu2_eff;
        spec.source_2.efficiency = 1.0;
        spec.rng_seed = derive_seed(spec_template.rng_seed, i);

        row.predicted_2_simultaneous =
            predicted_simultaneous_means(spec.source_1, spec.source_2, regime).pulse_2 * n_ref;
        const ClickProbabilities measured = measure_click_probs(spec, 1, options.gate_bin_width);
        row.simulated_1_simultaneous = measured.pulse_1;
        row.simulated_2_simultaneous = measured.pulse_2;
        row.simulated_2_counts = measured.pulse_2.value * n_ref;

        const double recorded = static_cast<double>(table[i].pulse_2_simultaneous);
        row.relative_deviation = std::abs(row.simulated_2_counts - recorded) / recorded;
        row.model_deviation =
            std::abs(recorded - row.predicted_2_simultaneous) / row.predicted_2_simultaneous;
        row.flagged = row.model_deviation > kModelDeviationThreshold;
    });
    return report;
}

void write_table_csv(const CountTableReport& report, std::ostream& out)
{
    out << "pulse_1_independent,pulse_1_simultaneous,pulse_2_independent,pulse_2_simultaneous,"
           "mu1_eff,mu2_eff,predicted_2_simultaneous,simulated_1_simultaneous,"
           "simulated_2_simultaneous,relative_deviation,model_deviation,flagged,error\n";
    const auto flags = out.flags();
    const auto precision = out.precision(8);
    for (const CountComparison& r : report.rows) {
        out << r.reference.pulse_1_independent << ',' << r.reference.pulse_1_simultaneous << ','
            << r.reference.pulse_2_independent << ',' << r.reference.pulse_2_simultaneous << ',';
        if (r.error.empty()) {
            out << *r.mu1_eff << ',' << *r.mu2_eff << ',' << r.predicted_2_simultaneous << ','
                << r.simulated_1_simultaneous.value * static_cast<double>(kReferencePeriods) << ','
                << r.simulated_2_counts << ',' << r.relative_deviation << ',' << r.model_deviation
                << ',' << (r.flagged ? "model-deviant" : "ok") << ",\n";
        } else {
            out << ",,,,,,," << "inversion-failed," << r.error << '\n';
        }
    }
    out.precision(precision);
    out.flags(flags);
}

}  // namespace rhbt
