#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rhbt/analysis.hpp"
#include "rhbt/core_model.hpp"

namespace rhbt {

struct SweepOptions {
    unsigned threads = 1;
    /// Micro-time bin width used to derive the default gates.
    Ticks gate_bin_width = 1;
};

/// Gate click probabilities of one simulated run, measured through the
/// classifier rather than the simulator's ground truth.
ClickProbabilities measure_click_probs(const ExperimentSpec& spec, unsigned threads = 1,
                                       Ticks gate_bin_width = 1);

struct SweepRow {
    double real_mu1 = 0.0;
    double real_mu2 = 0.0;
    ProbabilityEstimate measured_1_independent;  // pulse 2 blocked
    ProbabilityEstimate measured_1_simultaneous;
    ProbabilityEstimate measured_2_independent;  // pulse 1 blocked
    ProbabilityEstimate measured_2_simultaneous;
    double predicted_1 = 0.0;
    double predicted_2_independent = 0.0;
    double predicted_2_simultaneous = 0.0;
};

struct SweepResult {
    std::string experiment;
    ExperimentSpec base_spec;
    Regime regime;
    std::vector<SweepRow> rows;
};

/// Sweeps mu1 over the grid with mu2 = ratio * mu1. Each point runs the
/// simultaneous measurement and both one-arm-blocked measurements on
/// substreams derived from (base seed, point index).
SweepResult sweep_joint_intensity(const ExperimentSpec& base, std::span<const double> mu1_grid,
                                  double ratio, const SweepOptions& options = {});

/// Sweeps mu1 over the grid with mu2 held at fixed_mu2.
SweepResult sweep_anticorrelation(const ExperimentSpec& base, std::span<const double> mu1_grid,
                                  double fixed_mu2, const SweepOptions& options = {});

/// Columns: real_mu1, real_mu2, then value and std_error of each measured
/// column, then the three predicted columns.
void write_sweep_csv(const SweepResult& result, std::ostream& out);

/// JSON sidecar with experiment name, regime, full base spec, its digest and
/// any extra parameters (already JSON-encoded) passed by the caller.
void write_sweep_metadata(const SweepResult& result, const std::string& parameters_json,
                          std::ostream& out);

/// Evenly spaced grid [start, stop] inclusive.
std::vector<double> linear_grid(double start, double stop, double step);

/// Location of the maximum of sampled (x, y) data: a least-squares cubic
/// through the points within half_window of the discrete argmax, then its
/// local maximum. Falls back to the discrete argmax with too few points.
CurvePeak locate_curve_peak(std::span<const double> x, std::span<const double> y,
                            double half_window = 0.3);

/// Laboratory photon counts over 10^6 periods: each pulse measured alone
/// (other arm blocked) and both measured together on one detector.
struct ReferenceCounts {
    std::uint64_t pulse_1_independent;
    std::uint64_t pulse_1_simultaneous;
    std::uint64_t pulse_2_independent;
    std::uint64_t pulse_2_simultaneous;
};

inline constexpr std::uint64_t kReferencePeriods = 1'000'000;

inline constexpr std::array<ReferenceCounts, 12> kReferenceCountTable{{
    {27775, 27958, 18534, 17698},
    {64853, 65059, 37134, 34572},
    {216301, 221807, 146464, 114401},
    {365105, 365920, 262309, 165292},
    {403902, 408171, 285329, 169511},
    {463866, 468631, 335863, 176741},
    {504933, 508772, 368659, 179484},
    {595745, 596597, 463821, 183451},
    {633118, 637812, 485174, 170717},
    {697912, 705293, 547679, 156606},
    {845617, 862366, 752693, 94582},
    {973508, 969942, 951434, 3012},
}};

/// Rows whose recorded masked count differs from the closed-form prediction
/// by more than this fraction are flagged as outside the dead-time model.
inline constexpr double kModelDeviationThreshold = 0.10;

struct CountComparison {
    ReferenceCounts reference{};
    /// Inferred mu * eta from the independent columns; nullopt if p >= 1.
    std::optional<double> mu1_eff;
    std::optional<double> mu2_eff;
    double predicted_2_simultaneous = 0.0;  // counts per kReferencePeriods
    ProbabilityEstimate simulated_1_simultaneous;
    ProbabilityEstimate simulated_2_simultaneous;
    double simulated_2_counts = 0.0;  // scaled to kReferencePeriods
    double relative_deviation = 0.0;  // |simulated - recorded| / recorded
    double model_deviation = 0.0;     // |recorded - predicted| / predicted
    bool flagged = false;
    std::string error;  // nonempty when inversion failed
};

struct CountTableReport {
    ExperimentSpec spec_template;
    std::vector<CountComparison> rows;
};

/// For each reference row: infer mu_i eta_i = -ln(1 - p_i,independent),
/// simulate the simultaneous measurement with the template's timing, and
/// compare against the recorded masked counts.
CountTableReport table1_reproduction(const ExperimentSpec& spec_template,
                                     std::span<const ReferenceCounts> table = kReferenceCountTable,
                                     const SweepOptions& options = {});

void write_table_csv(const CountTableReport& report, std::ostream& out);

}  // namespace rhbt
