#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rhbt {

/// Time in detector ticks. One tick is ExperimentSpec::tick_resolution_ps picoseconds.
using Ticks = std::int64_t;

/// Raised when a spec violates one of its invariants.
class SpecError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct SourceSpec {
    double mean_photons_per_pulse = 0.0;  // mu
    double efficiency = 1.0;              // eta
    Ticks gate_offset = 0;                // pulse center relative to period start
    Ticks pulse_width = 1;                // full temporal support

    /// Effective Poisson mean after detection efficiency (thinned).
    double effective_mean() const { return mean_photons_per_pulse * efficiency; }

    /// First and last tick a photon of this pulse can occupy.
    Ticks support_begin() const { return gate_offset - pulse_width / 2; }
    Ticks support_end() const { return support_begin() + pulse_width; }
};

struct DetectorSpec {
    Ticks dead_time = 1;
    double dark_count_rate = 0.0;  // counts per second
};

struct ExperimentSpec {
    Ticks period = 1;
    SourceSpec source_1;
    SourceSpec source_2;
    DetectorSpec detector;
    std::uint64_t n_periods = 1;
    std::uint64_t rng_seed = 0;
    std::uint64_t tick_resolution_ps = 1;

    Ticks delay() const { return source_2.gate_offset - source_1.gate_offset; }

    /// Throws SpecError naming the first violated invariant.
    void validate() const;
};

/// Laboratory reference setup: 1 us period, 5 ns delay, 77 ns dead time,
/// 100 ps pulses, 1 ps ticks, one million periods.
ExperimentSpec reference_spec();

struct MeasuredMeans {
    double pulse_1 = 0.0;
    double pulse_2 = 0.0;
};

enum class RegimeKind { independent, pseudo_antibunching };

struct Regime {
    RegimeKind kind = RegimeKind::independent;
    Ticks delay = 0;
    Ticks dead_time = 0;
    Ticks period = 0;

    bool pseudo_antibunching() const { return kind == RegimeKind::pseudo_antibunching; }
};

std::string_view to_string(RegimeKind kind);

/// Poisson probability e^-mu mu^n / n!. Evaluated in log space for n > 20.
double poisson_pmf(double mu, std::uint64_t n);

/// Probability that a click detector of efficiency eta fires on a coherent
/// pulse of mean mu, ignoring dark counts: 1 - exp(-mu eta).
double click_probability(double mu, double eta);

MeasuredMeans predicted_independent_means(const SourceSpec& source_1, const SourceSpec& source_2);

/// Per-gate click probabilities when both pulses hit one detector. Under
/// pseudo antibunching a first-pulse click masks the second pulse entirely.
MeasuredMeans predicted_simultaneous_means(const SourceSpec& source_1, const SourceSpec& source_2,
                                           const Regime& regime);

struct CurvePeak {
    double mu1_at_peak = 0.0;
    double peak_value = 0.0;
};

/// Maximum of f(x) = exp(-x) (1 - exp(-r x)), the masked second-pulse curve
/// when mu2 eta2 = r * mu1 eta1.
CurvePeak measured_curve_peak(double ratio);

/// Pseudo antibunching iff delay < dead_time. Equality re-arms in time.
Regime classify_regime(const ExperimentSpec& spec);

}  // namespace rhbt
