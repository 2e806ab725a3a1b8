#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rhbt/core_model.hpp"
#include "rhbt/simulator.hpp"

namespace rhbt {

/// Half-open micro-time window [start, end) within one period.
struct GateWindow {
    Ticks start = 0;
    Ticks end = 0;

    bool contains(Ticks micro_time) const { return micro_time >= start && micro_time < end; }
};

struct GateSpec {
    GateWindow gate_1;
    GateWindow gate_2;

    /// Throws SpecError unless both windows are nonempty, disjoint and inside [0, period).
    void validate(Ticks period) const;
};

/// Windows centred on each pulse, max(pulse_width, 4 * bin_width) wide and
/// including the last support tick, clipped to the period.
GateSpec default_gates(const ExperimentSpec& spec, Ticks bin_width = 1);

/// Per-period click indicators for each gate.
struct PulseClickMatrix {
    std::uint64_t n_periods = 0;
    std::vector<std::uint8_t> clicks_1;
    std::vector<std::uint8_t> clicks_2;
    std::uint64_t unclassified_count = 0;
};

/// Streaming gate classifier. Several clicks in one gate and period set the
/// indicator once.
class ClickClassifier {
  public:
    ClickClassifier(const GateSpec& gates, Ticks period, std::uint64_t n_periods);

    /// Throws std::out_of_range for clicks past the last period.
    void add(Ticks timestamp);

    const PulseClickMatrix& matrix() const { return matrix_; }
    PulseClickMatrix take() { return std::move(matrix_); }

  private:
    GateSpec gates_;
    Ticks period_;
    PulseClickMatrix matrix_;
};

PulseClickMatrix classify_clicks(std::span<const ClickEvent> clicks, const GateSpec& gates,
                                 Ticks period, std::uint64_t n_periods);

struct ProbabilityEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t count = 0;
    std::uint64_t trials = 0;
};

/// count / trials with binomial standard error.
ProbabilityEstimate binomial_estimate(std::uint64_t count, std::uint64_t trials);

struct ClickProbabilities {
    ProbabilityEstimate pulse_1;
    ProbabilityEstimate pulse_2;
};

ClickProbabilities estimate_click_probs(const PulseClickMatrix& matrix);

struct G2Estimate {
    double value = 0.0;
    std::uint64_t coincidences = 0;
    std::uint64_t singles_1 = 0;
    std::uint64_t singles_2 = 0;
    std::uint64_t n_periods = 0;  // periods in the overlap
    double std_error = 0.0;
};

/// A correlation estimate with no clicks in one of the gates.
class UndefinedEstimate : public std::runtime_error {
  public:
    UndefinedEstimate(std::uint64_t singles_1, std::uint64_t singles_2);

    std::uint64_t singles_1() const { return singles_1_; }
    std::uint64_t singles_2() const { return singles_2_; }

  private:
    std::uint64_t singles_1_;
    std::uint64_t singles_2_;
};

/// g2 from counts: (C / n) / ((S1 / n)(S2 / n)), with Poisson error on C
/// propagated to first order. Zero coincidences carry the one-count error.
/// Throws UndefinedEstimate when a singles count is zero.
G2Estimate g2_from_counts(std::uint64_t coincidences, std::uint64_t singles_1,
                          std::uint64_t singles_2, std::uint64_t n_periods);

G2Estimate g2_click_zero(const PulseClickMatrix& matrix);

/// g2[k] = mean(c1[m] c2[m+k]) / (mean c1[m] * mean c2[m+k]) over the valid
/// overlap of m. Lags whose estimate is undefined map to nullopt.
/// Requires |k| < n_periods for every k in [k_min, k_max].
std::map<std::int64_t, std::optional<G2Estimate>> g2_discrete(const PulseClickMatrix& matrix,
                                                              std::int64_t k_min,
                                                              std::int64_t k_max);

/// Counts in equal bins; bin i covers [first_bin_start + i * bin_width, ... + bin_width).
struct DelayHistogram {
    Ticks bin_width = 1;
    Ticks first_bin_start = 0;
    Ticks range_min = 0;
    Ticks range_max = 0;
    std::vector<std::uint64_t> bins;

    Ticks bin_start(std::size_t i) const
    {
        return first_bin_start + static_cast<Ticks>(i) * bin_width;
    }
    std::uint64_t total() const;
};

enum class HistogramMode { all_pairs, start_stop };

/// Signed delays t_j - t_i within [-max_delay, max_delay]. all_pairs counts
/// every ordered pair i != j; start_stop only successive clicks.
DelayHistogram delay_histogram(std::span<const ClickEvent> clicks, Ticks bin_width,
                               Ticks max_delay, HistogramMode mode);

/// Histogram of timestamp mod period over [0, period).
DelayHistogram micro_time_profile(std::span<const ClickEvent> clicks, Ticks period,
                                  Ticks bin_width);

/// Streaming form of micro_time_profile.
class MicroTimeProfiler {
  public:
    MicroTimeProfiler(Ticks period, Ticks bin_width);
    void add(Ticks timestamp);
    const DelayHistogram& histogram() const { return histogram_; }

  private:
    Ticks period_;
    DelayHistogram histogram_;
};

/// Count-weighted mean bin centre over bins starting in [start, end). nullopt if empty.
std::optional<double> weighted_center(const DelayHistogram& histogram, Ticks start, Ticks end);

struct CombPeak {
    std::int64_t k = 0;        // peak index, delay ~ k * period
    std::uint64_t area = 0;    // counts within +-half_window of k * period
    double normalized = 0.0;   // area / mean area of the k != 0 peaks
};

/// Peak areas of an all-pairs histogram, normalised by the plateau of
/// nonzero-lag peaks.
std::vector<CombPeak> comb_peaks(const DelayHistogram& histogram, Ticks period,
                                 Ticks half_window);

}  // namespace rhbt
