#include "rhbt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rhbt {

namespace {

Ticks floor_div(Ticks a, Ticks b)
{
    Ticks q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

Ticks floor_mod(Ticks a, Ticks b) { return a - floor_div(a, b) * b; }

GateWindow gate_around(const SourceSpec& source, Ticks bin_width, Ticks period)
{
    const Ticks width = std::max(source.pulse_width, 4 * bin_width);
    const Ticks start = source.gate_offset - width / 2;
    const Ticks end = source.gate_offset + (width - width / 2) + 1;
    return {std::max<Ticks>(start, 0), std::min(end, period)};
}

void require_sorted(std::span<const ClickEvent> clicks, const char* where)
{
    for (std::size_t i = 1; i < clicks.size(); ++i) {
        if (clicks[i].timestamp < clicks[i - 1].timestamp) {
            throw PreconditionError(std::string(where) + ": clicks are not sorted");
        }
    }
}

}  // namespace

void GateSpec::validate(Ticks period) const
{
    for (const GateWindow& g : {gate_1, gate_2}) {
        if (g.start < 0 || g.end > period || g.start >= g.end) {
            throw SpecError("gate windows must be nonempty and lie within [0, period)");
        }
    }
    if (gate_1.start < gate_2.end && gate_2.start < gate_1.end) {
        throw SpecError("gate windows overlap");
    }
}

GateSpec default_gates(const ExperimentSpec& spec, Ticks bin_width)
{
    if (bin_width < 1) {
        throw std::invalid_argument("default_gates: bin_width must be >= 1");
    }
    GateSpec gates{gate_around(spec.source_1, bin_width, spec.period),
                   gate_around(spec.source_2, bin_width, spec.period)};
    gates.validate(spec.period);
    return gates;
}

ClickClassifier::ClickClassifier(const GateSpec& gates, Ticks period, std::uint64_t n_periods)
    : gates_(gates), period_(period)
{
    gates_.validate(period);
    matrix_.n_periods = n_periods;
    matrix_.clicks_1.assign(n_periods, 0);
    matrix_.clicks_2.assign(n_periods, 0);
}

void ClickClassifier::add(Ticks timestamp)
{
    if (timestamp < 0) {
        throw std::out_of_range("click before run start");
    }
    const auto index = static_cast<std::uint64_t>(timestamp / period_);
    if (index >= matrix_.n_periods) {
        throw std::out_of_range("click in period " + std::to_string(index) + " but run has " +
                                std::to_string(matrix_.n_periods) + " periods");
    }
    const Ticks micro = timestamp % period_;
    if (gates_.gate_1.contains(micro)) {
        matrix_.clicks_1[index] = 1;
    } else if (gates_.gate_2.contains(micro)) {
        matrix_.clicks_2[index] = 1;
    } else {
        ++matrix_.unclassified_count;
    }
}

PulseClickMatrix classify_clicks(std::span<const ClickEvent> clicks, const GateSpec& gates,
                                 Ticks period, std::uint64_t n_periods)
{
    require_sorted(clicks, "classify_clicks");
    ClickClassifier classifier(gates, period, n_periods);
    for (const ClickEvent& c : clicks) {
        classifier.add(c.timestamp);
    }
    return classifier.take();
}

ProbabilityEstimate binomial_estimate(std::uint64_t count, std::uint64_t trials)
{
    ProbabilityEstimate e;
    e.count = count;
    e.trials = trials;
    if (trials == 0) {
        return e;
    }
    const double n = static_cast<double>(trials);
    e.value = static_cast<double>(count) / n;
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / n);
    return e;
}

ClickProbabilities estimate_click_probs(const PulseClickMatrix& matrix)
{
    if (matrix.n_periods == 0) {
        throw std::invalid_argument("estimate_click_probs: matrix has no periods");
    }
    const auto count = [](const std::vector<std::uint8_t>& v) {
        return static_cast<std::uint64_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
    };
    return {binomial_estimate(count(matrix.clicks_1), matrix.n_periods),
            binomial_estimate(count(matrix.clicks_2), matrix.n_periods)};
}

UndefinedEstimate::UndefinedEstimate(std::uint64_t singles_1, std::uint64_t singles_2)
    : std::runtime_error("g2 undefined: singles_1 = " + std::to_string(singles_1) +
                         ", singles_2 = " + std::to_string(singles_2)),
      singles_1_(singles_1),
      singles_2_(singles_2)
{
}

G2Estimate g2_from_counts(std::uint64_t coincidences, std::uint64_t singles_1,
                          std::uint64_t singles_2, std::uint64_t n_periods)
{
    if (singles_1 == 0 || singles_2 == 0 || n_periods == 0) {
        throw UndefinedEstimate(singles_1, singles_2);
    }
    G2Estimate g;
    g.coincidences = coincidences;
    g.singles_1 = singles_1;
    g.singles_2 = singles_2;
    g.n_periods = n_periods;
    const double scale = static_cast<double>(n_periods) /
                         (static_cast<double>(singles_1) * static_cast<double>(singles_2));
    g.value = static_cast<double>(coincidences) * scale;
    g.std_error = std::sqrt(static_cast<double>(std::max<std::uint64_t>(coincidences, 1))) * scale;
    return g;
}

G2Estimate g2_click_zero(const PulseClickMatrix& matrix)
{
    std::uint64_t both = 0, s1 = 0, s2 = 0;
    for (std::uint64_t m = 0; m < matrix.n_periods; ++m) {
        s1 += matrix.clicks_1[m];
        s2 += matrix.clicks_2[m];
        both += matrix.clicks_1[m] & matrix.clicks_2[m];
    }
    return g2_from_counts(both, s1, s2, matrix.n_periods);
}

std::map<std::int64_t, std::optional<G2Estimate>> g2_discrete(const PulseClickMatrix& matrix,
                                                              std::int64_t k_min,
                                                              std::int64_t k_max)
{
    const auto n = static_cast<std::int64_t>(matrix.n_periods);
    if (k_min > k_max) {
        throw std::invalid_argument("g2_discrete: empty lag range");
    }
    if (std::max(std::abs(k_min), std::abs(k_max)) >= n) {
        throw std::out_of_range("g2_discrete: |k| must be smaller than n_periods");
    }

    // prefix[i] = number of clicks in periods [0, i)
    std::vector<std::uint64_t> prefix_1(matrix.n_periods + 1, 0), prefix_2(matrix.n_periods + 1, 0);
    for (std::uint64_t m = 0; m < matrix.n_periods; ++m) {
        prefix_1[m + 1] = prefix_1[m] + matrix.clicks_1[m];
        prefix_2[m + 1] = prefix_2[m] + matrix.clicks_2[m];
    }

    std::map<std::int64_t, std::optional<G2Estimate>> out;
    for (std::int64_t k = k_min; k <= k_max; ++k) {
        const std::int64_t m_begin = std::max<std::int64_t>(0, -k);
        const std::int64_t m_end = std::min(n, n - k);
        std::uint64_t coincidences = 0;
        for (std::int64_t m = m_begin; m < m_end; ++m) {
            coincidences += matrix.clicks_1[static_cast<std::size_t>(m)] &
                            matrix.clicks_2[static_cast<std::size_t>(m + k)];
        }
        const std::uint64_t s1 = prefix_1[m_end] - prefix_1[m_begin];
        const std::uint64_t s2 = prefix_2[m_end + k] - prefix_2[m_begin + k];
        if (s1 == 0 || s2 == 0) {
            out.emplace(k, std::nullopt);
        } else {
            out.emplace(k, g2_from_counts(coincidences, s1, s2,
                                          static_cast<std::uint64_t>(m_end - m_begin)));
        }
    }
    return out;
}

std::uint64_t DelayHistogram::total() const
{
    return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0});
}

DelayHistogram delay_histogram(std::span<const ClickEvent> clicks, Ticks bin_width,
                               Ticks max_delay, HistogramMode mode)
{
    if (bin_width < 1 || max_delay < 0) {
        throw std::invalid_argument("delay_histogram: need bin_width >= 1 and max_delay >= 0");
    }
    require_sorted(clicks, "delay_histogram");
    DelayHistogram h;
    h.bin_width = bin_width;
    h.range_min = -max_delay;
    h.range_max = max_delay;
    const Ticks lo = floor_div(-max_delay, bin_width);
    const Ticks hi = floor_div(max_delay, bin_width);
    h.first_bin_start = lo * bin_width;
    h.bins.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    const auto count = [&](Ticks d) { ++h.bins[static_cast<std::size_t>(floor_div(d, bin_width) - lo)]; };

    for (std::size_t i = 0; i < clicks.size(); ++i) {
        for (std::size_t j = i + 1; j < clicks.size(); ++j) {
            const Ticks d = clicks[j].timestamp - clicks[i].timestamp;
            if (d > max_delay) {
                break;
            }
            count(d);
            if (mode == HistogramMode::start_stop) {
                break;
            }
            count(-d);
        }
    }
    return h;
}

MicroTimeProfiler::MicroTimeProfiler(Ticks period, Ticks bin_width) : period_(period)
{
    if (period < 1 || bin_width < 1) {
        throw std::invalid_argument("micro_time_profile: period and bin_width must be >= 1");
    }
    histogram_.bin_width = bin_width;
    histogram_.range_min = 0;
    histogram_.range_max = period;
    histogram_.bins.assign(static_cast<std::size_t>((period + bin_width - 1) / bin_width), 0);
}

void MicroTimeProfiler::add(Ticks timestamp)
{
    ++histogram_.bins[static_cast<std::size_t>(floor_mod(timestamp, period_) / histogram_.bin_width)];
}

DelayHistogram micro_time_profile(std::span<const ClickEvent> clicks, Ticks period,
                                  Ticks bin_width)
{
    require_sorted(clicks, "micro_time_profile");
    MicroTimeProfiler profiler(period, bin_width);
    for (const ClickEvent& c : clicks) {
        profiler.add(c.timestamp);
    }
    return profiler.histogram();
}

std::optional<double> weighted_center(const DelayHistogram& histogram, Ticks start, Ticks end)
{
    double weight = 0.0, moment = 0.0;
    for (std::size_t i = 0; i < histogram.bins.size(); ++i) {
        const Ticks s = histogram.bin_start(i);
        if (s < start || s >= end || histogram.bins[i] == 0) {
            continue;
        }
        const double w = static_cast<double>(histogram.bins[i]);
        weight += w;
        moment += w * (static_cast<double>(s) + 0.5 * static_cast<double>(histogram.bin_width));
    }
    if (weight == 0.0) {
        return std::nullopt;
    }
    return moment / weight;
}

std::vector<CombPeak> comb_peaks(const DelayHistogram& histogram, Ticks period, Ticks half_window)
{
    if (period < 1 || half_window < 0) {
        throw std::invalid_argument("comb_peaks: need period >= 1 and half_window >= 0");
    }
    const Ticks k_lo = -floor_div(histogram.range_max, period);
    const Ticks k_hi = floor_div(histogram.range_max, period);
    std::vector<CombPeak> peaks;
    for (Ticks k = k_lo; k <= k_hi; ++k) {
        CombPeak p;
        p.k = k;
        const Ticks centre = k * period;
        for (std::size_t i = 0; i < histogram.bins.size(); ++i) {
            const Ticks s = histogram.bin_start(i);
            if (s >= centre - half_window && s <= centre + half_window) {
                p.area += histogram.bins[i];
            }
        }
        peaks.push_back(p);
    }
    double plateau = 0.0;
    std::size_t n_side = 0;
    for (const CombPeak& p : peaks) {
        if (p.k != 0) {
            plateau += static_cast<double>(p.area);
            ++n_side;
        }
    }
    if (n_side > 0 && plateau > 0.0) {
        plateau /= static_cast<double>(n_side);
        for (CombPeak& p : peaks) {
            p.normalized = static_cast<double>(p.area) / plateau;
        }
    }
    return peaks;
}

}  // namespace rhbt
