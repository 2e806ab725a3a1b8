#include "rhbt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rhbt/parallel.hpp"

namespace rhbt {

PoissonSampler::PoissonSampler(double mean) : mean_(mean)
{
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::domain_error("PoissonSampler: mean must be finite and >= 0");
    }
    exp_neg_mean_ = std::exp(-mean);
    if (mean >= kPtrsThreshold) {
        sqrt_mean_ = std::sqrt(mean);
        log_mean_ = std::log(mean);
        b_ = 0.931 + 2.53 * sqrt_mean_;
        a_ = -0.059 + 0.02483 * b_;
        inv_alpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
        vr_ = 0.9277 - 3.6224 / (b_ - 2.0);
    }
}

std::uint64_t PoissonSampler::operator()(RandomStream& rng) const
{
    if (mean_ == 0.0) {
        return 0;
    }
    return mean_ < kPtrsThreshold ? sample_inversion(rng) : sample_ptrs(rng);
}

std::uint64_t PoissonSampler::sample_inversion(RandomStream& rng) const
{
    const double u = rng.uniform();
    std::uint64_t k = 0;
    double term = exp_neg_mean_;
    double cdf = term;
    while (u >= cdf) {
        ++k;
        term *= mean_ / static_cast<double>(k);
        const double next = cdf + term;
        if (next == cdf) {
            break;  // cdf saturated below 1 by rounding
        }
        cdf = next;
    }
    return k;
}

std::uint64_t PoissonSampler::sample_ptrs(RandomStream& rng) const
{
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a_ / us + b_) * u + mean_ + 0.43);
        if (us >= 0.07 && v <= vr_) {
            return static_cast<std::uint64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        const double lhs = std::log(v) + std::log(inv_alpha_) - std::log(a_ / (us * us) + b_);
        const double rhs = -mean_ + k * log_mean_ - std::lgamma(k + 1.0);
        if (lhs <= rhs) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

std::uint64_t sample_photon_count(double mu_eff, RandomStream& rng)
{
    return PoissonSampler(mu_eff)(rng);
}

namespace {

void append_arrivals(std::uint64_t count, Ticks begin, Ticks width, int tag,
                     std::vector<PhotonEvent>& out, RandomStream& rng)
{
    const auto first = out.size();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto offset = static_cast<Ticks>(rng.uniform() * static_cast<double>(width));
        out.push_back({begin + offset, tag});
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
              [](const PhotonEvent& a, const PhotonEvent& b) { return a.timestamp < b.timestamp; });
}

bool event_less(const PhotonEvent& a, const PhotonEvent& b)
{
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.source_tag < b.source_tag;
}

/// Per-run constants shared by every period.
class PeriodGenerator {
  public:
    PeriodGenerator(const ExperimentSpec& spec, const GenerationOptions& options)
        : spec_(spec),
          bernoulli_(options.efficiency_model == EfficiencyModel::per_photon_bernoulli),
          source_1_(bernoulli_ ? spec.source_1.mean_photons_per_pulse
                               : spec.source_1.effective_mean()),
          source_2_(bernoulli_ ? spec.source_2.mean_photons_per_pulse
                               : spec.source_2.effective_mean()),
          dark_(spec.detector.dark_count_rate * static_cast<double>(spec.period) *
                static_cast<double>(spec.tick_resolution_ps) * 1e-12)
    {
    }

    /// Appends the events of one period, sorted, and returns photons per tag.
    std::array<std::uint64_t, 3> generate(std::uint64_t period_index, RandomStream& rng,
                                          std::vector<PhotonEvent>& out) const
    {
        std::array<std::uint64_t, 3> photons{};
        const Ticks start = static_cast<Ticks>(period_index) * spec_.period;
        const auto first = out.size();
        photons[1] = emit(spec_.source_1, source_1_, 1, start, rng, out);
        photons[2] = emit(spec_.source_2, source_2_, 2, start, rng, out);
        if (dark_.mean() > 0.0) {
            photons[0] = dark_(rng);
            append_arrivals(photons[0], start, spec_.period, 0, out, rng);
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(), event_less);
        }
        return photons;
    }

  private:
    std::uint64_t emit(const SourceSpec& source, const PoissonSampler& sampler, int tag,
                       Ticks start, RandomStream& rng, std::vector<PhotonEvent>& out) const
    {
        std::uint64_t count = sampler(rng);
        if (bernoulli_) {
            std::uint64_t kept = 0;
            for (std::uint64_t i = 0; i < count; ++i) {
                kept += rng.bernoulli(source.efficiency) ? 1 : 0;
            }
            count = kept;
        }
        append_arrivals(count, start + source.support_begin(), source.pulse_width, tag, out, rng);
        return count;
    }

    const ExperimentSpec& spec_;
    bool bernoulli_;
    PoissonSampler source_1_;
    PoissonSampler source_2_;
    PoissonSampler dark_;
};

/// Walks the substreams covering [period_begin, period_end). Periods before
/// period_begin inside the first chunk are generated and discarded so each
/// period always sees the same random numbers.
template <class OnPeriod>
void for_each_period(const ExperimentSpec& spec, const GenerationOptions& options,
                     std::uint64_t period_begin, std::uint64_t period_end, OnPeriod on_period)
{
    const PeriodGenerator generator(spec, options);
    std::vector<PhotonEvent> scratch;
    for (std::uint64_t chunk = period_begin / kPeriodsPerChunk;
         chunk * kPeriodsPerChunk < period_end; ++chunk) {
        RandomStream rng({spec.rng_seed, chunk});
        const std::uint64_t first = chunk * kPeriodsPerChunk;
        const std::uint64_t last = std::min(first + kPeriodsPerChunk, period_end);
        for (std::uint64_t p = first; p < last; ++p) {
            scratch.clear();
            const auto photons = generator.generate(p, rng, scratch);
            if (p >= period_begin) {
                on_period(p, photons, std::span<const PhotonEvent>(scratch));
            }
        }
    }
}

template <class OnClick>
void filter_dead_time(std::span<const PhotonEvent> events, Ticks dead_time, OnClick on_click)
{
    bool armed = true;
    Ticks last_click = 0;
    Ticks previous = std::numeric_limits<Ticks>::min();
    for (const PhotonEvent& e : events) {
        if (e.timestamp < previous) {
            throw PreconditionError("apply_dead_time: events are not sorted by timestamp");
        }
        previous = e.timestamp;
        if (armed || e.timestamp - last_click >= dead_time) {
            armed = false;
            last_click = e.timestamp;
            on_click(e);
        }
    }
}

/// Accumulates clicks and per-source click counts for a contiguous run.
struct ClickCollector {
    Ticks period;
    RunSummary& summary;
    std::vector<ClickEvent>& clicks;
    std::array<std::uint64_t, 3> last_flagged{};
    std::array<bool, 3> flagged_any{};

    void operator()(const PhotonEvent& e)
    {
        const auto index = static_cast<std::uint64_t>(e.timestamp / period);
        clicks.push_back({e.timestamp, index});
        const auto tag = static_cast<std::size_t>(e.source_tag);
        ++summary.clicks[tag];
        if (!flagged_any[tag] || last_flagged[tag] != index) {
            flagged_any[tag] = true;
            last_flagged[tag] = index;
            ++summary.click_periods[tag];
        }
    }
};

void add_into(RunSummary& total, const RunSummary& part)
{
    for (std::size_t i = 0; i < 3; ++i) {
        total.photons[i] += part.photons[i];
        total.clicks[i] += part.clicks[i];
        total.click_periods[i] += part.click_periods[i];
    }
}

}  // namespace

std::vector<Ticks> sample_arrival_times(std::uint64_t count, Ticks gate_offset, Ticks pulse_width,
                                        Ticks period_start, RandomStream& rng)
{
    std::vector<PhotonEvent> events;
    events.reserve(count);
    append_arrivals(count, period_start + gate_offset - pulse_width / 2, pulse_width, 0, events,
                    rng);
    std::vector<Ticks> times;
    times.reserve(count);
    for (const auto& e : events) {
        times.push_back(e.timestamp);
    }
    return times;
}

std::vector<PhotonEvent> generate_events(const ExperimentSpec& spec, std::uint64_t period_begin,
                                         std::uint64_t period_end, const GenerationOptions& options)
{
    spec.validate();
    if (period_begin >= period_end || period_end > spec.n_periods) {
        throw std::out_of_range("generate_events: need 0 <= begin < end <= n_periods");
    }
    std::vector<PhotonEvent> events;
    for_each_period(spec, options, period_begin, period_end,
                    [&](std::uint64_t, const auto&, std::span<const PhotonEvent> period_events) {
                        events.insert(events.end(), period_events.begin(), period_events.end());
                    });
    return events;
}

std::vector<ClickEvent> apply_dead_time(std::span<const PhotonEvent> events, Ticks dead_time,
                                        Ticks period)
{
    if (dead_time <= 0 || period <= 0) {
        throw std::invalid_argument("apply_dead_time: dead_time and period must be positive");
    }
    std::vector<ClickEvent> clicks;
    filter_dead_time(events, dead_time, [&](const PhotonEvent& e) {
        clicks.push_back({e.timestamp, static_cast<std::uint64_t>(e.timestamp / period)});
    });
    return clicks;
}

double RunSummary::click_fraction(int source_tag) const
{
    if (n_periods == 0) {
        return 0.0;
    }
    return static_cast<double>(click_periods.at(static_cast<std::size_t>(source_tag))) /
           static_cast<double>(n_periods);
}

SimulationResult simulate_experiment(const ExperimentSpec& spec, const SimulationOptions& options)
{
    spec.validate();
    const GenerationOptions generation{options.efficiency_model};
    const std::uint64_t n_chunks = (spec.n_periods + kPeriodsPerChunk - 1) / kPeriodsPerChunk;
    const bool sequential_filter = spec.detector.dark_count_rate > 0.0;

    struct ChunkOutput {
        std::vector<PhotonEvent> events;  // only kept when filtering sequentially
        std::vector<ClickEvent> clicks;
        RunSummary summary;
    };
    std::vector<ChunkOutput> chunks(n_chunks);

    parallel_for(n_chunks, options.threads, [&](std::size_t c) {
        ChunkOutput& out = chunks[c];
        const std::uint64_t begin = c * kPeriodsPerChunk;
        const std::uint64_t end = std::min(begin + kPeriodsPerChunk, spec.n_periods);
        ClickCollector collector{spec.period, out.summary, out.clicks, {}, {}};
        for_each_period(spec, generation, begin, end,
                        [&](std::uint64_t, const std::array<std::uint64_t, 3>& photons,
                            std::span<const PhotonEvent> events) {
                            for (std::size_t i = 0; i < 3; ++i) {
                                out.summary.photons[i] += photons[i];
                            }
                            if (sequential_filter) {
                                out.events.insert(out.events.end(), events.begin(), events.end());
                            } else {
                                // dead time expires inside the period, so periods filter independently
                                filter_dead_time(events, spec.detector.dead_time, collector);
                            }
                        });
    });

    SimulationResult result;
    result.summary.n_periods = spec.n_periods;
    for (const auto& chunk : chunks) {
        add_into(result.summary, chunk.summary);
    }
    if (sequential_filter) {
        std::vector<PhotonEvent> all;
        for (auto& chunk : chunks) {
            all.insert(all.end(), chunk.events.begin(), chunk.events.end());
            chunk.events = {};
        }
        RunSummary clicks_only;
        ClickCollector collector{spec.period, clicks_only, result.clicks, {}, {}};
        filter_dead_time(all, spec.detector.dead_time, collector);
        result.summary.clicks = clicks_only.clicks;
        result.summary.click_periods = clicks_only.click_periods;
    } else {
        std::size_t total = 0;
        for (const auto& chunk : chunks) {
            total += chunk.clicks.size();
        }
        result.clicks.reserve(total);
        for (const auto& chunk : chunks) {
            result.clicks.insert(result.clicks.end(), chunk.clicks.begin(), chunk.clicks.end());
        }
    }
    return result;
}

}  // namespace rhbt
