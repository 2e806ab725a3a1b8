#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rhbt/core_model.hpp"
#include "rhbt/random.hpp"

namespace rhbt {

/// Simulated photon arrival. source_tag is ground truth only (1, 2, or 0 for a
/// dark count); analysis code never reads it.
struct PhotonEvent {
    Ticks timestamp = 0;
    int source_tag = 0;

    friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct ClickEvent {
    Ticks timestamp = 0;
    std::uint64_t period_index = 0;

    friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

/// Thrown when an operation's input ordering contract is broken.
class PreconditionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// How detection efficiency is applied to the emitted photons.
enum class EfficiencyModel {
    poisson_thinning,      // draw Poisson(mu * eta) directly
    per_photon_bernoulli,  // draw Poisson(mu), keep each photon with probability eta
};

/// Number of periods that share one random substream. Substreams are keyed by
/// (seed, period / kPeriodsPerChunk), so output never depends on how the
/// period range is split across threads.
inline constexpr std::uint64_t kPeriodsPerChunk = 4096;

/// Poisson sampler with the mean's constants precomputed. Inversion by
/// sequential search below kPtrsThreshold, Hormann's PTRS rejection above.
class PoissonSampler {
  public:
    static constexpr double kPtrsThreshold = 10.0;

    explicit PoissonSampler(double mean);

    std::uint64_t operator()(RandomStream& rng) const;

    double mean() const { return mean_; }

  private:
    std::uint64_t sample_inversion(RandomStream& rng) const;
    std::uint64_t sample_ptrs(RandomStream& rng) const;

    double mean_;
    double exp_neg_mean_ = 0.0;
    // PTRS constants
    double sqrt_mean_ = 0.0, log_mean_ = 0.0, b_ = 0.0, a_ = 0.0, inv_alpha_ = 0.0, vr_ = 0.0;
};

std::uint64_t sample_photon_count(double mu_eff, RandomStream& rng);

/// `count` sorted timestamps uniform over the pulse support starting at
/// period_start + gate_offset - pulse_width / 2.
std::vector<Ticks> sample_arrival_times(std::uint64_t count, Ticks gate_offset, Ticks pulse_width,
                                        Ticks period_start, RandomStream& rng);

struct GenerationOptions {
    EfficiencyModel efficiency_model = EfficiencyModel::poisson_thinning;
};

/// Photon events for periods [period_begin, period_end), sorted by
/// (timestamp, source_tag).
std::vector<PhotonEvent> generate_events(const ExperimentSpec& spec, std::uint64_t period_begin,
                                         std::uint64_t period_end,
                                         const GenerationOptions& options = {});

/// Non-paralyzable dead-time filter. Events blocked by a click do not extend
/// the blocking window. Throws PreconditionError if `events` is unsorted.
std::vector<ClickEvent> apply_dead_time(std::span<const PhotonEvent> events, Ticks dead_time,
                                        Ticks period);

struct RunSummary {
    std::uint64_t n_periods = 0;
    /// Indexed by source tag: 0 dark, 1 source 1, 2 source 2.
    std::array<std::uint64_t, 3> photons{};
    std::array<std::uint64_t, 3> clicks{};
    /// Periods in which the source produced at least one click.
    std::array<std::uint64_t, 3> click_periods{};

    double click_fraction(int source_tag) const;
};

struct SimulationOptions {
    unsigned threads = 1;
    EfficiencyModel efficiency_model = EfficiencyModel::poisson_thinning;
};

struct SimulationResult {
    std::vector<ClickEvent> clicks;
    RunSummary summary;
};

/// Full run: generation plus dead-time filter over spec.n_periods. The result
/// is identical for any thread count.
SimulationResult simulate_experiment(const ExperimentSpec& spec,
                                     const SimulationOptions& options = {});

}  // namespace rhbt
