#include "rhbt/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rhbt {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw SpecError(what);
    }
}

void validate_source(const SourceSpec& s, const char* name, Ticks period)
{
    const std::string n(name);
    require(std::isfinite(s.mean_photons_per_pulse) && s.mean_photons_per_pulse >= 0.0,
            n + ": mean_photons_per_pulse must be a finite value >= 0");
    require(std::isfinite(s.efficiency) && s.efficiency >= 0.0 && s.efficiency <= 1.0,
            n + ": efficiency must lie in [0, 1]");
    require(s.pulse_width > 0, n + ": pulse_width must be positive");
    require(s.gate_offset >= 0, n + ": gate_offset must be nonnegative");
    require(s.support_begin() >= 0, n + ": pulse starts before the period boundary");
    require(s.support_end() < period, n + ": pulse extends past the end of the period");
}

}  // namespace

void ExperimentSpec::validate() const
{
    require(period > 0, "period must be positive");
    require(tick_resolution_ps >= 1, "tick_resolution_ps must be at least 1");
    require(n_periods >= 1, "n_periods must be at least 1");
    validate_source(source_1, "source_1", period);
    validate_source(source_2, "source_2", period);
    require(delay() > 0, "source_2 must arrive after source_1 (delay > 0)");
    require(source_1.support_end() < source_2.support_begin(), "pulse supports overlap");
    require(detector.dead_time > 0, "dead_time must be positive");
    require(std::isfinite(detector.dark_count_rate) && detector.dark_count_rate >= 0.0,
            "dark_count_rate must be >= 0");
    const Ticks last_edge = std::max(source_1.support_end(), source_2.support_end());
    if (last_edge + detector.dead_time >= period) {
        std::ostringstream os;
        os << "dead time from an in-gate click must expire within the period (last pulse edge "
           << last_edge << " + dead_time " << detector.dead_time << " >= period " << period << ")";
        throw SpecError(os.str());
    }
}

ExperimentSpec reference_spec()
{
    ExperimentSpec spec;
    spec.tick_resolution_ps = 1;
    spec.period = 1'000'000;  // 1 us
    spec.source_1 = {1.0, 1.0, 100, 100};
    spec.source_2 = {1.0, 1.0, 100 + 5'000, 100};
    spec.detector = {77'000, 0.0};
    spec.n_periods = 1'000'000;
    spec.rng_seed = 1;
    return spec;
}

std::string_view to_string(RegimeKind kind)
{
    switch (kind) {
    case RegimeKind::independent:
        return "Independent";
    case RegimeKind::pseudo_antibunching:
        return "PseudoAntibunching";
    }
    return "?";
}

double poisson_pmf(double mu, std::uint64_t n)
{
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw std::domain_error("poisson_pmf: mean must be finite and >= 0");
    }
    if (mu == 0.0) {
        return n == 0 ? 1.0 : 0.0;
    }
    if (n <= 20) {
        double factorial = 1.0;
        for (std::uint64_t i = 2; i <= n; ++i) {
            factorial *= static_cast<double>(i);
        }
        return std::exp(-mu) * std::pow(mu, static_cast<double>(n)) / factorial;
    }
    const double k = static_cast<double>(n);
    return std::exp(-mu + k * std::log(mu) - std::lgamma(k + 1.0));
}

double click_probability(double mu, double eta)
{
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw std::domain_error("click_probability: mean must be finite and >= 0");
    }
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw std::domain_error("click_probability: efficiency must lie in [0, 1]");
    }
    return -std::expm1(-mu * eta);
}

MeasuredMeans predicted_independent_means(const SourceSpec& source_1, const SourceSpec& source_2)
{
    return {click_probability(source_1.mean_photons_per_pulse, source_1.efficiency),
            click_probability(source_2.mean_photons_per_pulse, source_2.efficiency)};
}

MeasuredMeans predicted_simultaneous_means(const SourceSpec& source_1, const SourceSpec& source_2,
                                           const Regime& regime)
{
    MeasuredMeans means = predicted_independent_means(source_1, source_2);
    if (regime.pseudo_antibunching()) {
        means.pulse_2 *= 1.0 - means.pulse_1;
    }
    return means;
}

CurvePeak measured_curve_peak(double ratio)
{
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw std::domain_error("measured_curve_peak: ratio must be positive");
    }
    const double x = std::log1p(ratio) / ratio;
    return {x, std::exp(-x) * -std::expm1(-ratio * x)};
}

Regime classify_regime(const ExperimentSpec& spec)
{
    Regime regime;
    regime.delay = spec.delay();
    regime.dead_time = spec.detector.dead_time;
    regime.period = spec.period;
    regime.kind = regime.delay < regime.dead_time ? RegimeKind::pseudo_antibunching
                                                   : RegimeKind::independent;
    return regime;
}

}  // namespace rhbt
