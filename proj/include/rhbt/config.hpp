#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rhbt/core_model.hpp"
#include "rhbt/event_io.hpp"

namespace rhbt {

/// Malformed config text: unknown key, bad number or unit.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Recognised keys, in canonical order.
inline constexpr std::string_view kConfigKeys[] = {
    "period_ns", "delay_ns", "dead_time_ns", "mu1",  "eta1",         "mu2",
    "eta2",      "pulse_width_ps", "n_periods", "seed", "dark_rate_hz", "tick_ps",
};

/// Duration string to picoseconds. Accepts a bare number in `default_unit`
/// or a suffix: ps, ns, us, μs, µs, ms, s.
double parse_duration_ps(std::string_view text, std::string_view default_unit);

/// Human-unit parameters of a run. Durations are stored in picoseconds.
/// Defaults are the laboratory reference setup.
struct SpecParameters {
    double period_ps = 1e6;
    double delay_ps = 5e3;
    double dead_time_ps = 77e3;
    double mu1 = 1.0;
    double eta1 = 1.0;
    double mu2 = 1.0;
    double eta2 = 1.0;
    double pulse_width_ps = 100.0;
    std::uint64_t n_periods = 1'000'000;
    std::uint64_t seed = 1;
    double dark_rate_hz = 0.0;
    std::uint64_t tick_ps = 1;

    /// Throws ConfigError for unknown keys or unparsable values.
    void set(std::string_view key, std::string_view value);

    /// Converts to ticks. The first pulse is centred one pulse width after
    /// the sync edge and the second `delay` later. Throws SpecError if a
    /// duration is not a whole number of ticks or the result is invalid.
    ExperimentSpec to_spec() const;
};

/// `key = value` lines; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);

/// Reads and parses a config file. Throws std::runtime_error if unreadable.
std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path);

/// Key/value lines that round-trip through SpecParameters::set.
std::string to_config_text(const SpecParameters& params);

/// Fully explicit, order-fixed text form of every spec field.
std::string canonical_spec_text(const ExperimentSpec& spec);

/// SHA-256 of canonical_spec_text.
SpecDigest spec_digest(const ExperimentSpec& spec);

std::string to_hex(const SpecDigest& digest);

}  // namespace rhbt
