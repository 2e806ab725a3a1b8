#include "rhbt/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rhbt {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Splits "12.5ns" into {12.5, "ns"}.
std::pair<double, std::string_view> parse_quantity(std::string_view text, std::string_view key)
{
    text = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr == text.data() || !std::isfinite(value)) {
        throw ConfigError("bad number for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    return {value, trim(text.substr(static_cast<std::size_t>(ptr - text.data())))};
}

double unit_to_ps(std::string_view unit)
{
    if (unit == "ps") return 1.0;
    if (unit == "ns") return 1e3;
    if (unit == "us" || unit == "\xce\xbcs" || unit == "\xc2\xb5s") return 1e6;  // μs, µs
    if (unit == "ms") return 1e9;
    if (unit == "s") return 1e12;
    throw ConfigError("unknown time unit '" + std::string(unit) + "'");
}

double parse_real(std::string_view text, std::string_view key)
{
    const auto [value, rest] = parse_quantity(text, key);
    if (!rest.empty()) {
        throw ConfigError("unexpected suffix '" + std::string(rest) + "' for '" + std::string(key) + "'");
    }
    return value;
}

std::uint64_t parse_count(std::string_view text, std::string_view key)
{
    text = trim(text);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size()) {
        return value;
    }
    // allow 1e6 style
    const double real = parse_real(text, key);
    if (real < 0.0 || real != std::floor(real) || real > 1.8e19) {
        throw ConfigError("'" + std::string(key) + "' must be a nonnegative integer");
    }
    return static_cast<std::uint64_t>(real);
}

double parse_rate_hz(std::string_view text, std::string_view key)
{
    const auto [value, unit] = parse_quantity(text, key);
    if (unit.empty() || unit == "Hz" || unit == "hz") return value;
    if (unit == "kHz") return value * 1e3;
    if (unit == "MHz") return value * 1e6;
    throw ConfigError("unknown rate unit '" + std::string(unit) + "'");
}

Ticks to_ticks(double ps, std::uint64_t tick_ps, const char* name)
{
    const double ticks = ps / static_cast<double>(tick_ps);
    const double rounded = std::round(ticks);
    if (std::abs(ticks - rounded) > 1e-6 * std::max(1.0, std::abs(ticks))) {
        std::ostringstream os;
        os << name << " = " << ps << " ps is not a whole number of " << tick_ps << " ps ticks";
        throw SpecError(os.str());
    }
    return static_cast<Ticks>(rounded);
}

std::string format_real(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double parse_duration_ps(std::string_view text, std::string_view default_unit)
{
    const auto [value, unit] = parse_quantity(text, "duration");
    return value * unit_to_ps(unit.empty() ? default_unit : unit);
}

void SpecParameters::set(std::string_view key, std::string_view value)
{
    if (key == "period_ns") period_ps = parse_duration_ps(value, "ns");
    else if (key == "delay_ns") delay_ps = parse_duration_ps(value, "ns");
    else if (key == "dead_time_ns") dead_time_ps = parse_duration_ps(value, "ns");
    else if (key == "pulse_width_ps") pulse_width_ps = parse_duration_ps(value, "ps");
    else if (key == "mu1") mu1 = parse_real(value, key);
    else if (key == "eta1") eta1 = parse_real(value, key);
    else if (key == "mu2") mu2 = parse_real(value, key);
    else if (key == "eta2") eta2 = parse_real(value, key);
    else if (key == "n_periods") n_periods = parse_count(value, key);
    else if (key == "seed") seed = parse_count(value, key);
    else if (key == "dark_rate_hz") dark_rate_hz = parse_rate_hz(value, key);
    else if (key == "tick_ps") tick_ps = parse_count(value, key);
    else throw ConfigError("unknown key '" + std::string(key) + "'");
}

ExperimentSpec SpecParameters::to_spec() const
{
    if (tick_ps == 0) {
        throw SpecError("tick_ps must be at least 1");
    }
    ExperimentSpec spec;
    spec.tick_resolution_ps = tick_ps;
    spec.period = to_ticks(period_ps, tick_ps, "period");
    const Ticks width = to_ticks(pulse_width_ps, tick_ps, "pulse_width");
    const Ticks delay = to_ticks(delay_ps, tick_ps, "delay");
    spec.source_1 = {mu1, eta1, width, width};
    spec.source_2 = {mu2, eta2, width + delay, width};
    spec.detector = {to_ticks(dead_time_ps, tick_ps, "dead_time"), dark_rate_hz};
    spec.n_periods = n_periods;
    spec.rng_seed = seed;
    spec.validate();
    return spec;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) == std::end(kConfigKeys)) {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        entries.emplace_back(key, std::string(trim(line.substr(eq + 1))));
    }
    return entries;
}

std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string to_config_text(const SpecParameters& p)
{
    std::ostringstream os;
    os << "period_ns = " << format_real(p.period_ps / 1e3) << '\n'
       << "delay_ns = " << format_real(p.delay_ps / 1e3) << '\n'
       << "dead_time_ns = " << format_real(p.dead_time_ps / 1e3) << '\n'
       << "mu1 = " << format_real(p.mu1) << '\n'
       << "eta1 = " << format_real(p.eta1) << '\n'
       << "mu2 = " << format_real(p.mu2) << '\n'
       << "eta2 = " << format_real(p.eta2) << '\n'
       << "pulse_width_ps = " << format_real(p.pulse_width_ps) << '\n'
       << "n_periods = " << p.n_periods << '\n'
       << "seed = " << p.seed << '\n'
       << "dark_rate_hz = " << format_real(p.dark_rate_hz) << '\n'
       << "tick_ps = " << p.tick_ps << '\n';
    return os.str();
}

std::string canonical_spec_text(const ExperimentSpec& s)
{
    std::ostringstream os;
    const auto source = [&](const char* name, const SourceSpec& src) {
        os << name << ".mean_photons_per_pulse=" << format_real(src.mean_photons_per_pulse) << '\n'
           << name << ".efficiency=" << format_real(src.efficiency) << '\n'
           << name << ".gate_offset=" << src.gate_offset << '\n'
           << name << ".pulse_width=" << src.pulse_width << '\n';
    };
    os << "period=" << s.period << '\n';
    source("source_1", s.source_1);
    source("source_2", s.source_2);
    os << "detector.dead_time=" << s.detector.dead_time << '\n'
       << "detector.dark_count_rate=" << format_real(s.detector.dark_count_rate) << '\n'
       << "n_periods=" << s.n_periods << '\n'
       << "rng_seed=" << s.rng_seed << '\n'
       << "tick_resolution_ps=" << s.tick_resolution_ps << '\n';
    return os.str();
}

SpecDigest spec_digest(const ExperimentSpec& spec)
{
    const std::string text = canonical_spec_text(spec);
    SpecDigest digest{};
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1 ||
        length != digest.size()) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    return digest;
}

std::string to_hex(const SpecDigest& digest)
{
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest.size() * 2);
    for (const auto byte : digest) {
        out.push_back(kHex[byte >> 4]);
        out.push_back(kHex[byte & 0xF]);
    }
    return out;
}

}  // namespace rhbt
