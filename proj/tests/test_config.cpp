#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rhbt/config.hpp"

using namespace rhbt;

TEST_CASE("duration parsing")
{
    CHECK(parse_duration_ps("77", "ns") == 77'000.0);
    CHECK(parse_duration_ps("77ns", "ps") == 77'000.0);
    CHECK(parse_duration_ps("1 us", "ns") == 1e6);
    CHECK(parse_duration_ps("1μs", "ns") == 1e6);
    CHECK(parse_duration_ps("1µs", "ns") == 1e6);
    CHECK(parse_duration_ps("2.5ms", "ns") == 2.5e9);
    CHECK(parse_duration_ps("0.001s", "ns") == doctest::Approx(1e9));
    CHECK(parse_duration_ps("100ps", "ns") == 100.0);
    CHECK_THROWS_AS(parse_duration_ps("5 parsecs", "ns"), ConfigError);
    CHECK_THROWS_AS(parse_duration_ps("fast", "ns"), ConfigError);
    CHECK_THROWS_AS(parse_duration_ps("", "ns"), ConfigError);
}

TEST_CASE("default parameters produce the reference setup")
{
    const ExperimentSpec spec = SpecParameters{}.to_spec();
    const ExperimentSpec ref = reference_spec();
    CHECK(spec.period == ref.period);
    CHECK(spec.source_1.gate_offset == ref.source_1.gate_offset);
    CHECK(spec.source_2.gate_offset == ref.source_2.gate_offset);
    CHECK(spec.source_1.pulse_width == ref.source_1.pulse_width);
    CHECK(spec.detector.dead_time == ref.detector.dead_time);
    CHECK(spec.n_periods == ref.n_periods);
    CHECK(spec.delay() == 5000);
    CHECK(canonical_spec_text(spec) == canonical_spec_text(ref));
}

TEST_CASE("SpecParameters::set")
{
    SpecParameters p;
    p.set("period_ns", "500");
    p.set("delay_ns", "2 ns");
    p.set("dead_time_ns", "0.05us");
    p.set("mu1", "0.4543");
    p.set("n_periods", "1e5");
    p.set("seed", "12345");
    p.set("dark_rate_hz", "2kHz");
    p.set("tick_ps", "4");
    CHECK(p.period_ps == 500'000.0);
    CHECK(p.delay_ps == 2'000.0);
    CHECK(p.dead_time_ps == 50'000.0);
    CHECK(p.mu1 == 0.4543);
    CHECK(p.n_periods == 100'000);
    CHECK(p.seed == 12345);
    CHECK(p.dark_rate_hz == 2000.0);
    CHECK(p.tick_ps == 4);

    const ExperimentSpec spec = p.to_spec();
    CHECK(spec.period == 125'000);
    CHECK(spec.delay() == 500);
    CHECK(spec.tick_resolution_ps == 4);

    CHECK_THROWS_AS(p.set("colour", "blue"), ConfigError);
    CHECK_THROWS_AS(p.set("n_periods", "-3"), ConfigError);
    CHECK_THROWS_AS(p.set("n_periods", "2.5"), ConfigError);
    CHECK_THROWS_AS(p.set("mu1", "lots"), ConfigError);
    CHECK_THROWS_AS(p.set("dark_rate_hz", "3 GHz"), ConfigError);

    SpecParameters odd;
    odd.set("tick_ps", "3");
    CHECK_THROWS_AS(odd.to_spec(), SpecError);

    SpecParameters bad;
    bad.set("delay_ns", "0");
    CHECK_THROWS_AS(bad.to_spec(), SpecError);
}

TEST_CASE("config text parsing")
{
    const auto pairs = parse_config_text("# comment\nmu1 = 0.5   # trailing\n\n  delay_ns=5\n");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == std::pair<std::string, std::string>{"mu1", "0.5"});
    CHECK(pairs[1] == std::pair<std::string, std::string>{"delay_ns", "5"});

    try {
        parse_config_text("mu1 = 1\nwavelength = 800\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("mu1 0.5\n"), ConfigError);
}

TEST_CASE("config text round trip")
{
    SpecParameters p;
    p.set("mu1", "0.123456789");
    p.set("eta2", "0.37");
    p.set("delay_ns", "7.5");
    p.set("n_periods", "4321");
    p.set("dark_rate_hz", "100");

    SpecParameters q;
    for (const auto& [key, value] : parse_config_text(to_config_text(p))) {
        q.set(key, value);
    }
    CHECK(canonical_spec_text(q.to_spec()) == canonical_spec_text(p.to_spec()));
}

TEST_CASE("config files")
{
    const auto path = std::filesystem::temp_directory_path() / "rhbt_test_config.cfg";
    {
        std::ofstream f(path);
        f << "mu2 = 0.3043\nseed = 9\n";
    }
    const auto pairs = load_config_file(path);
    CHECK(pairs.size() == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config_file(path), std::runtime_error);
}

TEST_CASE("spec digest")
{
    const ExperimentSpec ref = reference_spec();
    const std::string hex = to_hex(spec_digest(ref));
    CHECK(hex.size() == 64);
    CHECK(hex == to_hex(spec_digest(SpecParameters{}.to_spec())));
    // SHA-256 of the canonical text, cross-checked with Python hashlib
    CHECK(hex == "e75e5900e13b1a5cf77fb9f95070ebf0d536902407db0baca38cb6972ca256b1");

    ExperimentSpec other = ref;
    other.rng_seed = 2;
    CHECK(to_hex(spec_digest(other)) != hex);
    other = ref;
    other.source_2.efficiency = 0.9999;
    CHECK(to_hex(spec_digest(other)) != hex);
}
