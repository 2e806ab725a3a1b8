#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rhbt/event_io.hpp"

using namespace rhbt;

namespace {

std::vector<ClickEvent> clicks_from(const std::vector<Ticks>& times, Ticks period)
{
    std::vector<ClickEvent> out;
    for (const Ticks t : times) {
        out.push_back({t, static_cast<std::uint64_t>(t / period)});
    }
    return out;
}

std::string encode(const StreamHeader& header, const std::vector<ClickEvent>& clicks)
{
    std::ostringstream out(std::ios::binary);
    write_stream(header, clicks, out);
    return out.str();
}

StreamErrorKind read_error(const std::string& bytes, std::uint64_t* offset = nullptr)
{
    std::istringstream in(bytes, std::ios::binary);
    try {
        StreamReader reader(in);
        while (reader.next()) {
        }
    } catch (const StreamError& e) {
        if (offset) *offset = e.byte_offset();
        return e.kind();
    }
    FAIL("no StreamError");
    return StreamErrorKind::write_failed;
}

}  // namespace

TEST_CASE("stream size is header plus eight bytes per record")
{
    StreamHeader h;
    h.sync_period_ticks = 1'000'000;
    CHECK(encode(h, {}).size() == 72);
    h.n_records = 3;
    CHECK(encode(h, clicks_from({1, 2, 3}, 1'000'000)).size() == 96);
}

TEST_CASE("golden one-record file")
{
    StreamHeader h;
    h.tick_resolution_ps = 1;
    h.sync_period_ticks = 1'000'000;
    h.n_records = 1;
    const std::string bytes = encode(h, clicks_from({5000}, 1'000'000));

    std::ifstream golden(std::string(RHBT_TEST_DATA) + "/golden_one_record.ptes", std::ios::binary);
    REQUIRE(golden);
    const std::string expected((std::istreambuf_iterator<char>(golden)), std::istreambuf_iterator<char>());
    CHECK(bytes == expected);

    std::istringstream in(expected, std::ios::binary);
    StreamReader reader(in);
    CHECK(reader.header() == h);
    CHECK(reader.next() == std::optional<std::uint64_t>{5000});
    CHECK(!reader.next().has_value());
}

TEST_CASE("reader error kinds")
{
    StreamHeader h;
    h.sync_period_ticks = 1000;
    h.n_records = 3;
    const std::string good = encode(h, clicks_from({10, 20, 30}, 1000));

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(read_error(bad_magic) == StreamErrorKind::bad_magic);

    std::string bad_version = good;
    bad_version[8] = 2;
    CHECK(read_error(bad_version) == StreamErrorKind::unsupported_version);

    std::uint64_t offset = 0;
    const std::string cut = good.substr(0, good.size() - 11);
    CHECK(read_error(cut, &offset) == StreamErrorKind::truncated_file);
    CHECK(offset == cut.size());

    CHECK(read_error(good.substr(0, 40), &offset) == StreamErrorKind::truncated_file);
    CHECK(offset == 40);

    std::string swapped = good;
    swapped[72 + 8] = 5;  // second record becomes 5 < 10
    CHECK(read_error(swapped, &offset) == StreamErrorKind::non_monotonic_timestamp);
    CHECK(offset == 80);

    std::string zero_tick = good;
    zero_tick[16] = 0;
    CHECK(read_error(zero_tick) == StreamErrorKind::invalid_header);

    CHECK(to_string(StreamErrorKind::bad_magic) == "BadMagic");
    CHECK(to_string(StreamErrorKind::truncated_file) == "TruncatedFile");
}

TEST_CASE("writer rejects inconsistent input")
{
    StreamHeader h;
    h.sync_period_ticks = 1000;
    h.n_records = 2;
    std::ostringstream sink;
    CHECK_THROWS_AS(write_stream(h, clicks_from({1}, 1000), sink), StreamError);
    const auto backwards = clicks_from({9, 3}, 1000);
    try {
        write_stream(h, backwards, sink);
        FAIL("expected StreamError");
    } catch (const StreamError& e) {
        CHECK(e.kind() == StreamErrorKind::non_monotonic_timestamp);
    }
}

TEST_CASE("round trip over random streams, crossing the reader buffer size")
{
    std::mt19937_64 gen(17);
    for (std::size_t n : {0UL, 1UL, 8191UL, 8192UL, 8193UL, 30'000UL}) {
        std::vector<Ticks> times;
        Ticks t = 0;
        for (std::size_t i = 0; i < n; ++i) {
            t += static_cast<Ticks>(gen() % 200'000);
            times.push_back(t);
        }
        StreamHeader h;
        h.tick_resolution_ps = 4;
        h.sync_period_ticks = 250'000;
        h.n_records = n;
        for (std::size_t i = 0; i < h.spec_digest.size(); ++i) {
            h.spec_digest[i] = static_cast<std::uint8_t>(gen());
        }
        const std::string bytes = encode(h, clicks_from(times, 250'000));
        CHECK(bytes.size() == 72 + 8 * n);

        std::istringstream in(bytes, std::ios::binary);
        StreamReader reader(in);
        CHECK(reader.header() == h);
        std::vector<Ticks> back;
        while (const auto v = reader.next()) {
            back.push_back(static_cast<Ticks>(*v));
        }
        CHECK(back == times);
        CHECK(reader.records_read() == n);
    }
}

TEST_CASE("csv export")
{
    StreamHeader h;
    h.tick_resolution_ps = 2;
    h.sync_period_ticks = 500;
    h.n_records = 3;
    std::istringstream in(encode(h, clicks_from({7, 499, 1250}, 500)), std::ios::binary);
    StreamReader reader(in);
    std::ostringstream csv;
    export_csv(reader, csv);
    CHECK(csv.str() == "period_index,micro_time_ps\n0,14\n0,998\n2,500\n");
}
