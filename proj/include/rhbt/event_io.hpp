#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhbt/simulator.hpp"

namespace rhbt {

// EventStream file layout, all integers little-endian:
//
//   offset  size  field
//        0     8  magic "PTES0001"
//        8     4  format_version (u32, currently 1)
//       12     4  padding (zero)
//       16     8  tick_resolution_ps (u64)
//       24     8  sync_period_ticks (u64)
//       32     8  n_records (u64)
//       40    32  spec_digest (SHA-256 of the generating spec, zero if unknown)
//       72  8*n  timestamps (u64 ticks since run start, nondecreasing)

inline constexpr std::array<char, 8> kStreamMagic{'P', 'T', 'E', 'S', '0', '0', '0', '1'};
inline constexpr std::uint32_t kStreamFormatVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 72;
inline constexpr std::size_t kStreamRecordBytes = 8;

using SpecDigest = std::array<std::uint8_t, 32>;

struct StreamHeader {
    std::array<char, 8> magic = kStreamMagic;
    std::uint32_t format_version = kStreamFormatVersion;
    std::uint64_t tick_resolution_ps = 1;
    std::uint64_t sync_period_ticks = 1;
    std::uint64_t n_records = 0;
    SpecDigest spec_digest{};

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

enum class StreamErrorKind {
    bad_magic,
    unsupported_version,
    truncated_file,
    non_monotonic_timestamp,
    invalid_header,
    record_count_mismatch,
    write_failed,
};

std::string_view to_string(StreamErrorKind kind);

class StreamError : public std::runtime_error {
  public:
    StreamError(StreamErrorKind kind, std::uint64_t byte_offset, const std::string& detail);

    StreamErrorKind kind() const { return kind_; }
    /// Offset in the byte stream where the problem was detected.
    std::uint64_t byte_offset() const { return byte_offset_; }

  private:
    StreamErrorKind kind_;
    std::uint64_t byte_offset_;
};

/// Writes header and records. header.n_records must equal records.size().
std::uint64_t write_stream(const StreamHeader& header, std::span<const ClickEvent> records,
                           std::ostream& sink);

/// Reads records lazily through a fixed-size buffer, validating as it goes.
class StreamReader {
  public:
    /// Parses and validates the header immediately.
    explicit StreamReader(std::istream& source);

    const StreamHeader& header() const { return header_; }

    /// Next timestamp, or nullopt once n_records have been read.
    std::optional<std::uint64_t> next();

    std::uint64_t records_read() const { return records_read_; }

  private:
    void refill();

    std::istream& source_;
    StreamHeader header_;
    std::vector<unsigned char> buffer_;
    std::size_t buffer_pos_ = 0;
    std::size_t buffer_len_ = 0;
    std::uint64_t records_read_ = 0;
    std::uint64_t previous_ = 0;
};

inline StreamReader read_stream(std::istream& source) { return StreamReader(source); }

/// CSV with header `period_index,micro_time_ps`, one line per record.
void export_csv(StreamReader& reader, std::ostream& out);

}  // namespace rhbt
