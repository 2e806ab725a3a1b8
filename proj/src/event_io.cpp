#include "rhbt/event_io.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace rhbt {

namespace {

constexpr std::size_t kBufferRecords = 8192;

void put_u32(unsigned char* out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out[i] = static_cast<unsigned char>(v >> (8 * i));
    }
}

void put_u64(unsigned char* out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<unsigned char>(v >> (8 * i));
    }
}

std::uint32_t get_u32(const unsigned char* in)
{
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | in[i];
    }
    return v;
}

std::uint64_t get_u64(const unsigned char* in)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | in[i];
    }
    return v;
}

}  // namespace

std::string_view to_string(StreamErrorKind kind)
{
    switch (kind) {
    case StreamErrorKind::bad_magic:
        return "BadMagic";
    case StreamErrorKind::unsupported_version:
        return "UnsupportedVersion";
    case StreamErrorKind::truncated_file:
        return "TruncatedFile";
    case StreamErrorKind::non_monotonic_timestamp:
        return "NonMonotonicTimestamp";
    case StreamErrorKind::invalid_header:
        return "InvalidHeader";
    case StreamErrorKind::record_count_mismatch:
        return "RecordCountMismatch";
    case StreamErrorKind::write_failed:
        return "WriteFailed";
    }
    return "?";
}

StreamError::StreamError(StreamErrorKind kind, std::uint64_t byte_offset, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(byte_offset) +
                         ": " + detail),
      kind_(kind),
      byte_offset_(byte_offset)
{
}

std::uint64_t write_stream(const StreamHeader& header, std::span<const ClickEvent> records,
                           std::ostream& sink)
{
    if (header.n_records != records.size()) {
        throw StreamError(StreamErrorKind::record_count_mismatch, 0,
                          "header declares " + std::to_string(header.n_records) + " records, got " +
                              std::to_string(records.size()));
    }

    std::array<unsigned char, kStreamHeaderBytes> head{};
    std::memcpy(head.data(), header.magic.data(), 8);
    put_u32(head.data() + 8, header.format_version);
    put_u32(head.data() + 12, 0);
    put_u64(head.data() + 16, header.tick_resolution_ps);
    put_u64(head.data() + 24, header.sync_period_ticks);
    put_u64(head.data() + 32, header.n_records);
    std::copy(header.spec_digest.begin(), header.spec_digest.end(), head.begin() + 40);
    sink.write(reinterpret_cast<const char*>(head.data()), head.size());

    std::vector<unsigned char> block;
    block.reserve(kBufferRecords * kStreamRecordBytes);
    std::uint64_t previous = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Ticks t = records[i].timestamp;
        if (t < 0 || static_cast<std::uint64_t>(t) < previous) {
            throw StreamError(StreamErrorKind::non_monotonic_timestamp,
                              kStreamHeaderBytes + i * kStreamRecordBytes,
                              "records must be nonnegative and sorted");
        }
        previous = static_cast<std::uint64_t>(t);
        block.resize(block.size() + kStreamRecordBytes);
        put_u64(block.data() + block.size() - kStreamRecordBytes, previous);
        if (block.size() == block.capacity() || i + 1 == records.size()) {
            sink.write(reinterpret_cast<const char*>(block.data()),
                       static_cast<std::streamsize>(block.size()));
            block.clear();
        }
    }
    if (!sink) {
        throw StreamError(StreamErrorKind::write_failed, 0, "sink rejected the write");
    }
    return kStreamHeaderBytes + kStreamRecordBytes * records.size();
}

StreamReader::StreamReader(std::istream& source) : source_(source)
{
    std::array<unsigned char, kStreamHeaderBytes> head{};
    source_.read(reinterpret_cast<char*>(head.data()), head.size());
    const auto got = static_cast<std::uint64_t>(source_.gcount());
    if (got < 8 || std::memcmp(head.data(), kStreamMagic.data(), 8) != 0) {
        if (got >= 8) {
            throw StreamError(StreamErrorKind::bad_magic, 0, "not an EventStream file");
        }
        throw StreamError(StreamErrorKind::truncated_file, got, "header is incomplete");
    }
    if (got < kStreamHeaderBytes) {
        throw StreamError(StreamErrorKind::truncated_file, got, "header is incomplete");
    }
    std::memcpy(header_.magic.data(), head.data(), 8);
    header_.format_version = get_u32(head.data() + 8);
    if (header_.format_version != kStreamFormatVersion) {
        throw StreamError(StreamErrorKind::unsupported_version, 8,
                          "format version " + std::to_string(header_.format_version));
    }
    header_.tick_resolution_ps = get_u64(head.data() + 16);
    header_.sync_period_ticks = get_u64(head.data() + 24);
    header_.n_records = get_u64(head.data() + 32);
    std::copy(head.begin() + 40, head.end(), header_.spec_digest.begin());
    if (header_.tick_resolution_ps == 0) {
        throw StreamError(StreamErrorKind::invalid_header, 16, "tick_resolution_ps must be >= 1");
    }
    if (header_.sync_period_ticks == 0) {
        throw StreamError(StreamErrorKind::invalid_header, 24, "sync_period_ticks must be >= 1");
    }
    buffer_.resize(kBufferRecords * kStreamRecordBytes);
}

void StreamReader::refill()
{
    // leftover bytes of a partial record stay at the front
    const std::size_t leftover = buffer_len_ - buffer_pos_;
    std::memmove(buffer_.data(), buffer_.data() + buffer_pos_, leftover);
    buffer_pos_ = 0;
    buffer_len_ = leftover;

    const std::uint64_t remaining = header_.n_records - records_read_;
    const std::size_t want = static_cast<std::size_t>(
        std::min<std::uint64_t>(remaining * kStreamRecordBytes, buffer_.size()));
    if (want > leftover) {
        source_.read(reinterpret_cast<char*>(buffer_.data() + leftover),
                     static_cast<std::streamsize>(want - leftover));
        buffer_len_ += static_cast<std::size_t>(source_.gcount());
    }
    if (buffer_len_ < kStreamRecordBytes) {
        const std::uint64_t end = kStreamHeaderBytes + records_read_ * kStreamRecordBytes + buffer_len_;
        throw StreamError(StreamErrorKind::truncated_file, end,
                          "expected " + std::to_string(header_.n_records) + " records, file ends after " +
                              std::to_string(records_read_));
    }
}

std::optional<std::uint64_t> StreamReader::next()
{
    if (records_read_ == header_.n_records) {
        return std::nullopt;
    }
    if (buffer_len_ - buffer_pos_ < kStreamRecordBytes) {
        refill();
    }
    const std::uint64_t t = get_u64(buffer_.data() + buffer_pos_);
    buffer_pos_ += kStreamRecordBytes;
    if (records_read_ > 0 && t < previous_) {
        throw StreamError(StreamErrorKind::non_monotonic_timestamp,
                          kStreamHeaderBytes + records_read_ * kStreamRecordBytes,
                          std::to_string(t) + " follows " + std::to_string(previous_));
    }
    previous_ = t;
    ++records_read_;
    return t;
}

void export_csv(StreamReader& reader, std::ostream& out)
{
    const std::uint64_t period = reader.header().sync_period_ticks;
    const std::uint64_t tick_ps = reader.header().tick_resolution_ps;
    out << "period_index,micro_time_ps\n";
    while (const auto t = reader.next()) {
        out << *t / period << ',' << (*t % period) * tick_ps << '\n';
    }
}

}  // namespace rhbt
