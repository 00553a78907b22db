#pragma once

// Segment-routing header and merged-frame wire format.
//
// Layout (big-endian):
//   magic 0xA7 (1) | version 1 (1) | packet_id (8) | offset (4) |
//   hop_counts (1) | hop_list_len (1) | hops: ipv4 (4) + port (2) each |
//   frame_entry_count (2) | entries: packet_id (8) + offset (4) + length (4) each |
//   payload (sum of entry lengths)
//
// hop_counts is the number of hops still to visit; the next hop is
// hop_list[len - hop_counts], so the full list survives to the egress.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "arcturus/error.hpp"

namespace arcturus::sr {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::uint8_t kMagic = 0xA7;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kFixedHeaderSize = 18;
inline constexpr std::size_t kHopEntrySize = 6;
inline constexpr std::size_t kFrameEntrySize = 16;
inline constexpr std::size_t kMaxHops = 255;
inline constexpr std::size_t kMaxFrameEntries = 65535;

struct HopAddress {
  std::uint32_t ipv4 = 0;
  std::uint16_t port = 0;

  // "a.b.c.d:port"
  static HopAddress parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const HopAddress&) const = default;
  auto operator<=>(const HopAddress&) const = default;
};

struct SegmentHeader {
  std::uint64_t packet_id = 0;
  std::uint32_t offset = 0;
  std::vector<HopAddress> hop_list;
  std::uint8_t hop_counts = 0;

  bool operator==(const SegmentHeader&) const = default;
};

struct FrameEntry {
  std::uint64_t packet_id = 0;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;

  bool operator==(const FrameEntry&) const = default;
};

struct MergedFrame {
  std::vector<FrameEntry> entries;
  Bytes payload;

  bool empty() const { return entries.empty(); }
  bool operator==(const MergedFrame&) const = default;
};

struct SubRequest {
  std::uint64_t packet_id = 0;
  Bytes bytes;

  bool operator==(const SubRequest&) const = default;
};

enum class CodecErrc {
  HopListTooLong,
  Truncated,
  BadMagic,
  InconsistentCounts,
  DuplicatePacketId,
  GapOrOverlap,
  TooManyEntries,
};

const char* to_string(CodecErrc code);

class CodecError : public Error {
 public:
  CodecError(CodecErrc code, const std::string& detail);
  CodecErrc code() const noexcept { return code_; }

 private:
  CodecErrc code_;
};

struct ForwardTo {
  HopAddress next;
  bool operator==(const ForwardTo&) const = default;
};
struct Egress {
  bool operator==(const Egress&) const = default;
};
using RouteAction = std::variant<ForwardTo, Egress>;

Bytes encode_header(const SegmentHeader& header);
Bytes encode_packet(const SegmentHeader& header, const MergedFrame& frame);
std::size_t encoded_size(const SegmentHeader& header, const MergedFrame& frame);

struct DecodedPacket {
  SegmentHeader header;
  MergedFrame frame;
  ByteView remainder;
};

// Never reads past the end of `bytes`; every failure is a CodecError.
DecodedPacket decode_packet(ByteView bytes);
std::pair<SegmentHeader, ByteView> decode_header(ByteView bytes);

std::pair<RouteAction, SegmentHeader> next_hop(const SegmentHeader& header);

MergedFrame build_frame(std::span<const SubRequest> subrequests);
std::vector<SubRequest> split_frame(const MergedFrame& frame);

// Throws GapOrOverlap or DuplicatePacketId when the frame invariants fail.
void validate_frame(const MergedFrame& frame);

}  // namespace arcturus::sr
