#include "arcturus/srheader.hpp"

#include <charconv>
#include <unordered_set>

namespace arcturus::sr {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }

  ByteView take(std::size_t n) {
    need(n);
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
  }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw CodecError(CodecErrc::Truncated, "need " + std::to_string(n) + " bytes at offset " +
                                                 std::to_string(pos_) + ", have " +
                                                 std::to_string(in_.size() - pos_));
    }
  }
  ByteView rest() const { return in_.subspan(pos_); }

 private:
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  ByteView in_;
  std::size_t pos_ = 0;
};

void check_header(const SegmentHeader& h) {
  if (h.hop_list.size() > kMaxHops)
    throw CodecError(CodecErrc::HopListTooLong,
                     std::to_string(h.hop_list.size()) + " hops exceeds " + std::to_string(kMaxHops));
  if (h.hop_counts > h.hop_list.size())
    throw CodecError(CodecErrc::InconsistentCounts, "hop_counts exceeds hop_list length");
}

}  // namespace

const char* to_string(CodecErrc code) {
  switch (code) {
    case CodecErrc::HopListTooLong: return "HopListTooLong";
    case CodecErrc::Truncated: return "Truncated";
    case CodecErrc::BadMagic: return "BadMagic";
    case CodecErrc::InconsistentCounts: return "InconsistentCounts";
    case CodecErrc::DuplicatePacketId: return "DuplicatePacketId";
    case CodecErrc::GapOrOverlap: return "GapOrOverlap";
    case CodecErrc::TooManyEntries: return "TooManyEntries";
  }
  return "Unknown";
}

CodecError::CodecError(CodecErrc code, const std::string& detail)
    : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

HopAddress HopAddress::parse(std::string_view text) {
  HopAddress addr;
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error("hop address missing port: " + std::string(text));
  std::string_view ip = text.substr(0, colon);
  std::string_view port = text.substr(colon + 1);
  for (int octet = 0; octet < 4; ++octet) {
    const auto dot = octet < 3 ? ip.find('.') : ip.size();
    if (dot == std::string_view::npos) throw Error("bad IPv4 address: " + std::string(text));
    unsigned v = 0;
    auto [p, ec] = std::from_chars(ip.data(), ip.data() + dot, v);
    if (ec != std::errc{} || p != ip.data() + dot || v > 255)
      throw Error("bad IPv4 address: " + std::string(text));
    addr.ipv4 = (addr.ipv4 << 8) | v;
    ip = octet < 3 ? ip.substr(dot + 1) : std::string_view{};
  }
  unsigned p = 0;
  auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc{} || end != port.data() + port.size() || p > 65535)
    throw Error("bad port: " + std::string(text));
  addr.port = static_cast<std::uint16_t>(p);
  return addr;
}

std::string HopAddress::to_string() const {
  return std::to_string(ipv4 >> 24) + "." + std::to_string((ipv4 >> 16) & 0xFF) + "." +
         std::to_string((ipv4 >> 8) & 0xFF) + "." + std::to_string(ipv4 & 0xFF) + ":" +
         std::to_string(port);
}

std::size_t encoded_size(const SegmentHeader& header, const MergedFrame& frame) {
  return kFixedHeaderSize + header.hop_list.size() * kHopEntrySize +
         frame.entries.size() * kFrameEntrySize + frame.payload.size();
}

Bytes encode_packet(const SegmentHeader& header, const MergedFrame& frame) {
  check_header(header);
  if (frame.entries.size() > kMaxFrameEntries)
    throw CodecError(CodecErrc::TooManyEntries, std::to_string(frame.entries.size()) + " entries");
  if (!frame.entries.empty() || !frame.payload.empty()) validate_frame(frame);

  Writer w(encoded_size(header, frame));
  w.u8(kMagic);
  w.u8(kVersion);
  w.u64(header.packet_id);
  w.u32(header.offset);
  w.u8(header.hop_counts);
  w.u8(static_cast<std::uint8_t>(header.hop_list.size()));
  for (const auto& hop : header.hop_list) {
    w.u32(hop.ipv4);
    w.u16(hop.port);
  }
  w.u16(static_cast<std::uint16_t>(frame.entries.size()));
  for (const auto& e : frame.entries) {
    w.u64(e.packet_id);
    w.u32(e.offset);
    w.u32(e.length);
  }
  w.bytes(frame.payload);
  return w.take();
}

Bytes encode_header(const SegmentHeader& header) { return encode_packet(header, MergedFrame{}); }

DecodedPacket decode_packet(ByteView bytes) {
  Reader r(bytes);
  DecodedPacket out;
  const auto magic = r.u8();
  const auto version = r.u8();
  if (magic != kMagic || version != kVersion)
    throw CodecError(CodecErrc::BadMagic, "magic/version mismatch");
  out.header.packet_id = r.u64();
  out.header.offset = r.u32();
  out.header.hop_counts = r.u8();
  const auto hop_len = r.u8();
  if (out.header.hop_counts > hop_len)
    throw CodecError(CodecErrc::InconsistentCounts,
                     "hop_counts " + std::to_string(out.header.hop_counts) + " > hop_list_len " +
                         std::to_string(hop_len));
  r.need(std::size_t{hop_len} * kHopEntrySize);
  out.header.hop_list.reserve(hop_len);
  for (unsigned i = 0; i < hop_len; ++i) {
    HopAddress hop;
    hop.ipv4 = r.u32();
    hop.port = r.u16();
    out.header.hop_list.push_back(hop);
  }
  const auto entry_count = r.u16();
  r.need(std::size_t{entry_count} * kFrameEntrySize);
  out.frame.entries.reserve(entry_count);
  std::uint64_t payload_len = 0;
  for (unsigned i = 0; i < entry_count; ++i) {
    FrameEntry e;
    e.packet_id = r.u64();
    e.offset = r.u32();
    e.length = r.u32();
    if (e.offset != payload_len)
      throw CodecError(CodecErrc::GapOrOverlap, "entry " + std::to_string(i) + " offset " +
                                                    std::to_string(e.offset) + " expected " +
                                                    std::to_string(payload_len));
    payload_len += e.length;
    out.frame.entries.push_back(e);
  }
  auto payload = r.take(static_cast<std::size_t>(payload_len));
  out.frame.payload.assign(payload.begin(), payload.end());
  if (entry_count > 0) validate_frame(out.frame);
  out.remainder = r.rest();
  return out;
}

std::pair<SegmentHeader, ByteView> decode_header(ByteView bytes) {
  auto decoded = decode_packet(bytes);
  return {std::move(decoded.header), decoded.remainder};
}

std::pair<RouteAction, SegmentHeader> next_hop(const SegmentHeader& header) {
  if (header.hop_counts == 0) return {Egress{}, header};
  SegmentHeader advanced = header;
  const auto next = header.hop_list[header.hop_list.size() - header.hop_counts];
  advanced.hop_counts = static_cast<std::uint8_t>(header.hop_counts - 1);
  return {ForwardTo{next}, std::move(advanced)};
}

void validate_frame(const MergedFrame& frame) {
  std::uint64_t cursor = 0;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& e : frame.entries) {
    if (e.offset != cursor)
      throw CodecError(CodecErrc::GapOrOverlap, "entry for packet " + std::to_string(e.packet_id) +
                                                    " starts at " + std::to_string(e.offset) +
                                                    ", expected " + std::to_string(cursor));
    if (!seen.insert(e.packet_id).second)
      throw CodecError(CodecErrc::DuplicatePacketId, std::to_string(e.packet_id));
    cursor += e.length;
  }
  if (cursor != frame.payload.size())
    throw CodecError(CodecErrc::GapOrOverlap, "entries cover " + std::to_string(cursor) +
                                                  " bytes of a " +
                                                  std::to_string(frame.payload.size()) + "-byte payload");
}

MergedFrame build_frame(std::span<const SubRequest> subrequests) {
  if (subrequests.size() > kMaxFrameEntries)
    throw CodecError(CodecErrc::TooManyEntries, std::to_string(subrequests.size()) + " entries");
  MergedFrame frame;
  std::unordered_set<std::uint64_t> seen;
  std::size_t total = 0;
  for (const auto& s : subrequests) total += s.bytes.size();
  if (total > UINT32_MAX) throw CodecError(CodecErrc::GapOrOverlap, "payload exceeds 4 GiB");
  frame.payload.reserve(total);
  frame.entries.reserve(subrequests.size());
  for (const auto& s : subrequests) {
    if (!seen.insert(s.packet_id).second)
      throw CodecError(CodecErrc::DuplicatePacketId, std::to_string(s.packet_id));
    frame.entries.push_back({s.packet_id, static_cast<std::uint32_t>(frame.payload.size()),
                             static_cast<std::uint32_t>(s.bytes.size())});
    frame.payload.insert(frame.payload.end(), s.bytes.begin(), s.bytes.end());
  }
  return frame;
}

std::vector<SubRequest> split_frame(const MergedFrame& frame) {
  validate_frame(frame);
  std::vector<SubRequest> out;
  out.reserve(frame.entries.size());
  for (const auto& e : frame.entries) {
    const auto first = frame.payload.begin() + e.offset;
    out.push_back({e.packet_id, Bytes(first, first + e.length)});
  }
  return out;
}

}  // namespace arcturus::sr
