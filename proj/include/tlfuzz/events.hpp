#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace tlfuzz {

using NodeId = std::int32_t;

// One observation at a node: packet traffic, client I/O, or an instrumented
// code point. Everything downstream (timelines, summaries, signatures) is
// built from these records.
struct EventKind {
  enum class Tag : std::uint8_t {
    PacketSend = 0,
    PacketRecv = 1,
    ClientRequest = 2,
    ClientResponse = 3,
    CodeEvent = 4,
  };

  Tag tag = Tag::CodeEvent;
  std::uint32_t code_id = 0;  // meaningful iff tag == CodeEvent
  std::string op_label;       // meaningful iff tag is ClientRequest/Response

  static EventKind packet_send() { return {Tag::PacketSend, 0, {}}; }
  static EventKind packet_recv() { return {Tag::PacketRecv, 0, {}}; }
  static EventKind client_request(std::string label) {
    return {Tag::ClientRequest, 0, std::move(label)};
  }
  static EventKind client_response(std::string label) {
    return {Tag::ClientResponse, 0, std::move(label)};
  }
  static EventKind code(std::uint32_t id) { return {Tag::CodeEvent, id, {}}; }

  friend auto operator<=>(const EventKind&, const EventKind&) = default;

  // Stable text form, e.g. "code:3" or "req:write"; used for canonical JSON
  // exports and for hashing, so it must not depend on interning order.
  std::string canonical() const;
  std::uint64_t hash64() const;
};

struct PacketId {
  std::uint64_t value = 0;
  friend auto operator<=>(const PacketId&, const PacketId&) = default;
};

struct Event {
  NodeId node = 0;
  std::int64_t mono_ts = 0;  // ns since node boot
  EventKind kind;
  PacketId packet{};              // meaningful iff kind is PacketSend/Recv
  std::uint64_t seq_in_node = 0;  // strictly increasing within a boot

  friend bool operator==(const Event&, const Event&) = default;
};

// Clock anchors a node submits at boot: a monotonic reading and the
// corresponding (skewed) wall-clock reading, plus the campaign-wide bound on
// how far apart any two nodes' wall clocks may drift.
struct ClockRef {
  NodeId node = 0;
  std::int64_t mono_anchor = 0;
  std::int64_t real_anchor = 0;
  std::int64_t skew_bound_ns = 0;
};

struct Batch {
  NodeId node = 0;
  std::uint32_t epoch = 0;   // boot epoch; seq_no restarts at 0 per boot
  std::uint64_t seq_no = 0;  // consecutive per (node, epoch)
  std::int64_t flush_mono_ts = 0;  // node had submitted everything up to here
  std::vector<Event> events;
};

// Deterministic 64-bit packet identity from (src, dst, per-sender sequence).
// Equal on the send and receive side of the same packet.
PacketId make_packet_id(NodeId src, NodeId dst, std::int64_t send_seq);

// Converts a node-local monotonic timestamp to that node's wall-clock time.
// Throws std::invalid_argument if mono_ts predates the boot anchor.
std::int64_t mono_to_real(const ClockRef& clock, std::int64_t mono_ts);

// One-JSON-object-per-line trace interchange. Field order is fixed:
// node, mono_ts, kind, code_id, op_label, packet, seq_in_node.
std::string event_to_jsonl(const Event& ev);
Event event_from_jsonl(const std::string& line);

}  // namespace tlfuzz
