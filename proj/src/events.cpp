#include "tlfuzz/events.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

#include "tlfuzz/rng.hpp"

namespace tlfuzz {

namespace {

constexpr std::array<const char*, 5> kTagNames = {
    "packet_send", "packet_recv", "client_request", "client_response",
    "code_event"};

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

void append_escaped(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
}

}  // namespace

std::string EventKind::canonical() const {
  switch (tag) {
    case Tag::PacketSend: return "send";
    case Tag::PacketRecv: return "recv";
    case Tag::ClientRequest: return "req:" + op_label;
    case Tag::ClientResponse: return "resp:" + op_label;
    case Tag::CodeEvent: return "code:" + std::to_string(code_id);
  }
  return "?";
}

std::uint64_t EventKind::hash64() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(tag) + 1);
  h = mix64(h ^ (static_cast<std::uint64_t>(code_id) + 0x51ED2701));
  if (!op_label.empty()) h = mix64(h ^ hash_str(op_label));
  return h;
}

PacketId make_packet_id(NodeId src, NodeId dst, std::int64_t send_seq) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(src) + 0x9E3779B9ull);
  h = mix64(h ^ (static_cast<std::uint64_t>(dst) + 0x7F4A7C15ull));
  h = mix64(h ^ static_cast<std::uint64_t>(send_seq));
  return PacketId{h};
}

std::int64_t mono_to_real(const ClockRef& clock, std::int64_t mono_ts) {
  if (mono_ts < clock.mono_anchor) {
    throw std::invalid_argument("mono_to_real: timestamp predates boot anchor");
  }
  return clock.real_anchor + (mono_ts - clock.mono_anchor);
}

std::string event_to_jsonl(const Event& ev) {
  std::string out;
  out.reserve(128);
  out += "{\"node\":";
  out += std::to_string(ev.node);
  out += ",\"mono_ts\":";
  out += std::to_string(ev.mono_ts);
  out += ",\"kind\":\"";
  out += kTagNames[static_cast<std::size_t>(ev.kind.tag)];
  out += "\",\"code_id\":";
  out += std::to_string(ev.kind.code_id);
  out += ",\"op_label\":";
  append_escaped(out, ev.kind.op_label);
  out += ",\"packet\":";
  out += std::to_string(ev.packet.value);
  out += ",\"seq_in_node\":";
  out += std::to_string(ev.seq_in_node);
  out += "}";
  return out;
}

namespace {

// Minimal scanner for the fixed-field trace lines above. Not a general JSON
// parser; rejects anything that does not match the writer's layout.
class LineScanner {
 public:
  explicit LineScanner(const std::string& s) : s_(s) {}

  void expect(const char* lit) {
    std::size_t n = std::char_traits<char>::length(lit);
    if (s_.compare(pos_, n, lit) != 0) {
      throw std::invalid_argument("trace line: expected '" + std::string(lit) +
                                  "' at offset " + std::to_string(pos_));
    }
    pos_ += n;
  }

  std::int64_t integer() {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{}) throw std::invalid_argument("trace line: bad integer");
    pos_ = static_cast<std::size_t>(p - s_.data());
    return v;
  }

  std::uint64_t uinteger() {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{}) throw std::invalid_argument("trace line: bad integer");
    pos_ = static_cast<std::size_t>(p - s_.data());
    return v;
  }

  std::string quoted() {
    if (pos_ >= s_.size() || s_[pos_] != '"') {
      throw std::invalid_argument("trace line: expected string");
    }
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(e);
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos_ >= s_.size()) throw std::invalid_argument("trace line: unterminated string");
    ++pos_;
    return out;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Event event_from_jsonl(const std::string& line) {
  LineScanner sc(line);
  Event ev;
  sc.expect("{\"node\":");
  ev.node = static_cast<NodeId>(sc.integer());
  sc.expect(",\"mono_ts\":");
  ev.mono_ts = sc.integer();
  sc.expect(",\"kind\":");
  std::string tag = sc.quoted();
  bool found = false;
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (tag == kTagNames[i]) {
      ev.kind.tag = static_cast<EventKind::Tag>(i);
      found = true;
      break;
    }
  }
  if (!found) throw std::invalid_argument("trace line: unknown kind '" + tag + "'");
  sc.expect(",\"code_id\":");
  ev.kind.code_id = static_cast<std::uint32_t>(sc.uinteger());
  sc.expect(",\"op_label\":");
  ev.kind.op_label = sc.quoted();
  sc.expect(",\"packet\":");
  ev.packet.value = sc.uinteger();
  sc.expect(",\"seq_in_node\":");
  ev.seq_in_node = sc.uinteger();
  sc.expect("}");
  return ev;
}

}  // namespace tlfuzz
