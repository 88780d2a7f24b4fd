#include "tlfuzz/abstraction.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "tlfuzz/rng.hpp"

namespace tlfuzz {

int EventHistory::find_kind(const EventKind& kind) const {
  auto it = std::lower_bound(dict_.begin(), dict_.end(), kind);
  if (it == dict_.end() || !(*it == kind)) return -1;
  return static_cast<int>(it - dict_.begin());
}

std::size_t EventHistory::intern(const EventKind& kind) {
  auto it = std::lower_bound(dict_.begin(), dict_.end(), kind);
  std::size_t idx = static_cast<std::size_t>(it - dict_.begin());
  if (it != dict_.end() && *it == kind) return idx;
  if (dict_.size() >= kMaxKinds) {
    throw std::length_error("event history: more than 64 distinct event kinds");
  }
  dict_.insert(it, kind);
  // Kind ids above the insertion point shift up by one; renumber all masks.
  std::uint64_t low_mask = (idx == 0) ? 0 : ((std::uint64_t{1} << idx) - 1);
  auto shift_mask = [&](std::uint64_t m) {
    return (m & low_mask) | ((m & ~low_mask) << 1);
  };
  for (auto& [node, nh] : nodes_) {
    nh.kinds = shift_mask(nh.kinds);
    for (std::size_t b = dict_.size(); b-- > idx + 1;) {
      nh.pairs[b] = shift_mask(nh.pairs[b - 1]);
    }
    if (idx < kMaxKinds) nh.pairs[idx] = 0;
    for (std::size_t b = 0; b < idx; ++b) nh.pairs[b] = shift_mask(nh.pairs[b]);
  }
  return idx;
}

EventHistory::NodeHist& EventHistory::hist(NodeId node) {
  auto it = std::lower_bound(
      nodes_.begin(), nodes_.end(), node,
      [](const std::pair<NodeId, NodeHist>& p, NodeId n) { return p.first < n; });
  if (it != nodes_.end() && it->first == node) return it->second;
  return nodes_.insert(it, {node, NodeHist{}})->second;
}

void EventHistory::update(const Event& ev) {
  std::size_t k = intern(ev.kind);
  NodeHist& nh = hist(ev.node);
  nh.kinds |= std::uint64_t{1} << k;
  // Every kind already seen at this node (including this one) happened before
  // the new occurrence.
  nh.pairs[k] |= nh.kinds;
}

void EventHistory::merge(const Event&, const EventHistory& other, const Event&) {
  if (other.nodes_.empty()) return;
  // Remap the other history's kind ids into this dictionary.
  std::array<std::size_t, kMaxKinds> remap{};
  for (std::size_t j = 0; j < other.dict_.size(); ++j) {
    remap[j] = intern(other.dict_[j]);
  }
  bool identity = other.dict_.size() == dict_.size();
  if (identity) {
    for (std::size_t j = 0; j < other.dict_.size(); ++j) {
      if (remap[j] != j) {
        identity = false;
        break;
      }
    }
  }
  auto remap_mask = [&](std::uint64_t m) {
    if (identity) return m;
    std::uint64_t out = 0;
    while (m) {
      unsigned j = static_cast<unsigned>(__builtin_ctzll(m));
      m &= m - 1;
      out |= std::uint64_t{1} << remap[j];
    }
    return out;
  };
  for (const auto& [node, theirs] : other.nodes_) {
    NodeHist& mine = hist(node);
    mine.kinds |= remap_mask(theirs.kinds);
    for (std::size_t b = 0; b < other.dict_.size(); ++b) {
      if (theirs.pairs[b]) mine.pairs[remap[b]] |= remap_mask(theirs.pairs[b]);
    }
  }
}

bool EventHistory::contains_kind(NodeId node, const EventKind& kind) const {
  int k = find_kind(kind);
  if (k < 0) return false;
  for (const auto& [n, nh] : nodes_) {
    if (n == node) return (nh.kinds >> k) & 1;
  }
  return false;
}

bool EventHistory::contains_pair(NodeId node, const EventKind& first,
                                 const EventKind& second) const {
  int a = find_kind(first);
  int b = find_kind(second);
  if (a < 0 || b < 0) return false;
  for (const auto& [n, nh] : nodes_) {
    if (n == node) return (nh.pairs[static_cast<std::size_t>(b)] >> a) & 1;
  }
  return false;
}

std::size_t EventHistory::item_count() const {
  std::size_t count = 0;
  for (const auto& [node, nh] : nodes_) {
    count += static_cast<std::size_t>(__builtin_popcountll(nh.kinds));
    for (std::size_t b = 0; b < dict_.size(); ++b) {
      count += static_cast<std::size_t>(__builtin_popcountll(nh.pairs[b]));
    }
  }
  return count;
}

std::vector<std::uint64_t> EventHistory::items() const {
  std::vector<std::uint64_t> out;
  out.reserve(item_count());
  std::array<std::uint64_t, kMaxKinds> kind_hash{};
  for (std::size_t i = 0; i < dict_.size(); ++i) kind_hash[i] = dict_[i].hash64();
  for (const auto& [node, nh] : nodes_) {
    std::uint64_t nh64 = mix64(static_cast<std::uint64_t>(node) + 0x517CC1B7ull);
    std::uint64_t m = nh.kinds;
    while (m) {
      unsigned k = static_cast<unsigned>(__builtin_ctzll(m));
      m &= m - 1;
      out.push_back(mix64(nh64 ^ kind_hash[k]));
    }
    for (std::size_t b = 0; b < dict_.size(); ++b) {
      std::uint64_t pm = nh.pairs[b];
      while (pm) {
        unsigned a = static_cast<unsigned>(__builtin_ctzll(pm));
        pm &= pm - 1;
        out.push_back(mix64(nh64 ^ mix64(kind_hash[a] + 3 * kind_hash[b])));
      }
    }
  }
  return out;
}

std::string EventHistory::to_json() const {
  std::ostringstream os;
  os << "{\"nodes\":{";
  bool first_node = true;
  for (const auto& [node, nh] : nodes_) {
    os << (first_node ? "" : ",") << "\"" << node << "\":{\"kinds\":[";
    first_node = false;
    bool first = true;
    for (std::size_t k = 0; k < dict_.size(); ++k) {
      if ((nh.kinds >> k) & 1) {
        os << (first ? "" : ",") << "\"" << dict_[k].canonical() << "\"";
        first = false;
      }
    }
    os << "],\"pairs\":[";
    first = true;
    // dict_ is sorted, so (a, b) ascending is lexicographic order.
    for (std::size_t a = 0; a < dict_.size(); ++a) {
      for (std::size_t b = 0; b < dict_.size(); ++b) {
        if ((nh.pairs[b] >> a) & 1) {
          os << (first ? "" : ",") << "[\"" << dict_[a].canonical() << "\",\""
             << dict_[b].canonical() << "\"]";
          first = false;
        }
      }
    }
    os << "]}";
  }
  os << "}}";
  return os.str();
}

bool operator==(const EventHistory& a, const EventHistory& b) {
  if (a.dict_ != b.dict_) return false;
  if (a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    if (a.nodes_[i].first != b.nodes_[i].first) return false;
    if (a.nodes_[i].second.kinds != b.nodes_[i].second.kinds) return false;
    if (a.nodes_[i].second.pairs != b.nodes_[i].second.pairs) return false;
  }
  return true;
}

std::vector<VertexRef> default_topological_order(const TimelineGraph& g) {
  auto edges = detail::edge_map(g);
  const int n_nodes = g.node_count();
  std::vector<std::int64_t> next(static_cast<std::size_t>(n_nodes), 0);
  std::vector<VertexRef> order;
  std::int64_t total = 0;
  for (int n = 0; n < n_nodes; ++n) total += g.cut(n);
  order.reserve(static_cast<std::size_t>(total));
  bool progress = true;
  while (progress) {
    progress = false;
    for (int n = 0; n < n_nodes; ++n) {
      auto ni = static_cast<std::size_t>(n);
      while (next[ni] < g.cut(n)) {
        VertexRef v{n, next[ni]};
        auto eit = edges.find({n, v.pos});
        if (eit != edges.end()) {
          auto sn = static_cast<std::size_t>(eit->second.node);
          if (eit->second.node != n && eit->second.pos >= next[sn]) break;
        }
        order.push_back(v);
        ++next[ni];
        progress = true;
      }
    }
  }
  if (static_cast<std::int64_t>(order.size()) != total) {
    throw std::logic_error("topological order: cycle in timeline graph");
  }
  return order;
}

}  // namespace tlfuzz
