#include "tlfuzz/novelty.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>

#include "tlfuzz/rng.hpp"

namespace tlfuzz {

StateSignature signature_of_items(std::span<const std::uint64_t> items,
                                  std::uint32_t k, std::uint64_t hash_seed) {
  if (k < 1) throw std::invalid_argument("signature: k must be >= 1");
  StateSignature sig;
  sig.k = k;
  sig.hash_seed = hash_seed;
  sig.set_size = items.size();
  sig.minima.assign(k, std::numeric_limits<std::uint64_t>::max());
  std::vector<std::uint64_t> keys(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    keys[i] = mix64(hash_seed + 0x9E3779B97F4A7C15ull * (i + 1));
  }
  for (std::uint64_t item : items) {
    for (std::uint32_t i = 0; i < k; ++i) {
      std::uint64_t h = mix64(item ^ keys[i]);
      if (h < sig.minima[i]) sig.minima[i] = h;
    }
  }
  return sig;
}

StateSignature signature(const EventHistory& h, std::uint32_t k,
                         std::uint64_t hash_seed) {
  return signature_of_items(h.items(), k, hash_seed);
}

double similarity(const StateSignature& a, const StateSignature& b) {
  if (a.k != b.k || a.hash_seed != b.hash_seed) {
    throw std::invalid_argument("similarity: signatures from different families");
  }
  std::uint32_t equal = 0;
  for (std::uint32_t i = 0; i < a.k; ++i) {
    if (a.minima[i] == b.minima[i]) ++equal;
  }
  return static_cast<double>(equal) / static_cast<double>(a.k);
}

Classification StateRegistry::classify(const StateSignature& sig, double epsilon) {
  if (epsilon <= 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("classify: epsilon must be in (0, 1]");
  }
  double best = -1.0;
  StateId best_id = -1;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    double s = similarity(sig, entries_[i].sig);
    if (s > best) {
      best = s;
      best_id = static_cast<StateId>(i);
    }
  }
  if (best_id >= 0 && best >= epsilon) {
    return Classification{best_id, false};
  }
  entries_.push_back(Entry{sig, -1});
  return Classification{static_cast<StateId>(entries_.size() - 1), true};
}

void StateRegistry::note_first_seen(StateId id, std::int64_t step) {
  entries_.at(static_cast<std::size_t>(id)).first_seen_step = step;
}

std::string StateRegistry::to_csv() const {
  std::ostringstream os;
  os << "state_id,first_seen_step,item_count\n";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    os << i << "," << entries_[i].first_seen_step << "," << entries_[i].sig.set_size
       << "\n";
  }
  return os.str();
}

CalibrationResult calibrate(const std::vector<EventHistory>& steady_histories,
                            std::uint32_t k, std::uint64_t hash_seed,
                            std::size_t min_summaries) {
  if (steady_histories.size() < min_summaries) {
    throw std::invalid_argument("calibrate: need at least " +
                                std::to_string(min_summaries) + " steady summaries");
  }
  std::vector<StateSignature> sigs;
  sigs.reserve(steady_histories.size());
  for (const EventHistory& h : steady_histories) {
    sigs.push_back(signature(h, k, hash_seed));
  }
  auto coincide_at = [&](double eps) {
    StateRegistry reg;
    std::size_t coincide = 0;
    for (const StateSignature& s : sigs) {
      if (!reg.classify(s, eps).is_new) ++coincide;
    }
    return static_cast<double>(coincide) / static_cast<double>(sigs.size());
  };
  for (int grid = 100; grid >= 1; --grid) {
    double eps = static_cast<double>(grid) / 100.0;
    double frac = coincide_at(eps);
    if (frac >= 0.90) return CalibrationResult{eps, frac, false};
  }
  return CalibrationResult{0.01, coincide_at(0.01), true};
}

}  // namespace tlfuzz
