#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tlfuzz/abstraction.hpp"

namespace tlfuzz {

using StateId = std::int64_t;

// MinHash signature of an abstraction's item set. Positionwise-equal minima
// estimate Jaccard similarity between the underlying sets.
struct StateSignature {
  std::uint32_t k = 0;
  std::uint64_t hash_seed = 0;
  std::vector<std::uint64_t> minima;  // length k; all-ones for the empty set
  std::uint64_t set_size = 0;         // metadata; not part of similarity

  friend bool operator==(const StateSignature& a, const StateSignature& b) {
    return a.k == b.k && a.hash_seed == b.hash_seed && a.minima == b.minima;
  }
};

StateSignature signature_of_items(std::span<const std::uint64_t> items,
                                  std::uint32_t k, std::uint64_t hash_seed);
StateSignature signature(const EventHistory& h, std::uint32_t k,
                         std::uint64_t hash_seed);

// Estimated Jaccard similarity: fraction of equal minima positions.
// Throws if k or hash_seed differ.
double similarity(const StateSignature& a, const StateSignature& b);

struct Classification {
  StateId id = 0;
  bool is_new = false;
};

// Registry of distinct abstract states. Representatives are pairwise less
// than epsilon similar at the time each was inserted.
class StateRegistry {
 public:
  struct Entry {
    StateSignature sig;
    std::int64_t first_seen_step = -1;
  };

  // Classifies against all representatives: below-threshold maxima register
  // a fresh state, otherwise the most similar representative wins (ties go
  // to the lowest id).
  Classification classify(const StateSignature& sig, double epsilon);

  void note_first_seen(StateId id, std::int64_t step);
  std::size_t size() const { return entries_.size(); }
  const Entry& entry(StateId id) const { return entries_.at(static_cast<std::size_t>(id)); }
  std::string to_csv() const;  // state_id,first_seen_step,item_count

 private:
  std::vector<Entry> entries_;
};

struct CalibrationResult {
  double epsilon = 0.0;
  double coincide_fraction = 0.0;
  bool degenerate = false;  // nothing on the grid reached the target
};

// Picks the largest epsilon on a 0.01 grid for which sequentially classifying
// the steady-state summaries makes at least 90% of them coincide.
CalibrationResult calibrate(const std::vector<EventHistory>& steady_histories,
                            std::uint32_t k, std::uint64_t hash_seed,
                            std::size_t min_summaries = 20);

}  // namespace tlfuzz
