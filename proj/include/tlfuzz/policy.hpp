#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tlfuzz/novelty.hpp"
#include "tlfuzz/rng.hpp"

namespace tlfuzz {

// Tabular state-action values with softmax action selection. Rows appear
// lazily, zero-initialised, as states are first visited.
class QTable {
 public:
  QTable(int action_count, double alpha = 0.1, double gamma = 0.6);

  // 0 for a transition into a previously unseen state, -1 otherwise.
  static double reward(StateId s, int action, StateId s_next, bool was_new);

  // Q(s,a) <- (1-a)Q(s,a) + a(r + g max_a' Q(s',a'))
  void update(StateId s, int action, double r, StateId s_next);

  // Softmax selection with cumulative sampling. Masked-out actions get
  // probability zero; the remainder renormalises.
  int select(StateId s, Rng& rng, const std::vector<bool>* enabled = nullptr);
  std::vector<double> distribution(StateId s, const std::vector<bool>* enabled = nullptr);

  double value(StateId s, int action) const;
  double& row_value(StateId s, int action);  // creates the row
  int action_count() const { return action_count_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  std::size_t row_count() const { return rows_.size(); }

  std::string to_csv(const std::vector<std::string>& action_names) const;
  std::string checkpoint_json(const std::vector<std::string>& action_names) const;
  static QTable from_checkpoint_json(const std::string& text);

 private:
  std::vector<double>& row(StateId s);

  int action_count_;
  double alpha_;
  double gamma_;
  std::map<StateId, std::vector<double>> rows_;
};

}  // namespace tlfuzz
