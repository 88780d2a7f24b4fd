#include "tlfuzz/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tlfuzz {

QTable::QTable(int action_count, double alpha, double gamma)
    : action_count_(action_count), alpha_(alpha), gamma_(gamma) {
  if (action_count < 1) throw std::invalid_argument("qtable: need at least one action");
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("qtable: alpha in (0,1]");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("qtable: gamma in (0,1]");
}

std::vector<double>& QTable::row(StateId s) {
  auto it = rows_.find(s);
  if (it == rows_.end()) {
    it = rows_.emplace(s, std::vector<double>(static_cast<std::size_t>(action_count_), 0.0))
             .first;
  }
  return it->second;
}

double QTable::reward(StateId, int, StateId, bool was_new) {
  return was_new ? 0.0 : -1.0;
}

void QTable::update(StateId s, int action, double r, StateId s_next) {
  if (action < 0 || action >= action_count_) {
    throw std::invalid_argument("qtable: action out of range");
  }
  std::vector<double>& next_row = row(s_next);
  double best_next = *std::max_element(next_row.begin(), next_row.end());
  double& q = row(s)[static_cast<std::size_t>(action)];
  q = (1.0 - alpha_) * q + alpha_ * (r + gamma_ * best_next);
  if (gamma_ < 1.0) {
    double lo = -1.0 / (1.0 - gamma_) - 1e-9;
    if (q < lo || q > 1e-9) {
      throw std::logic_error("qtable: value escaped its bound after update");
    }
  }
}

std::vector<double> QTable::distribution(StateId s, const std::vector<bool>* enabled) {
  const std::vector<double>& r = row(s);
  if (enabled && enabled->size() != r.size()) {
    throw std::invalid_argument("qtable: mask size mismatch");
  }
  // Shift by the row max before exponentiating; softmax is shift-invariant
  // and this keeps exp() in range over long campaigns.
  double max_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if ((!enabled || (*enabled)[i]) && r[i] > max_q) max_q = r[i];
  }
  if (max_q == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("qtable: no enabled action");
  }
  std::vector<double> d(r.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!enabled || (*enabled)[i]) {
      d[i] = std::exp(r[i] - max_q);
      total += d[i];
    }
  }
  for (double& v : d) v /= total;
  return d;
}

int QTable::select(StateId s, Rng& rng, const std::vector<bool>* enabled) {
  std::vector<double> d = distribution(s, enabled);
  double p = rng.next_double();
  double cumulative = 0.0;
  int last_enabled = -1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) continue;
    last_enabled = static_cast<int>(i);
    cumulative += d[i];
    if (cumulative > p) return static_cast<int>(i);
  }
  return last_enabled;  // rounding left p at/above the final cumulative sum
}

double QTable::value(StateId s, int action) const {
  auto it = rows_.find(s);
  if (it == rows_.end()) return 0.0;
  return it->second.at(static_cast<std::size_t>(action));
}

double& QTable::row_value(StateId s, int action) {
  return row(s).at(static_cast<std::size_t>(action));
}

std::string QTable::to_csv(const std::vector<std::string>& action_names) const {
  std::ostringstream os;
  os << "state_id";
  for (const std::string& n : action_names) os << "," << n;
  os << "\n";
  os.precision(17);
  for (const auto& [s, r] : rows_) {
    os << s;
    for (double v : r) os << "," << v;
    os << "\n";
  }
  return os.str();
}

std::string QTable::checkpoint_json(const std::vector<std::string>& action_names) const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["alpha"] = alpha_;
  j["gamma"] = gamma_;
  j["actions"] = action_names;
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (const auto& [s, r] : rows_) {
    rows[std::to_string(s)] = r;
  }
  j["rows"] = std::move(rows);
  return j.dump();
}

QTable QTable::from_checkpoint_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw std::invalid_argument("qtable checkpoint: unsupported version");
  }
  auto actions = j["actions"].get<std::vector<std::string>>();
  QTable q(static_cast<int>(actions.size()), j["alpha"].get<double>(),
           j["gamma"].get<double>());
  for (auto it = j["rows"].begin(); it != j["rows"].end(); ++it) {
    StateId s = std::stoll(it.key());
    q.rows_[s] = it.value().get<std::vector<double>>();
  }
  return q;
}

}  // namespace tlfuzz
