#pragma once

#include <string>
#include <vector>

#include "ppg/types.hpp"

namespace ppg {

// Prefix scores f(tau_0) .. f(tau_n); entry 0 is pinned to zero.
class PrefixScoreSeries {
 public:
  explicit PrefixScoreSeries(VectorX values);

  const VectorX& values() const { return values_; }
  int horizon() const { return static_cast<int>(values_.size()) - 1; }

 private:
  VectorX values_;
};

// Per-step rewards r_t = f(tau_t) - f(tau_{t-1}); they sum back to f(tau_n).
VectorX telescope(const PrefixScoreSeries& series);

// Running maximum (index 0 included), turning any series into a nondecreasing
// one starting at zero. Telescoping the result gives nonnegative rewards.
PrefixScoreSeries monotonize(const PrefixScoreSeries& series);

// A credit scheme assigns to each step t the set of future reward indices its
// action is credited with. Steps and reward indices are 1-based.
class CreditScheme {
 public:
  enum class Kind { Full, Greedy, Lookahead, Segments, Custom };

  static CreditScheme full();
  static CreditScheme greedy();
  static CreditScheme lookahead(int window);
  // Blocks are consecutive segment lengths, e.g. {3, 3, 4} partitions 1..10.
  static CreditScheme segments(std::vector<int> block_lengths);
  // sets[t-1] holds the reward indices for step t; each must lie in {t..n}.
  static CreditScheme custom(std::vector<std::vector<int>> sets);

  // Spellings: full | greedy | lookahead:K | segments:3,3,4 | custom:@file.json
  static CreditScheme parse(const std::string& text);

  Kind kind() const { return kind_; }
  int lookahead_window() const { return window_; }
  const std::string& label() const { return label_; }

  // Reward indices credited to the action at step t (subset of {t..n}).
  std::vector<int> reward_indices(int t, int n) const;

  // Action indices whose credit sets contain reward step t. Always derived by
  // scanning reward_indices; closed forms live in the tests as cross-checks.
  std::vector<int> action_indices(int t, int n) const;

  // All reward index sets for horizon n, sets[t-1] for step t.
  std::vector<std::vector<int>> reward_sets(int n) const;
  std::vector<std::vector<int>> action_sets(int n) const;

 private:
  CreditScheme(Kind kind, std::string label) : kind_(kind), label_(std::move(label)) {}

  void check_step(int t, int n) const;

  Kind kind_;
  std::string label_;
  int window_ = 0;                        // Lookahead
  std::vector<int> boundaries_;           // Segments: inclusive end index per block
  std::vector<std::vector<int>> custom_;  // Custom: per-step reward sets
};

// Both sides of the credit-index duality: summing rewards over each action's
// credit set versus summing scores over each reward's contributing actions.
// weights holds r_1..r_n, score_vectors the n per-step d-vectors.
struct DualitySides {
  VectorX reward_major;  // sum_t (sum_{l in R_t} r_l) g_t
  VectorX action_major;  // sum_t r_t sum_{l in S_t} g_l
};

DualitySides check_duality(const CreditScheme& scheme, int n, const VectorX& weights,
                           const std::vector<VectorX>& score_vectors);

}  // namespace ppg
