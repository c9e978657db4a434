#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppg/credit.hpp"
#include "ppg/env.hpp"
#include "ppg/policy.hpp"
#include "ppg/types.hpp"

namespace ppg {

// Per-term bounds for the gradient concentration tail. c(t-1, l-1) bounds the
// magnitude of the term pairing reward step t with action step l; only entries
// with l in the scheme's action-index set S_t enter the bound.
struct BoundSpec {
  MatrixX c;
  int batch_size = 1;
  int dimension = 1;
  CreditScheme scheme = CreditScheme::full();
};

// Two-sided Hoeffding tail 2 exp(-eps^2 / (2 sum c_i^2)). Values above 1 are
// meaningful pre-clamp; clamp when reporting as a probability.
Scalar hoeffding_tail(const std::vector<Scalar>& c, Scalar epsilon);

// Tail bound on the 2-norm deviation of the empirical credited-score gradient:
// 2 d exp(-eps^2 B / (2 d (sum_t sum_{l in S_t} c_{t,l})^2)).
Scalar gradient_concentration_bound(const BoundSpec& spec, Scalar epsilon);

struct StudyRow {
  std::string scheme;
  int batch_size = 0;
  Scalar epsilon = 0.0;
  Scalar empirical_freq = 0.0;
  Scalar hoeffding_bound = 0.0;  // clamped to <= 1
  Scalar mean_dev_2norm = 0.0;
  int replications = 0;
  std::uint64_t seed = 0;
};

// For each (scheme, batch size): draws `replications` batches, measures the
// 2-norm deviation of the estimate from its center (the exact gradient when
// the env enumerates, the grand mean otherwise), and tabulates exceedance
// frequencies against the closed-form bound over the epsilon grid. Batches are
// shared across schemes, so schemes are compared on identical draws.
std::vector<StudyRow> concentration_study(const EnvSpec& env, const LogLinearPolicy& policy,
                                          const std::vector<CreditScheme>& schemes,
                                          const std::vector<int>& batch_sizes, int replications,
                                          const std::vector<Scalar>& epsilon_grid,
                                          std::uint64_t seed, int num_threads = 1);

// Columns: scheme,B,epsilon,empirical_freq,hoeffding_bound,mean_dev_2norm,
// replications,seed. Byte-identical for identical inputs.
void write_study_csv(const std::string& path, const std::vector<StudyRow>& rows);

// Central differences (V(theta + h e_j) - V(theta - h e_j)) / 2h.
VectorX finite_diff_gradient(const std::function<Scalar(const VectorX&)>& value_fn,
                             const VectorX& theta, Scalar h);

}  // namespace ppg
