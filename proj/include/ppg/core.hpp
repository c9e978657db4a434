#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppg/types.hpp"

namespace ppg {

// Task description observed at the start of an episode. group_key identifies
// the trajectory group used for advantage standardization.
struct Context {
  std::uint64_t id = 0;
  VectorX features;  // may be empty
  std::string group_key = "default";
};

// One interaction step: action index, observation index, per-step reward.
struct Step {
  int action = 0;
  int observation = 0;
  Scalar reward = 0.0;
};

// Reward-free view of an interaction prefix; what policies and environment
// rules condition on.
struct ActionObs {
  int action = 0;
  int observation = 0;
};

using History = std::vector<ActionObs>;

struct Trajectory {
  Context context;
  std::vector<Step> steps;
  Scalar total_reward = 0.0;

  int horizon() const { return static_cast<int>(steps.size()); }
};

// A batch of trajectories sharing one horizon. Horizon uniformity is checked
// here once; downstream estimators rely on it.
class Batch {
 public:
  Batch(std::vector<Trajectory> trajectories, int horizon);

  static Batch from_trajectories(std::vector<Trajectory> trajectories);

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }
  int size() const { return static_cast<int>(trajectories_.size()); }
  int horizon() const { return horizon_; }

 private:
  std::vector<Trajectory> trajectories_;
  int horizon_ = 0;
};

// Gradient estimate with provenance.
struct GradientEstimate {
  VectorX values;
  std::string scheme_label;
  int batch_size = 0;
  std::uint64_t seed = 0;
};

void validate_step(const Step& step, int num_actions, int num_observations);

// Decimal with 17 significant digits; recovers every 64-bit float exactly.
std::string format_real(Scalar v);

// Per-step rewards of a trajectory as a dense vector.
VectorX step_rewards(const Trajectory& traj);

// JSONL dataset interchange. One object per line with fields exactly
// context_id, group_key, context_features, steps ({a, y, r}); reals carry 17
// significant digits so a write/read round trip is bit-faithful.
void write_trajectories(const std::string& path, const Batch& batch);
Batch read_trajectories(const std::string& path);

std::string gradient_to_json(const GradientEstimate& estimate);

}  // namespace ppg
