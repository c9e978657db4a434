#include "ppg/core.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ppg {

// %.17g: shortest fixed form that recovers every 64-bit float exactly.
std::string format_real(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Batch::Batch(std::vector<Trajectory> trajectories, int horizon)
    : trajectories_(std::move(trajectories)), horizon_(horizon) {
  if (trajectories_.empty()) throw ValidationError("batch must contain at least one trajectory");
  if (horizon_ < 1) throw ValidationError("batch horizon must be >= 1");
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    const auto& traj = trajectories_[i];
    if (traj.horizon() != horizon_) {
      throw ValidationError("inconsistent horizon in trajectory " + std::to_string(i) + ": expected " +
                            std::to_string(horizon_) + ", got " + std::to_string(traj.horizon()));
    }
    if (traj.context.group_key.empty()) {
      throw ValidationError("empty group_key in trajectory " + std::to_string(i));
    }
    for (const Step& step : traj.steps) {
      if (!std::isfinite(step.reward)) {
        throw ValidationError("non-finite reward in trajectory " + std::to_string(i));
      }
    }
  }
}

Batch Batch::from_trajectories(std::vector<Trajectory> trajectories) {
  if (trajectories.empty()) throw ValidationError("batch must contain at least one trajectory");
  const int horizon = trajectories.front().horizon();
  return Batch(std::move(trajectories), horizon);
}

void validate_step(const Step& step, int num_actions, int num_observations) {
  if (step.action < 0 || step.action >= num_actions) {
    throw ValidationError("action " + std::to_string(step.action) + " outside alphabet of size " +
                          std::to_string(num_actions));
  }
  if (step.observation < 0 || step.observation >= num_observations) {
    throw ValidationError("observation " + std::to_string(step.observation) + " outside alphabet of size " +
                          std::to_string(num_observations));
  }
  if (!std::isfinite(step.reward)) throw ValidationError("non-finite reward");
}

VectorX step_rewards(const Trajectory& traj) {
  VectorX r(traj.horizon());
  for (int t = 0; t < traj.horizon(); ++t) r[t] = traj.steps[static_cast<std::size_t>(t)].reward;
  return r;
}

void write_trajectories(const std::string& path, const Batch& batch) {
  for (const Trajectory& traj : batch.trajectories()) {
    for (const Step& step : traj.steps) {
      if (!std::isfinite(step.reward)) throw ValidationError("non-finite reward");
    }
    for (int k = 0; k < traj.context.features.size(); ++k) {
      if (!std::isfinite(traj.context.features[k])) throw ValidationError("non-finite context feature");
    }
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);

  // Lines are assembled by hand to control real-number formatting.
  for (const Trajectory& traj : batch.trajectories()) {
    std::ostringstream line;
    line << "{\"context_id\": " << traj.context.id;
    line << ", \"group_key\": " << nlohmann::json(traj.context.group_key).dump();
    line << ", \"context_features\": [";
    for (int k = 0; k < traj.context.features.size(); ++k) {
      if (k > 0) line << ", ";
      line << format_real(traj.context.features[k]);
    }
    line << "], \"steps\": [";
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const Step& s = traj.steps[t];
      if (t > 0) line << ", ";
      line << "{\"a\": " << s.action << ", \"y\": " << s.observation << ", \"r\": " << format_real(s.reward)
           << "}";
    }
    line << "]}";
    out << line.str() << "\n";
  }
  if (!out) throw IoError("write failure: " + path);
}

Batch read_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);

  std::vector<Trajectory> trajectories;
  int horizon = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed JSON at line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Trajectory traj;
      traj.context.id = obj.at("context_id").get<std::uint64_t>();
      traj.context.group_key = obj.at("group_key").get<std::string>();
      const auto& feats = obj.at("context_features");
      traj.context.features.resize(static_cast<Eigen::Index>(feats.size()));
      for (std::size_t k = 0; k < feats.size(); ++k) {
        traj.context.features[static_cast<Eigen::Index>(k)] = feats[k].get<Scalar>();
      }
      const auto& steps = obj.at("steps");
      for (const auto& s : steps) {
        Step step;
        step.action = s.at("a").get<int>();
        step.observation = s.at("y").get<int>();
        step.reward = s.at("r").get<Scalar>();
        if (!std::isfinite(step.reward)) {
          throw ValidationError("non-finite reward at line " + std::to_string(line_no));
        }
        traj.steps.push_back(step);
        traj.total_reward += step.reward;
      }
      if (traj.steps.empty()) throw ValidationError("empty steps array at line " + std::to_string(line_no));
      if (traj.context.group_key.empty()) {
        throw ValidationError("empty group_key at line " + std::to_string(line_no));
      }
      if (horizon < 0) {
        horizon = traj.horizon();
      } else if (traj.horizon() != horizon) {
        throw ValidationError("inconsistent horizon at line " + std::to_string(line_no) + ": expected " +
                              std::to_string(horizon) + ", got " + std::to_string(traj.horizon()));
      }
      trajectories.push_back(std::move(traj));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("invalid record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (trajectories.empty()) throw ValidationError("empty dataset: " + path);
  return Batch(std::move(trajectories), horizon);
}

std::string gradient_to_json(const GradientEstimate& estimate) {
  nlohmann::ordered_json obj;
  obj["values"] = std::vector<Scalar>(estimate.values.data(), estimate.values.data() + estimate.values.size());
  obj["scheme_label"] = estimate.scheme_label;
  obj["batch_size"] = estimate.batch_size;
  obj["seed"] = estimate.seed;
  return obj.dump();
}

}  // namespace ppg
