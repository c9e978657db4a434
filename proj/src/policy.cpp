#include "ppg/policy.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ppg {

FeatureMap FeatureMap::tabular(int horizon, int num_observations, int num_actions) {
  if (horizon < 1) throw ValidationError("tabular feature map needs horizon >= 1");
  if (num_observations < 1) throw ValidationError("tabular feature map needs num_observations >= 1");
  if (num_actions < 2) throw ValidationError("feature map needs at least 2 actions");
  FeatureMap map;
  map.kind_ = Kind::Tabular;
  map.name_ = "tabular";
  map.horizon_ = horizon;
  map.num_observations_ = num_observations;
  map.num_actions_ = num_actions;
  map.dimension_ = horizon * (num_observations + 1) * num_actions;
  return map;
}

FeatureMap FeatureMap::concat(int context_dim, int num_observations, int num_actions) {
  if (context_dim < 0) throw ValidationError("concat feature map needs context_dim >= 0");
  if (num_observations < 1) throw ValidationError("concat feature map needs num_observations >= 1");
  if (num_actions < 2) throw ValidationError("feature map needs at least 2 actions");
  FeatureMap map;
  map.kind_ = Kind::Concat;
  map.name_ = "concat";
  map.context_dim_ = context_dim;
  map.num_observations_ = num_observations;
  map.num_actions_ = num_actions;
  map.dimension_ = context_dim + num_actions + num_observations + 1;
  return map;
}

FeatureMap FeatureMap::from_json(const std::string& name, int horizon, int context_dim,
                                 int num_observations, int num_actions) {
  if (name == "tabular") return tabular(horizon, num_observations, num_actions);
  if (name == "concat") return concat(context_dim, num_observations, num_actions);
  throw ValidationError("unknown feature map: " + name);
}

VectorX FeatureMap::features(const Context& context, const History& history, int action) const {
  if (action < 0 || action >= num_actions_) {
    throw ValidationError("action " + std::to_string(action) + " outside alphabet of size " +
                          std::to_string(num_actions_));
  }
  VectorX phi = VectorX::Zero(dimension_);
  const int bucket = history.empty() ? 0 : 1 + history.back().observation;
  if (kind_ == Kind::Tabular) {
    const int t = static_cast<int>(history.size());  // 0-based step index
    if (t >= horizon_) throw ValidationError("history length exceeds feature-map horizon");
    if (bucket > num_observations_) throw ValidationError("observation outside feature-map alphabet");
    phi[(t * (num_observations_ + 1) + bucket) * num_actions_ + action] = 1.0;
  } else {
    if (context.features.size() != context_dim_) {
      throw ValidationError("context feature length does not match feature map");
    }
    if (bucket > num_observations_) throw ValidationError("observation outside feature-map alphabet");
    phi.head(context_dim_) = context.features;
    phi[context_dim_ + action] = 1.0;
    phi[context_dim_ + num_actions_ + bucket] = 1.0;
  }
  return phi;
}

MatrixX FeatureMap::feature_matrix(const Context& context, const History& history) const {
  MatrixX phi(dimension_, num_actions_);
  for (int a = 0; a < num_actions_; ++a) phi.col(a) = features(context, history, a);
  return phi;
}

LogLinearPolicy::LogLinearPolicy(VectorX theta_in, FeatureMap map)
    : theta(std::move(theta_in)), feature_map(std::move(map)) {
  if (theta.size() != feature_map.dimension()) {
    throw ValidationError("theta length " + std::to_string(theta.size()) +
                          " does not match feature dimension " +
                          std::to_string(feature_map.dimension()));
  }
  if (!theta.allFinite()) throw ValidationError("non-finite theta");
}

LogLinearPolicy LogLinearPolicy::zeros(FeatureMap map) {
  VectorX theta = VectorX::Zero(map.dimension());
  return LogLinearPolicy(std::move(theta), std::move(map));
}

LogLinearPolicy LogLinearPolicy::gaussian(FeatureMap map, Scalar scale, Rng& rng) {
  VectorX theta(map.dimension());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = scale * rng.normal();
  return LogLinearPolicy(std::move(theta), std::move(map));
}

namespace {

VectorX logits_for(const LogLinearPolicy& policy, const Context& context,
                   const History& history) {
  const int num_actions = policy.feature_map.num_actions();
  VectorX logits(num_actions);
  for (int a = 0; a < num_actions; ++a) {
    logits[a] = policy.theta.dot(policy.feature_map.features(context, history, a));
  }
  if (!logits.allFinite()) throw ValidationError("non-finite logits");
  return logits;
}

}  // namespace

VectorX action_probs(const LogLinearPolicy& policy, const Context& context,
                     const History& history) {
  VectorX logits = logits_for(policy, context, history);
  const Scalar max_logit = logits.maxCoeff();
  VectorX probs = (logits.array() - max_logit).exp();
  probs /= probs.sum();
  return probs;
}

Scalar log_prob(const LogLinearPolicy& policy, const Context& context, const History& history,
                int action) {
  VectorX logits = logits_for(policy, context, history);
  if (action < 0 || action >= logits.size()) throw ValidationError("action outside alphabet");
  const Scalar max_logit = logits.maxCoeff();
  const Scalar lse = max_logit + std::log((logits.array() - max_logit).exp().sum());
  return logits[action] - lse;
}

VectorX grad_log_prob(const LogLinearPolicy& policy, const Context& context,
                      const History& history, int action) {
  const MatrixX phi = policy.feature_map.feature_matrix(context, history);
  VectorX logits = phi.transpose() * policy.theta;
  if (!logits.allFinite()) throw ValidationError("non-finite logits");
  if (action < 0 || action >= logits.size()) throw ValidationError("action outside alphabet");
  const Scalar max_logit = logits.maxCoeff();
  VectorX probs = (logits.array() - max_logit).exp();
  probs /= probs.sum();
  return phi.col(action) - phi * probs;
}

int sample_action(const LogLinearPolicy& policy, const Context& context, const History& history,
                  Rng& rng) {
  const VectorX probs = action_probs(policy, context, history);
  return rng.categorical(std::span<const Scalar>(probs.data(), static_cast<std::size_t>(probs.size())));
}

void save_policy(const std::string& path, const LogLinearPolicy& policy) {
  nlohmann::ordered_json params;
  const FeatureMap& map = policy.feature_map;
  if (map.name() == "tabular") {
    params = {{"horizon", map.horizon()},
              {"num_observations", map.num_observations()},
              {"num_actions", map.num_actions()}};
  } else {
    params = {{"context_dim", map.context_dim()},
              {"num_observations", map.num_observations()},
              {"num_actions", map.num_actions()}};
  }
  nlohmann::ordered_json doc{
      {"feature_map", {{"name", map.name()}, {"params", std::move(params)}}},
      {"d", map.dimension()},
      {"theta", std::vector<Scalar>(policy.theta.data(), policy.theta.data() + policy.theta.size())}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

LogLinearPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed policy checkpoint " + path + ": " + e.what());
  }
  try {
    const auto& fm = doc.at("feature_map");
    const std::string name = fm.at("name").get<std::string>();
    const auto& params = fm.at("params");
    FeatureMap map = FeatureMap::from_json(
        name, params.value("horizon", 1), params.value("context_dim", 0),
        params.at("num_observations").get<int>(), params.at("num_actions").get<int>());
    const auto theta_values = doc.at("theta").get<std::vector<Scalar>>();
    if (static_cast<int>(theta_values.size()) != doc.at("d").get<int>()) {
      throw ValidationError("theta length does not match declared dimension in " + path);
    }
    VectorX theta = Eigen::Map<const VectorX>(theta_values.data(),
                                              static_cast<Eigen::Index>(theta_values.size()));
    return LogLinearPolicy(std::move(theta), std::move(map));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid policy checkpoint " + path + ": " + e.what());
  }
}

}  // namespace ppg
