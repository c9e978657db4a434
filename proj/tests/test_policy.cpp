#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "ppg/policy.hpp"
#include "ppg/rng.hpp"

namespace {

ppg::Context default_context() {
  ppg::Context ctx;
  ctx.id = 0;
  return ctx;
}

// Random tabular state: depth, matching history, bounded theta.
struct RandomState {
  ppg::LogLinearPolicy policy;
  ppg::Context context;
  ppg::History history;
};

RandomState random_state(ppg::Rng& rng) {
  const int horizon = 1 + static_cast<int>(rng.uniform_below(4));
  const int num_obs = 1 + static_cast<int>(rng.uniform_below(2));
  const int num_actions = 2 + static_cast<int>(rng.uniform_below(3));
  ppg::FeatureMap map = ppg::FeatureMap::tabular(horizon, num_obs, num_actions);
  ppg::VectorX theta(map.dimension());
  for (int k = 0; k < theta.size(); ++k) theta[k] = 4.0 * rng.uniform() - 2.0;
  ppg::LogLinearPolicy policy(theta, std::move(map));
  ppg::History history;
  const int depth = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(horizon)));
  for (int t = 0; t < depth; ++t) {
    history.push_back({static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_actions))),
                       static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_obs)))});
  }
  return {std::move(policy), default_context(), std::move(history)};
}

}  // namespace

TEST_CASE("zero parameters give the uniform policy") {
  const ppg::LogLinearPolicy policy = ppg::LogLinearPolicy::zeros(ppg::FeatureMap::tabular(2, 1, 3));
  const ppg::VectorX probs = ppg::action_probs(policy, default_context(), {});
  REQUIRE(probs.size() == 3);
  for (int a = 0; a < 3; ++a) CHECK(probs[a] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("closed-form softmax for logits (ln 3, 0)") {
  ppg::FeatureMap map = ppg::FeatureMap::tabular(1, 1, 2);
  ppg::VectorX theta = ppg::VectorX::Zero(map.dimension());
  theta[0] = std::log(3.0);  // empty-history bucket, action 0
  const ppg::LogLinearPolicy policy(theta, std::move(map));
  const ppg::VectorX probs = ppg::action_probs(policy, default_context(), {});
  CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax is shift invariant") {
  ppg::FeatureMap map = ppg::FeatureMap::tabular(1, 1, 2);
  ppg::VectorX theta(map.dimension());
  theta << 0.7, -0.3, 0.0, 0.0;
  const ppg::LogLinearPolicy base(theta, map);
  ppg::VectorX shifted = theta;
  shifted[0] += 5.0;
  shifted[1] += 5.0;  // both actions of the same bucket
  const ppg::LogLinearPolicy moved(shifted, map);
  const ppg::VectorX pa = ppg::action_probs(base, default_context(), {});
  const ppg::VectorX pb = ppg::action_probs(moved, default_context(), {});
  CHECK((pa - pb).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("log probabilities are stable and consistent") {
  const ppg::LogLinearPolicy uniform =
      ppg::LogLinearPolicy::zeros(ppg::FeatureMap::tabular(1, 1, 4));
  CHECK(ppg::log_prob(uniform, default_context(), {}, 2) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-12));

  ppg::Rng rng = ppg::Rng::stream(21, {0});
  for (int rep = 0; rep < 200; ++rep) {
    const RandomState state = random_state(rng);
    const ppg::VectorX probs = ppg::action_probs(state.policy, state.context, state.history);
    for (int a = 0; a < probs.size(); ++a) {
      CHECK(std::exp(ppg::log_prob(state.policy, state.context, state.history, a)) ==
            doctest::Approx(probs[a]).epsilon(1e-12));
    }
  }

  ppg::FeatureMap map = ppg::FeatureMap::tabular(1, 1, 2);
  ppg::VectorX theta = ppg::VectorX::Zero(map.dimension());
  theta[0] = 1000.0;
  const ppg::LogLinearPolicy extreme(theta, std::move(map));
  const double lp = ppg::log_prob(extreme, default_context(), {}, 0);
  CHECK(std::isfinite(lp));
  CHECK(lp <= 0.0);
  CHECK(lp >= -1e-6);
}

TEST_CASE("score vector worked example at zero parameters") {
  const ppg::LogLinearPolicy policy = ppg::LogLinearPolicy::zeros(ppg::FeatureMap::tabular(1, 1, 2));
  const ppg::VectorX g = ppg::grad_log_prob(policy, default_context(), {}, 0);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
}

TEST_CASE("score identity holds at random states") {
  ppg::Rng rng = ppg::Rng::stream(22, {0});
  double max_err = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const RandomState state = random_state(rng);
    const ppg::VectorX probs = ppg::action_probs(state.policy, state.context, state.history);
    ppg::VectorX sum = ppg::VectorX::Zero(state.policy.theta.size());
    for (int a = 0; a < probs.size(); ++a) {
      sum += probs[a] * ppg::grad_log_prob(state.policy, state.context, state.history, a);
    }
    max_err = std::max(max_err, sum.cwiseAbs().maxCoeff());
  }
  CHECK(max_err <= 1e-12);
}

TEST_CASE("score vector matches finite differences of log probability") {
  ppg::Rng rng = ppg::Rng::stream(23, {0});
  const double h = 1e-6;
  double max_err = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const RandomState state = random_state(rng);
    const int num_actions =
        static_cast<int>(ppg::action_probs(state.policy, state.context, state.history).size());
    const int a = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_actions)));
    const ppg::VectorX grad = ppg::grad_log_prob(state.policy, state.context, state.history, a);
    for (int j = 0; j < state.policy.theta.size(); ++j) {
      ppg::VectorX plus = state.policy.theta;
      ppg::VectorX minus = state.policy.theta;
      plus[j] += h;
      minus[j] -= h;
      const double lp_plus = ppg::log_prob(ppg::LogLinearPolicy(plus, state.policy.feature_map),
                                           state.context, state.history, a);
      const double lp_minus = ppg::log_prob(ppg::LogLinearPolicy(minus, state.policy.feature_map),
                                            state.context, state.history, a);
      max_err = std::max(max_err, std::abs((lp_plus - lp_minus) / (2.0 * h) - grad[j]));
    }
  }
  CHECK(max_err <= 1e-6);
}

TEST_CASE("sampling follows the distribution") {
  ppg::FeatureMap map = ppg::FeatureMap::tabular(1, 1, 2);
  ppg::VectorX theta = ppg::VectorX::Zero(map.dimension());
  theta[1] = 60.0;
  const ppg::LogLinearPolicy spiked(theta, std::move(map));
  ppg::Rng rng = ppg::Rng::stream(24, {0});
  for (int k = 0; k < 50; ++k) {
    CHECK(ppg::sample_action(spiked, default_context(), {}, rng) == 1);
  }

  // Frequencies across 100k draws stay within 4 binomial standard errors.
  const ppg::LogLinearPolicy uniform =
      ppg::LogLinearPolicy::zeros(ppg::FeatureMap::tabular(1, 1, 4));
  const int draws = 100000;
  std::vector<int> counts(4, 0);
  ppg::Rng rng2 = ppg::Rng::stream(24, {1});
  for (int k = 0; k < draws; ++k) {
    ++counts[static_cast<std::size_t>(ppg::sample_action(uniform, default_context(), {}, rng2))];
  }
  const double p = 0.25;
  const double se = std::sqrt(p * (1.0 - p) / draws);
  for (int a = 0; a < 4; ++a) {
    CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(a)]) / draws - p) <=
          4.0 * se);
  }

  ppg::Rng r1 = ppg::Rng::stream(24, {2});
  ppg::Rng r2 = ppg::Rng::stream(24, {2});
  for (int k = 0; k < 100; ++k) {
    CHECK(ppg::sample_action(uniform, default_context(), {}, r1) ==
          ppg::sample_action(uniform, default_context(), {}, r2));
  }
}

TEST_CASE("tabular feature map dimensions and validation") {
  const ppg::FeatureMap map = ppg::FeatureMap::tabular(3, 2, 4);
  CHECK(map.dimension() == 3 * 3 * 4);
  CHECK(map.score_bound() == 1.0);
  const ppg::LogLinearPolicy policy = ppg::LogLinearPolicy::zeros(map);

  ppg::History deep = {{0, 0}, {1, 1}, {2, 0}};
  CHECK_THROWS_WITH_AS(ppg::action_probs(policy, default_context(), deep),
                       doctest::Contains("exceeds feature-map horizon"), ppg::ValidationError);
  ppg::History bad_obs = {{0, 5}};
  CHECK_THROWS_WITH_AS(ppg::action_probs(policy, default_context(), bad_obs),
                       doctest::Contains("observation"), ppg::ValidationError);
}

TEST_CASE("concat feature map carries context yet keeps scores context-free") {
  const ppg::FeatureMap map = ppg::FeatureMap::concat(2, 2, 3);
  CHECK(map.dimension() == 2 + 3 + 3);
  ppg::Context ctx;
  ctx.id = 1;
  ctx.features.resize(2);
  ctx.features << 0.5, -0.5;

  ppg::Rng rng = ppg::Rng::stream(25, {0});
  const ppg::LogLinearPolicy policy = [&] {
    ppg::FeatureMap m = map;
    ppg::Rng init = ppg::Rng::stream(25, {1});
    return ppg::LogLinearPolicy::gaussian(std::move(m), 0.5, init);
  }();

  const ppg::VectorX probs = ppg::action_probs(policy, ctx, {{1, 1}});
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  // The context block is shared by all actions; the score zeroes it out.
  const ppg::VectorX g = ppg::grad_log_prob(policy, ctx, {{1, 1}}, 0);
  CHECK(std::abs(g[0]) <= 1e-15);
  CHECK(std::abs(g[1]) <= 1e-15);

  ppg::Context wrong;
  wrong.features.resize(3);
  wrong.features << 1.0, 2.0, 3.0;
  CHECK_THROWS_WITH_AS(ppg::action_probs(policy, wrong, {}),
                       doctest::Contains("context feature length"), ppg::ValidationError);
  (void)rng;
}

TEST_CASE("policy checkpoints round trip") {
  const std::string path = "test_policy_ckpt.json";
  ppg::Rng rng = ppg::Rng::stream(26, {0});
  const ppg::LogLinearPolicy policy =
      ppg::LogLinearPolicy::gaussian(ppg::FeatureMap::tabular(2, 2, 3), 0.7, rng);
  ppg::save_policy(path, policy);
  const ppg::LogLinearPolicy back = ppg::load_policy(path);
  REQUIRE(back.theta.size() == policy.theta.size());
  for (int k = 0; k < policy.theta.size(); ++k) CHECK(back.theta[k] == policy.theta[k]);
  const ppg::VectorX pa = ppg::action_probs(policy, default_context(), {{0, 1}});
  const ppg::VectorX pb = ppg::action_probs(back, default_context(), {{0, 1}});
  CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);

  {
    std::ofstream out(path);
    out << "{broken";
  }
  CHECK_THROWS_WITH_AS(ppg::load_policy(path), doctest::Contains("malformed policy checkpoint"),
                       ppg::ValidationError);
  {
    std::ofstream out(path);
    out << R"({"feature_map": {"name": "tabular", "params": {"horizon": 1, "num_observations": 1,
               "num_actions": 2}}, "d": 4, "theta": [0, 0]})";
  }
  CHECK_THROWS_WITH_AS(ppg::load_policy(path), doctest::Contains("theta length"),
                       ppg::ValidationError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(ppg::load_policy("test_policy_missing.json"), ppg::IoError);
}

TEST_CASE("policy construction validates parameters") {
  ppg::FeatureMap map = ppg::FeatureMap::tabular(1, 1, 2);
  ppg::VectorX short_theta = ppg::VectorX::Zero(2);
  CHECK_THROWS_AS(ppg::LogLinearPolicy(short_theta, map), ppg::ValidationError);
  ppg::VectorX bad = ppg::VectorX::Zero(map.dimension());
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ppg::LogLinearPolicy(bad, map), ppg::ValidationError);
}
