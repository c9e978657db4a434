#include "ppg/credit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ppg {

namespace {

int parse_positive_int(const std::string& text, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 1) {
    throw ValidationError(std::string("invalid ") + what + ": " + text);
  }
  return value;
}

std::vector<int> split_ints(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream stream(text);
  std::string piece;
  while (std::getline(stream, piece, ',')) {
    out.push_back(parse_positive_int(piece, what));
  }
  if (out.empty()) throw ValidationError(std::string("empty ") + what + " list");
  return out;
}

}  // namespace

PrefixScoreSeries::PrefixScoreSeries(VectorX values) : values_(std::move(values)) {
  if (values_.size() < 1) throw ValidationError("empty prefix score series");
  if (!values_.allFinite()) throw ValidationError("non-finite prefix score");
  if (values_[0] != 0.0) throw ValidationError("prefix score series must start at zero");
}

VectorX telescope(const PrefixScoreSeries& series) {
  const VectorX& v = series.values();
  const int n = series.horizon();
  VectorX rewards(n);
  for (int t = 1; t <= n; ++t) rewards[t - 1] = v[t] - v[t - 1];
  return rewards;
}

PrefixScoreSeries monotonize(const PrefixScoreSeries& series) {
  VectorX out = series.values();
  for (int t = 1; t < out.size(); ++t) out[t] = std::max(out[t - 1], out[t]);
  return PrefixScoreSeries(std::move(out));
}

CreditScheme CreditScheme::full() { return CreditScheme(Kind::Full, "full"); }

CreditScheme CreditScheme::greedy() { return CreditScheme(Kind::Greedy, "greedy"); }

CreditScheme CreditScheme::lookahead(int window) {
  if (window < 1) throw ValidationError("lookahead window must be at least 1");
  CreditScheme scheme(Kind::Lookahead, "lookahead:" + std::to_string(window));
  scheme.window_ = window;
  return scheme;
}

CreditScheme CreditScheme::segments(std::vector<int> block_lengths) {
  if (block_lengths.empty()) throw ValidationError("segments need at least one block");
  std::string label = "segments:";
  std::vector<int> boundaries;
  int end = 0;
  for (std::size_t k = 0; k < block_lengths.size(); ++k) {
    if (block_lengths[k] < 1) throw ValidationError("segment blocks must have positive length");
    end += block_lengths[k];
    boundaries.push_back(end);
    if (k > 0) label += ',';
    label += std::to_string(block_lengths[k]);
  }
  CreditScheme scheme(Kind::Segments, std::move(label));
  scheme.boundaries_ = std::move(boundaries);
  return scheme;
}

CreditScheme CreditScheme::custom(std::vector<std::vector<int>> sets) {
  const int n = static_cast<int>(sets.size());
  if (n < 1) throw ValidationError("custom scheme needs at least one step");
  for (int t = 1; t <= n; ++t) {
    auto& set = sets[t - 1];
    std::sort(set.begin(), set.end());
    if (std::adjacent_find(set.begin(), set.end()) != set.end()) {
      throw ValidationError("duplicate reward index in custom set for step " + std::to_string(t));
    }
    for (int index : set) {
      if (index < t || index > n) {
        throw ValidationError("reward index " + std::to_string(index) +
                              " outside {" + std::to_string(t) + ".." + std::to_string(n) +
                              "} for step " + std::to_string(t));
      }
    }
  }
  CreditScheme scheme(Kind::Custom, "custom");
  scheme.custom_ = std::move(sets);
  return scheme;
}

CreditScheme CreditScheme::parse(const std::string& text) {
  if (text == "full") return full();
  if (text == "greedy") return greedy();
  if (text.rfind("lookahead:", 0) == 0) {
    return lookahead(parse_positive_int(text.substr(10), "lookahead window"));
  }
  if (text.rfind("segments:", 0) == 0) {
    return segments(split_ints(text.substr(9), "segment length"));
  }
  if (text.rfind("custom:@", 0) == 0) {
    const std::string path = text.substr(8);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open credit scheme file: " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed credit scheme file " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("n") || !doc.contains("sets")) {
      throw ValidationError("credit scheme file needs fields n and sets: " + path);
    }
    const int n = doc["n"].get<int>();
    auto sets = doc["sets"].get<std::vector<std::vector<int>>>();
    if (static_cast<int>(sets.size()) != n) {
      throw ValidationError("credit scheme file declares n=" + std::to_string(n) + " but has " +
                            std::to_string(sets.size()) + " sets");
    }
    CreditScheme scheme = custom(std::move(sets));
    scheme.label_ = text;
    return scheme;
  }
  throw ValidationError("unknown credit scheme: " + text);
}

void CreditScheme::check_step(int t, int n) const {
  if (n < 1) throw ValidationError("horizon must be positive");
  if (t < 1 || t > n) {
    throw ValidationError("step " + std::to_string(t) + " outside horizon " + std::to_string(n));
  }
  if (kind_ == Kind::Segments && boundaries_.back() != n) {
    throw ValidationError("segment lengths sum to " + std::to_string(boundaries_.back()) +
                          ", horizon is " + std::to_string(n));
  }
  if (kind_ == Kind::Custom && static_cast<int>(custom_.size()) != n) {
    throw ValidationError("custom scheme covers " + std::to_string(custom_.size()) +
                          " steps, horizon is " + std::to_string(n));
  }
}

std::vector<int> CreditScheme::reward_indices(int t, int n) const {
  check_step(t, n);
  std::vector<int> out;
  switch (kind_) {
    case Kind::Full:
      for (int l = t; l <= n; ++l) out.push_back(l);
      break;
    case Kind::Greedy:
      out.push_back(t);
      break;
    case Kind::Lookahead:
      for (int l = t; l <= std::min(t + window_ - 1, n); ++l) out.push_back(l);
      break;
    case Kind::Segments: {
      const auto it = std::lower_bound(boundaries_.begin(), boundaries_.end(), t);
      for (int l = t; l <= *it; ++l) out.push_back(l);
      break;
    }
    case Kind::Custom:
      out = custom_[t - 1];
      break;
  }
  return out;
}

std::vector<int> CreditScheme::action_indices(int t, int n) const {
  check_step(t, n);
  std::vector<int> out;
  for (int l = 1; l <= t; ++l) {
    const auto credited = reward_indices(l, n);
    if (std::binary_search(credited.begin(), credited.end(), t)) out.push_back(l);
  }
  return out;
}

std::vector<std::vector<int>> CreditScheme::reward_sets(int n) const {
  std::vector<std::vector<int>> sets;
  sets.reserve(n);
  for (int t = 1; t <= n; ++t) sets.push_back(reward_indices(t, n));
  return sets;
}

std::vector<std::vector<int>> CreditScheme::action_sets(int n) const {
  std::vector<std::vector<int>> sets;
  sets.reserve(n);
  for (int t = 1; t <= n; ++t) sets.push_back(action_indices(t, n));
  return sets;
}

DualitySides check_duality(const CreditScheme& scheme, int n, const VectorX& weights,
                           const std::vector<VectorX>& score_vectors) {
  if (weights.size() != n) throw ValidationError("weight count does not match horizon");
  if (static_cast<int>(score_vectors.size()) != n) {
    throw ValidationError("score vector count does not match horizon");
  }
  const Eigen::Index dim = score_vectors[0].size();
  for (const auto& g : score_vectors) {
    if (g.size() != dim) throw ValidationError("inconsistent score vector dimension");
  }
  DualitySides sides{VectorX::Zero(dim), VectorX::Zero(dim)};
  for (int t = 1; t <= n; ++t) {
    Scalar credited = 0.0;
    for (int l : scheme.reward_indices(t, n)) credited += weights[l - 1];
    sides.reward_major += credited * score_vectors[t - 1];
    for (int l : scheme.action_indices(t, n)) sides.action_major += weights[t - 1] * score_vectors[l - 1];
  }
  return sides;
}

}  // namespace ppg
