#include "ppg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ppg/core.hpp"
#include "ppg/estimator.hpp"
#include "ppg/parallel.hpp"

namespace ppg {

Scalar hoeffding_tail(const std::vector<Scalar>& c, Scalar epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (c.empty()) throw ValidationError("empty bound list");
  Scalar sum_sq = 0.0;
  for (Scalar ci : c) {
    if (!(ci > 0.0) || !std::isfinite(ci)) throw ValidationError("bound entries must be positive");
    sum_sq += ci * ci;
  }
  return 2.0 * std::exp(-(epsilon * epsilon) / (2.0 * sum_sq));
}

Scalar gradient_concentration_bound(const BoundSpec& spec, Scalar epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (spec.batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (spec.dimension < 1) throw ValidationError("dimension must be >= 1");
  if (spec.c.rows() != spec.c.cols() || spec.c.rows() < 1) {
    throw ValidationError("bound matrix must be square");
  }
  if (!spec.c.allFinite() || (spec.c.array() < 0.0).any()) {
    throw ValidationError("bound matrix entries must be finite and nonnegative");
  }
  const int n = static_cast<int>(spec.c.rows());
  Scalar total = 0.0;
  for (int t = 1; t <= n; ++t) {
    for (int l : spec.scheme.action_indices(t, n)) total += spec.c(t - 1, l - 1);
  }
  const Scalar d = static_cast<Scalar>(spec.dimension);
  const Scalar b = static_cast<Scalar>(spec.batch_size);
  return 2.0 * d * std::exp(-(epsilon * epsilon) * b / (2.0 * d * total * total));
}

std::vector<StudyRow> concentration_study(const EnvSpec& env, const LogLinearPolicy& policy,
                                          const std::vector<CreditScheme>& schemes,
                                          const std::vector<int>& batch_sizes, int replications,
                                          const std::vector<Scalar>& epsilon_grid,
                                          std::uint64_t seed, int num_threads) {
  if (replications < 30) throw ValidationError("insufficient replications");
  if (schemes.empty()) throw ValidationError("study needs at least one scheme");
  if (batch_sizes.empty()) throw ValidationError("study needs at least one batch size");
  if (epsilon_grid.empty()) throw ValidationError("study needs a nonempty epsilon grid");
  for (int b : batch_sizes) {
    if (b < 1) throw ValidationError("batch size must be >= 1");
  }
  for (Scalar eps : epsilon_grid) {
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
  }

  const int n = env.horizon;
  const int d = policy.dimension();
  const MatrixX c =
      MatrixX::Constant(n, n, env.max_abs_step_reward * policy.feature_map.score_bound());

  // Center on the exact gradient when the support enumerates; otherwise each
  // scheme centers on its own grand mean.
  std::vector<VectorX> exact_centers;
  bool enumerable = true;
  try {
    for (const CreditScheme& scheme : schemes) {
      exact_centers.push_back(exact_gradient(env, policy, scheme));
    }
  } catch (const ValidationError&) {
    enumerable = false;
    exact_centers.clear();
  }

  struct Cell {
    std::vector<Scalar> deviations;
    Scalar mean_dev = 0.0;
  };
  std::vector<std::vector<Cell>> cells(schemes.size(),
                                       std::vector<Cell>(batch_sizes.size()));

  for (std::size_t bi = 0; bi < batch_sizes.size(); ++bi) {
    const int batch_size = batch_sizes[bi];
    std::vector<MatrixX> estimates(schemes.size(), MatrixX(replications, d));
    parallel_for(replications, num_threads, [&](int rep) {
      std::vector<Trajectory> rolled(static_cast<std::size_t>(batch_size));
      for (int i = 0; i < batch_size; ++i) {
        Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(batch_size),
                                     static_cast<std::uint64_t>(rep),
                                     static_cast<std::uint64_t>(i)});
        rolled[static_cast<std::size_t>(i)] = rollout(env, policy, rng);
      }
      const Batch batch = Batch::from_trajectories(std::move(rolled));
      for (std::size_t s = 0; s < schemes.size(); ++s) {
        estimates[s].row(rep) = empirical_ppg(batch, policy, schemes[s]).values.transpose();
      }
    });
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      VectorX center;
      if (enumerable) {
        center = exact_centers[s];
      } else {
        center = VectorX::Zero(d);
        for (int rep = 0; rep < replications; ++rep) center += estimates[s].row(rep).transpose();
        center /= static_cast<Scalar>(replications);
      }
      Cell& cell = cells[s][bi];
      cell.deviations.resize(static_cast<std::size_t>(replications));
      Scalar sum = 0.0;
      for (int rep = 0; rep < replications; ++rep) {
        const Scalar dev = (estimates[s].row(rep).transpose() - center).norm();
        cell.deviations[static_cast<std::size_t>(rep)] = dev;
        sum += dev;
      }
      cell.mean_dev = sum / static_cast<Scalar>(replications);
    }
  }

  std::vector<StudyRow> rows;
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (std::size_t bi = 0; bi < batch_sizes.size(); ++bi) {
      const Cell& cell = cells[s][bi];
      for (Scalar eps : epsilon_grid) {
        int exceed = 0;
        for (Scalar dev : cell.deviations) {
          if (dev >= eps) ++exceed;
        }
        const Scalar bound = gradient_concentration_bound(
            BoundSpec{c, batch_sizes[bi], d, schemes[s]}, eps);
        rows.push_back(StudyRow{schemes[s].label(), batch_sizes[bi], eps,
                                static_cast<Scalar>(exceed) / static_cast<Scalar>(replications),
                                std::min(1.0, bound), cell.mean_dev, replications, seed});
      }
    }
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char ch : text) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

void write_study_csv(const std::string& path, const std::vector<StudyRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "scheme,B,epsilon,empirical_freq,hoeffding_bound,mean_dev_2norm,replications,seed\n";
  for (const StudyRow& row : rows) {
    out << csv_field(row.scheme) << ',' << row.batch_size << ',' << format_real(row.epsilon)
        << ',' << format_real(row.empirical_freq) << ',' << format_real(row.hoeffding_bound)
        << ',' << format_real(row.mean_dev_2norm) << ',' << row.replications << ',' << row.seed
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

VectorX finite_diff_gradient(const std::function<Scalar(const VectorX&)>& value_fn,
                             const VectorX& theta, Scalar h) {
  if (!(h > 0.0)) throw ValidationError("step size must be positive");
  VectorX gradient(theta.size());
  VectorX probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + h;
    const Scalar up = value_fn(probe);
    probe[j] = theta[j] - h;
    const Scalar down = value_fn(probe);
    probe[j] = theta[j];
    gradient[j] = (up - down) / (2.0 * h);
  }
  return gradient;
}

}  // namespace ppg
