#pragma once

// Forward noising, the exact score of a noised empirical distribution, the
// prior, and the Euler-Maruyama reverse sampler.
//
// The "score model" here is not learned: for a training set {M_m} with
// weights w_m, p_i(M) = sum_m w_m q_i(M | M_m) is known in closed form, so its
// score is a responsibility-weighted average of per-component scores.

#include "structsearch/schedule.hpp"
#include "structsearch/structure.hpp"
#include "structsearch/wrapped_normal.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

namespace structsearch {

/// Score blocks with the shape of a Structure: positions (fractional or
/// Cartesian) and, for crystals, the lattice.
struct Score {
  Coords positions;
  std::optional<Mat3> lattice;

  static Score zeros_like(const Structure& s) {
    Score z;
    z.positions.setZero(static_cast<Eigen::Index>(s.size()), 3);
    if (s.periodic()) z.lattice = Mat3::Zero();
    return z;
  }
};

struct TrainingSet {
  std::vector<Structure> structures;
  std::vector<double> weights;  // empty = uniform

  void validate() const {
    if (structures.empty()) throw ValidationError("training set is empty");
    const auto& first = structures.front();
    for (const auto& s : structures) {
      if (s.species() != first.species())
        throw ValidationError("training set: all structures need the same species order");
      if (s.periodic() != first.periodic())
        throw ValidationError("training set: mixed periodic and molecular structures");
    }
    if (!weights.empty()) {
      if (weights.size() != structures.size())
        throw ValidationError("training set: one weight per structure required");
      double sum = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0)) throw ValidationError("training set: negative weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("training set: weights must sum to 1");
    }
  }

  double weight(std::size_t m) const {
    return weights.empty() ? 1.0 / static_cast<double>(structures.size()) : weights[m];
  }
};

enum class ScoreMode { euclidean_mixture, torus_mixture };

class ScoreField {
 public:
  ScoreField(TrainingSet set, NoiseSchedule schedule)
      : set_(std::move(set)), schedule_(std::move(schedule)) {
    set_.validate();
  }

  const TrainingSet& training() const { return set_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  ScoreMode mode() const {
    return set_.structures.front().periodic() ? ScoreMode::torus_mixture
                                              : ScoreMode::euclidean_mixture;
  }

 private:
  TrainingSet set_;
  NoiseSchedule schedule_;
};

struct MixtureEval {
  Score score;
  std::vector<double> responsibilities;
  double log_density = 0.0;
};

/// Exact score of the noised training mixture at step i (0 <= i < N).
inline MixtureEval empirical_mixture(const Structure& s, int i, const ScoreField& field) {
  const NoiseSchedule& sch = field.schedule();
  if (i < 0 || i >= sch.steps()) throw ValidationError("empirical_score: step outside [0, N)");
  const auto& train = field.training().structures;
  if (s.species() != train.front().species())
    throw ValidationError("empirical_score: composition does not match training set");
  if (s.periodic() != train.front().periodic())
    throw ValidationError("empirical_score: periodicity does not match training set");

  const auto n = static_cast<Eigen::Index>(s.size());
  const std::size_t M = train.size();
  const double ab = sch.alpha_bar(i);
  const double sqrt_ab = std::sqrt(ab);
  const double scale = s.periodic() ? sch.lattice_scale(s.size()) : NoiseSchedule::molecular_scale();
  const double var = (1.0 - ab) * scale * scale;
  const double log_gauss_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  const double sigma = sch.sigma(i);

  std::vector<double> logp(M);
  std::vector<Score> comp(M);
  for (std::size_t m = 0; m < M; ++m) {
    const Structure& t = train[m];
    Score sc;
    double lp = std::log(field.training().weight(m));
    if (s.periodic()) {
      sc.positions.resize(n, 3);
      for (Eigen::Index j = 0; j < n; ++j)
        for (int c = 0; c < 3; ++c) {
          const auto w = wrapped_normal_eval(s.positions()(j, c), t.positions()(j, c), sigma);
          lp += w.log_density;
          sc.positions(j, c) = w.score;
        }
      const Mat3 diff = sqrt_ab * t.lattice() - s.lattice();
      sc.lattice = diff / var;
      lp += 9.0 * log_gauss_norm - 0.5 * diff.squaredNorm() / var;
    } else {
      const Coords diff = sqrt_ab * t.positions() - s.positions();
      sc.positions = diff / var;
      lp += 3.0 * static_cast<double>(n) * log_gauss_norm - 0.5 * diff.squaredNorm() / var;
    }
    logp[m] = lp;
    comp[m] = std::move(sc);
  }

  double top = logp[0];
  for (double v : logp) top = std::max(top, v);
  double z = 0.0;
  for (double v : logp) z += std::exp(v - top);

  MixtureEval out;
  out.log_density = top + std::log(z);
  out.responsibilities.resize(M);
  out.score = Score::zeros_like(s);
  for (std::size_t m = 0; m < M; ++m) {
    const double r = std::exp(logp[m] - top) / z;
    out.responsibilities[m] = r;
    out.score.positions += r * comp[m].positions;
    if (s.periodic()) *out.score.lattice += r * *comp[m].lattice;
  }
  return out;
}

inline Score empirical_score(const Structure& s, int i, const ScoreField& field) {
  return empirical_mixture(s, i, field).score;
}

/// Draw from q_i(. | s).
inline Structure forward_noise(const Structure& s, int i, const NoiseSchedule& sch, Rng& rng) {
  if (i < 0 || i > sch.steps()) throw ValidationError("forward_noise: step outside [0, N]");
  const auto n = static_cast<Eigen::Index>(s.size());
  const double sqrt_ab = std::sqrt(sch.alpha_bar(i));
  const double sd = std::sqrt(1.0 - sch.alpha_bar(i));
  if (s.periodic()) {
    const double sigma = sch.sigma(i);
    Coords x = s.positions();
    for (Eigen::Index j = 0; j < n; ++j)
      for (int c = 0; c < 3; ++c) x(j, c) += sigma * rng.normal();
    const double c = sch.lattice_scale(s.size());
    Mat3 L = sqrt_ab * s.lattice();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) L(a, b) += sd * c * rng.normal();
    return Structure::crystal_unchecked(s.species(), x, L);
  }
  Coords r = sqrt_ab * s.positions();
  for (Eigen::Index j = 0; j < n; ++j)
    for (int c = 0; c < 3; ++c) r(j, c) += sd * NoiseSchedule::molecular_scale() * rng.normal();
  return Structure::molecule(s.species(), r);
}

/// Stationary distribution of the forward process.
inline Structure sample_prior(const std::vector<std::string>& species, bool periodic,
                              const NoiseSchedule& sch, Rng& rng) {
  if (species.empty()) throw ValidationError("sample_prior: empty composition");
  const auto n = static_cast<Eigen::Index>(species.size());
  Coords pos(n, 3);
  if (periodic) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (int c = 0; c < 3; ++c) pos(j, c) = rng.uniform();
    const double c = sch.lattice_scale(species.size());
    Mat3 L;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) L(a, b) = c * rng.normal();
    return Structure::crystal_unchecked(species, pos, L);
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (int c = 0; c < 3; ++c) pos(j, c) = NoiseSchedule::molecular_scale() * rng.normal();
  return Structure::molecule(species, pos);
}

inline Structure sample_prior(const Composition& comp, bool periodic, const NoiseSchedule& sch,
                              Rng& rng) {
  return sample_prior(species_list(comp), periodic, sch, rng);
}

/// Score substitute used by the reverse sampler at step i.
using ScoreFn = std::function<Score(const Structure&, int)>;
/// Weight on the VP drift b_i at step i (1 for plain diffusion).
using DriftWeightFn = std::function<double(int)>;
using StepObserver = std::function<void(int, const Structure&)>;

struct ReverseOptions {
  bool inject_noise = true;
  bool keep_trajectory = true;
};

/// One reverse step i -> i+1 of
///   M' = M - [w b_i(M) - g_i^2 s] + g_i eps     (h = 1)
/// VE block: b = 0, g^2 = sigma_i^2 - sigma_{i+1}^2.
/// VP blocks in units of their scale c: b = -beta_i M / 2, g^2 = beta_i c^2.
inline Structure reverse_step(const Structure& s, int i, const NoiseSchedule& sch, const Score& score,
                              double drift_weight, Rng& rng, bool noise) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const double beta = sch.beta(i);
  const double sb = std::sqrt(beta);
  if (s.periodic()) {
    const double v = sch.ve_variance(i);
    const double sv = std::sqrt(v);
    Coords x = s.positions() + v * score.positions;
    if (noise)
      for (Eigen::Index j = 0; j < n; ++j)
        for (int c = 0; c < 3; ++c) x(j, c) += sv * rng.normal();
    const double c = sch.lattice_scale(s.size());
    Mat3 L = s.lattice() + (drift_weight * 0.5 * beta) * s.lattice() + (beta * c * c) * *score.lattice;
    if (noise)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) L(a, b) += sb * c * rng.normal();
    if (!x.allFinite() || !L.allFinite()) throw DivergedError("reverse step: non-finite state", i);
    return Structure::crystal_unchecked(s.species(), x, L);
  }
  const double c = NoiseSchedule::molecular_scale();
  Coords r = s.positions() + (drift_weight * 0.5 * beta) * s.positions() +
             (beta * c * c) * score.positions;
  if (noise)
    for (Eigen::Index j = 0; j < n; ++j)
      for (int k = 0; k < 3; ++k) r(j, k) += sb * c * rng.normal();
  if (!r.allFinite()) throw DivergedError("reverse step: non-finite state", i);
  return Structure::molecule(s.species(), r);
}

/// Runs all N reverse steps from init; the final step injects no noise.
inline Structure reverse_run(const Structure& init, const NoiseSchedule& sch, const ScoreFn& score,
                             const DriftWeightFn& drift_weight, Rng& rng, const ReverseOptions& opts,
                             const StepObserver& observer = {}) {
  Structure cur = init;
  if (observer) observer(0, cur);
  const int N = sch.steps();
  for (int i = 0; i < N; ++i) {
    const bool noise = opts.inject_noise && i + 1 < N;
    const double w = drift_weight ? drift_weight(i) : 1.0;
    cur = reverse_step(cur, i, sch, score(cur, i), w, rng, noise);
    if (observer) observer(i + 1, cur);
  }
  return cur;
}

/// Plain reverse diffusion; returns the N + 1 states (or only the last one
/// when keep_trajectory is off).
inline std::vector<Structure> reverse_sample(const Structure& init, const ScoreField& field, Rng& rng,
                                             const ReverseOptions& opts = {}) {
  std::vector<Structure> traj;
  ScoreFn fn = [&](const Structure& s, int i) { return empirical_score(s, i, field); };
  StepObserver obs;
  if (opts.keep_trajectory) obs = [&](int, const Structure& s) { traj.push_back(s); };
  Structure last = reverse_run(init, field.schedule(), fn, {}, rng, opts, obs);
  if (!opts.keep_trajectory) traj.push_back(std::move(last));
  return traj;
}

}  // namespace structsearch
