#pragma once

// Hybrid sampler: the reverse diffusion step with the score replaced by
//   s_guided = alpha_i s - beta_i lambda grad E,   beta_i = 1 - alpha_i,
// followed by an optional relaxation to the nearest minimum.
//
// alpha follows a sigmoid in diffusion time t = N - i (t = N is pure noise),
// so the score dominates early and the energy takes over near the data end.
// The VP drift is weighted by alpha as well: with alpha = 0 the update is
// exactly a Langevin step M' = M - g^2 lambda grad E + g eps, and with
// lambda = 1 / (2 k_B T) its stationary law is exp(-E / k_B T).

#include "structsearch/diffusion.hpp"
#include "structsearch/potential.hpp"
#include "structsearch/relax.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace structsearch {

inline constexpr double kReferenceTemperature = 400.0;  // K

/// Guidance strength that makes the alpha = 0 step a Langevin step at T.
inline double langevin_lambda(double temperature = kReferenceTemperature) {
  return 1.0 / (2.0 * kBoltzmann * temperature);
}

struct GuidanceConfig {
  double t_mid = 600.0;   // diffusion-time steps
  double t_scale = 50.0;  // steps
  double lambda_frac = langevin_lambda();
  double lambda_lattice = langevin_lambda();
  double lambda_molecular = langevin_lambda();
  bool final_relax = true;
  std::optional<double> alpha_override;
  bool inject_noise = true;
  double force_clip = 50.0;  // eV/A
  /// Trust region on the energy drift: before mixing, each row of the
  /// Langevin displacement h lambda grad E is limited to drift_cap * sqrt(3) g c,
  /// the typical size of the noise injected in the same step. Inactive while
  /// h k < ~2, i.e. wherever plain Euler-Maruyama is stable. Unset = off.
  std::optional<double> drift_cap = 1.0;

  void validate() const {
    if (!(t_scale > 0.0)) throw ConfigError("guidance: t_scale must be > 0");
    if (!(lambda_frac >= 0.0) || !(lambda_lattice >= 0.0) || !(lambda_molecular >= 0.0))
      throw ConfigError("guidance: lambda must be >= 0");
    if (alpha_override && !(*alpha_override >= 0.0 && *alpha_override <= 1.0))
      throw ConfigError("guidance: alpha_override must lie in [0, 1]");
    if (!(force_clip > 0.0)) throw ConfigError("guidance: force_clip must be > 0");
    if (drift_cap && !(*drift_cap > 0.0)) throw ConfigError("guidance: drift_cap must be > 0");
  }

  /// Defaults scaled to an N-step schedule: t_mid = 0.6 N, t_scale = 0.05 N.
  static GuidanceConfig for_steps(int steps) {
    GuidanceConfig g;
    g.t_mid = 0.6 * steps;
    g.t_scale = 0.05 * steps;
    return g;
  }
};

/// Sigmoid weight at diffusion time t.
inline double alpha(double t, const GuidanceConfig& cfg) {
  if (cfg.alpha_override) return *cfg.alpha_override;
  return 1.0 / (1.0 + std::exp((cfg.t_mid - t) / cfg.t_scale));
}

/// Weight used at reverse step i of an N-step run.
inline double step_alpha(int i, int steps, const GuidanceConfig& cfg) {
  return alpha(static_cast<double>(steps - i), cfg);
}

/// Energy gradient blocks for guidance.
struct EnergyGradient {
  double energy = 0.0;
  Coords positions;            // grad_X E (crystal) or grad_R E (molecule)
  std::optional<Mat3> lattice; // grad_L E
  bool clipped = false;        // some force or lattice row was clipped
  bool clamped = false;        // overlap retry with clamped distances
  bool degenerate = false;     // cell could not be evaluated; gradient zeroed
  bool capped = false;         // drift trust region was active
};

namespace detail {
inline bool clip_rows(Eigen::Ref<Coords> m, double cap) {
  bool hit = false;
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    const double nrm = m.row(j).norm();
    if (nrm > cap) {
      m.row(j) *= cap / nrm;
      hit = true;
    }
  }
  return hit;
}
}  // namespace detail

/// Gradients with forces clipped to force_clip per atom and lattice-gradient
/// rows clipped to force_clip * n. Overlaps are retried with clamped pair
/// distances; a cell too degenerate to evaluate yields a zero gradient.
inline EnergyGradient guidance_gradient(const Structure& s, const Potential& pot, double force_clip) {
  EnergyGradient g;
  const auto n = static_cast<Eigen::Index>(s.size());
  PotentialReport rep;
  try {
    rep = pot.evaluate(s);
  } catch (const OverlapError&) {
    try {
      rep = pot.evaluate(s, EvalOptions{true});
      g.clamped = true;
    } catch (const OverlapError&) {
      g.degenerate = true;
      g.positions.setZero(n, 3);
      if (s.periodic()) g.lattice = Mat3::Zero();
      return g;
    }
  }
  g.energy = rep.energy;
  Coords f = rep.forces;
  g.clipped = detail::clip_rows(f, force_clip);
  if (!s.periodic()) {
    g.positions = -f;
    return g;
  }
  g.positions = -f * s.lattice().transpose();
  Mat3 gl = lattice_gradient_from_virial(s, *rep.virial);
  for (int a = 0; a < 3; ++a) {
    const double cap = force_clip * static_cast<double>(n);
    const double nrm = gl.row(a).norm();
    if (nrm > cap) {
      gl.row(a) *= cap / nrm;
      g.clipped = true;
    }
  }
  g.lattice = gl;
  return g;
}

struct GuidedEval {
  Score score;
  double alpha = 1.0;
  std::optional<EnergyGradient> gradient;
};

/// s_guided at reverse step i. field may be null when alpha is pinned to 0.
inline GuidedEval guided_score(const Structure& s, int i, const ScoreField* field,
                               const Potential& pot, const NoiseSchedule& sch,
                               const GuidanceConfig& cfg) {
  GuidedEval out;
  const double a = step_alpha(i, sch.steps(), cfg);
  const double b = 1.0 - a;
  out.alpha = a;
  if (a != 0.0) {
    if (!field) throw ValidationError("guided_score: score field required when alpha > 0");
    out.score = empirical_score(s, i, *field);
    if (a != 1.0) {
      out.score.positions *= a;
      if (out.score.lattice) *out.score.lattice *= a;
    }
  } else {
    out.score = Score::zeros_like(s);
  }
  if (b == 0.0) return out;

  EnergyGradient g = guidance_gradient(s, pot, cfg.force_clip);
  const double lp = s.periodic() ? cfg.lambda_frac : cfg.lambda_molecular;
  Coords pos = lp * g.positions;
  std::optional<Mat3> lat;
  if (s.periodic()) lat = cfg.lambda_lattice * *g.lattice;
  if (cfg.drift_cap) {
    // |h lambda grad E| <= cap sqrt(3) g c with h = g^2 c^2, i.e.
    // |lambda grad E| <= cap sqrt(3) / (g c).
    const double k = *cfg.drift_cap * std::sqrt(3.0);
    const double beta = sch.beta(i);
    if (s.periodic()) {
      g.capped |= detail::clip_rows(pos, k / std::sqrt(sch.ve_variance(i)));
      Coords rows = *lat;
      g.capped |= detail::clip_rows(rows, k / (std::sqrt(beta) * sch.lattice_scale(s.size())));
      lat = Mat3(rows);
    } else {
      g.capped |= detail::clip_rows(pos, k / (std::sqrt(beta) * NoiseSchedule::molecular_scale()));
    }
  }
  out.score.positions -= b * pos;
  if (s.periodic()) *out.score.lattice -= b * *lat;
  out.gradient = std::move(g);
  return out;
}

struct SearchRecord {
  Structure structure;
  std::optional<double> energy_per_atom;
  bool converged = false;
  bool failed = false;
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  int relax_steps = 0;
  double max_force = 0.0;
  std::string note;
};

struct GuidedRunStats {
  int clipped_steps = 0;
  int clamped_steps = 0;
  int degenerate_steps = 0;
  int capped_steps = 0;
};

/// Reverse run with the guided score; returns the final (unrelaxed) state.
inline Structure gss_trajectory(const Structure& init, const ScoreField* field, const Potential& pot,
                                const NoiseSchedule& sch, const GuidanceConfig& cfg, Rng& rng,
                                GuidedRunStats* stats = nullptr, const StepObserver& observer = {}) {
  cfg.validate();
  ScoreFn fn = [&](const Structure& s, int i) {
    GuidedEval ge = guided_score(s, i, field, pot, sch, cfg);
    if (stats && ge.gradient) {
      stats->clipped_steps += ge.gradient->clipped;
      stats->clamped_steps += ge.gradient->clamped;
      stats->degenerate_steps += ge.gradient->degenerate;
      stats->capped_steps += ge.gradient->capped;
    }
    return std::move(ge.score);
  };
  DriftWeightFn w = [&](int i) { return step_alpha(i, sch.steps(), cfg); };
  ReverseOptions opts;
  opts.inject_noise = cfg.inject_noise;
  opts.keep_trajectory = false;
  return reverse_run(init, sch, fn, w, rng, opts, observer);
}

/// Relaxes a sampled structure and fills a record. Unconverged or diverged
/// relaxations are flagged as failed.
inline SearchRecord finish_record(Structure sampled, const Potential& pot, const RelaxConfig* relax,
                                  std::string method, std::uint64_t seed, std::uint64_t trial) {
  SearchRecord rec;
  rec.method = std::move(method);
  rec.seed = seed;
  rec.trial = trial;
  try {
    if (relax) {
      if (sampled.periodic() && !(sampled.lattice().determinant() > 0.0)) {
        // A left-handed sampled cell: flip one lattice vector (and the matching
        // fractional column) so the cell is right-handed; geometry unchanged.
        Mat3 L = sampled.lattice();
        Coords x = sampled.positions();
        L.row(2) *= -1.0;
        x.col(2) *= -1.0;
        sampled = Structure::crystal_unchecked(sampled.species(), x, L);
      }
      const RelaxResult r = fire_relax(sampled, pot, *relax);
      rec.structure = r.structure;
      rec.energy_per_atom = r.energy_per_atom;
      rec.converged = r.converged;
      rec.relax_steps = r.steps_used;
      rec.max_force = r.max_force_final;
      if (!r.converged) {
        rec.failed = true;
        rec.note = "relaxation did not converge";
      }
    } else {
      const PotentialReport rep = pot.evaluate(sampled);
      rec.structure = sampled;
      rec.energy_per_atom = rep.energy / static_cast<double>(sampled.size());
      rec.max_force = max_force(rep.forces);
    }
  } catch (const Error& e) {
    rec.structure = sampled;
    rec.energy_per_atom.reset();
    rec.failed = true;
    rec.note = e.what();
  }
  return rec;
}

/// Prior draw, N guided steps, optional final relaxation.
inline SearchRecord gss_sample(const std::vector<std::string>& species, bool periodic,
                               const ScoreField* field, const Potential& pot,
                               const NoiseSchedule& sch, const GuidanceConfig& cfg,
                               const RelaxConfig& relax, Rng& rng, std::uint64_t seed = 0,
                               std::uint64_t trial = 0) {
  const Structure init = sample_prior(species, periodic, sch, rng);
  Structure last;
  try {
    last = gss_trajectory(init, field, pot, sch, cfg, rng);
  } catch (const DivergedError& e) {
    SearchRecord rec;
    rec.structure = init;
    rec.failed = true;
    rec.method = "gss";
    rec.seed = seed;
    rec.trial = trial;
    rec.note = std::string(e.what()) + " at step " + std::to_string(e.step());
    return rec;
  }
  return finish_record(std::move(last), pot, cfg.final_relax ? &relax : nullptr, "gss", seed, trial);
}

}  // namespace structsearch
