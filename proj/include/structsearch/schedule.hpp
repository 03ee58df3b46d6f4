#pragma once

// Discrete noise schedules. Step index runs from 0 (pure noise) to N (data).
//
// Fractional coordinates use a variance-exploding wrapped Gaussian with
// width sigma_i (sigma_N = 0). Lattice and molecular coordinates use a
// variance-preserving Gaussian with per-step rate beta_i and
// alpha_bar_i = prod_{k=i}^{N-1} (1 - beta_k), alpha_bar_N = 1.

#include "structsearch/core.hpp"

#include <cmath>
#include <vector>

namespace structsearch {

/// Per-step quantities of one reverse step i -> i+1.
struct ScheduleState {
  int step = 0;
  double sigma = 0.0;       // VE width at i
  double ve_variance = 0.0; // sigma_i^2 - sigma_{i+1}^2, i.e. g^2 for the VE block
  double beta = 0.0;        // VP rate, g^2 for the VP blocks
  double alpha_bar = 1.0;   // at i
};

class NoiseSchedule {
 public:
  /// Geometric sigma from sigma_max (i = 0) to sigma_min (i = N-1); linear
  /// beta from beta_max (i = 0) to beta_min (i = N-1).
  static NoiseSchedule standard(int steps = 1000, double sigma_min = 0.01, double sigma_max = 1.0,
                                double beta_min = 1e-4, double beta_max = 2e-2,
                                double lattice_c = 2.0) {
    if (steps < 2) throw ConfigError("schedule: need at least 2 steps");
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
      throw ConfigError("schedule: need 0 < sigma_min < sigma_max");
    if (!(beta_min > 0.0) || beta_min > beta_max || !(beta_max < 1.0))
      throw ConfigError("schedule: need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.sigma_.resize(steps + 1);
    s.beta_.resize(steps);
    const double last = steps - 1;
    for (int i = 0; i < steps; ++i) {
      s.sigma_[i] = sigma_max * std::pow(sigma_min / sigma_max, i / last);
      s.beta_[i] = beta_min + (beta_max - beta_min) * (last - i) / last;
    }
    s.sigma_[steps] = 0.0;
    s.lattice_c_ = lattice_c;
    s.finish();
    return s;
  }

  /// Stationary-rate schedule: every step removes the same VE variance and
  /// uses the same beta. Used for fixed-temperature Langevin runs.
  static NoiseSchedule constant(int steps, double beta, double ve_variance = 1e-4,
                                double lattice_c = 2.0) {
    if (steps < 1) throw ConfigError("schedule: need at least 1 step");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("schedule: need 0 < beta < 1");
    if (!(ve_variance > 0.0)) throw ConfigError("schedule: ve_variance must be > 0");
    NoiseSchedule s;
    s.sigma_.resize(steps + 1);
    s.beta_.assign(steps, beta);
    for (int i = 0; i <= steps; ++i) s.sigma_[i] = std::sqrt((steps - i) * ve_variance);
    s.lattice_c_ = lattice_c;
    s.finish();
    return s;
  }

  int steps() const { return static_cast<int>(beta_.size()); }
  double sigma(int i) const { return sigma_.at(i); }
  double beta(int i) const { return beta_.at(i); }
  double alpha_bar(int i) const { return alpha_bar_.at(i); }
  double ve_variance(int i) const {
    return sigma_.at(i) * sigma_.at(i) - sigma_.at(i + 1) * sigma_.at(i + 1);
  }

  /// Lattice noise scale sigma(n) = c n^(1/3), Angstrom.
  double lattice_scale(std::size_t atoms) const {
    return lattice_c_ * std::cbrt(static_cast<double>(atoms));
  }
  double lattice_c() const { return lattice_c_; }
  /// Molecular coordinates use unit-variance VP noise (Angstrom).
  static constexpr double molecular_scale() { return 1.0; }

  ScheduleState state(int i) const {
    return {i, sigma(i), ve_variance(i), beta(i), alpha_bar(i)};
  }

 private:
  void finish() {
    const int n = steps();
    alpha_bar_.assign(n + 1, 1.0);
    for (int i = n - 1; i >= 0; --i) alpha_bar_[i] = alpha_bar_[i + 1] * (1.0 - beta_[i]);
  }

  std::vector<double> sigma_;      // size N+1
  std::vector<double> beta_;       // size N
  std::vector<double> alpha_bar_;  // size N+1
  double lattice_c_ = 2.0;
};

}  // namespace structsearch
