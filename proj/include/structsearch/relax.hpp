#pragma once

// Local minimization: plain steepest descent and FIRE, optionally with the
// cell as extra degrees of freedom.

#include "structsearch/potential.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace structsearch {

enum class RelaxMethod { fire, steepest_descent };

struct RelaxConfig {
  double f_max = 0.01;  // eV/A
  int max_steps = 1000;
  double dt_initial = 0.02;
  double dt_max = 0.2;
  RelaxMethod method = RelaxMethod::fire;
  double step_size = 0.01;  // A^2/eV, steepest descent only
  bool relax_cell = true;
  double max_step = 0.2;  // A, cap on the FIRE displacement per step

  // FIRE constants (standard published values)
  int n_min = 5;
  double f_inc = 1.1;
  double f_dec = 0.5;
  double alpha_start = 0.1;
  double f_alpha = 0.99;

  void validate() const {
    if (!(f_max > 0.0)) throw ConfigError("relax: f_max must be > 0");
    if (max_steps < 1) throw ConfigError("relax: max_steps must be >= 1");
    if (!(dt_initial > 0.0) || !(dt_max > 0.0) || dt_initial > dt_max)
      throw ConfigError("relax: need 0 < dt_initial <= dt_max");
    if (!(step_size > 0.0)) throw ConfigError("relax: step_size must be > 0");
    if (!(max_step > 0.0)) throw ConfigError("relax: max_step must be > 0");
  }
};

struct RelaxResult {
  Structure structure;
  double energy_per_atom = 0.0;
  bool converged = false;
  int steps_used = 0;
  double max_force_final = 0.0;  // eV/A, atoms only
  double max_cell_force_final = 0.0;
};

/// One step M - h grad E. Periodic: fractional coordinates move by h grad_X E
/// and, when h_lattice is given, the lattice by h_lattice grad_L E.
inline Structure steepest_descent_step(const Structure& s, const Potential& pot, double h,
                                       std::optional<double> h_lattice = std::nullopt) {
  if (!(h > 0.0)) throw ValidationError("steepest_descent_step: h must be > 0");
  const PotentialReport rep = pot.evaluate(s);
  if (!std::isfinite(rep.energy)) throw DivergedError("steepest_descent_step: non-finite energy", 0);
  if (!s.periodic()) return Structure::molecule(s.species(), s.positions() + h * rep.forces);
  const Coords x = s.positions() - h * frac_gradient(s, rep);
  Mat3 L = s.lattice();
  if (h_lattice) L -= *h_lattice * lattice_gradient_from_virial(s, *rep.virial);
  return Structure::crystal_unchecked(s.species(), x, L);
}

namespace detail {

// Flat generalized coordinates for FIRE. Periodic cells use undeformed
// Cartesian positions U = X L0 plus a scaled deformation q_D = c D with
// L = L0 D, so the cell and atom moves have comparable stiffness.
class RelaxDofs {
 public:
  RelaxDofs(const Structure& s, bool relax_cell)
      : species_(s.species()), periodic_(s.periodic()), cell_(s.periodic() && relax_cell) {
    n_ = static_cast<Eigen::Index>(s.size());
    cell_factor_ = static_cast<double>(n_);
    if (periodic_) {
      L0_ = s.lattice();
      L0inv_ = L0_.inverse();
    }
  }

  Eigen::Index size() const { return 3 * n_ + (cell_ ? 9 : 0); }

  Eigen::VectorXd pack(const Structure& s) const {
    Eigen::VectorXd q(size());
    const Coords u = periodic_ ? Coords(s.positions() * L0_) : s.positions();
    for (Eigen::Index j = 0; j < n_; ++j)
      for (int c = 0; c < 3; ++c) q(3 * j + c) = u(j, c);
    if (cell_) {
      const Mat3 D = L0inv_ * s.lattice();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) q(3 * n_ + 3 * a + b) = cell_factor_ * D(a, b);
    }
    return q;
  }

  Structure unpack(const Eigen::VectorXd& q) const {
    Coords u(n_, 3);
    for (Eigen::Index j = 0; j < n_; ++j)
      for (int c = 0; c < 3; ++c) u(j, c) = q(3 * j + c);
    if (!periodic_) return Structure::molecule(species_, u);
    Mat3 L = L0_;
    if (cell_) L = L0_ * deformation(q);
    return Structure::crystal_unchecked(species_, u * L0inv_, L);
  }

  struct Eval {
    double energy;
    Eigen::VectorXd force;  // -dE/dq
    double atom_fmax;
    double cell_fmax;
  };

  Eval evaluate(const Potential& pot, const Eigen::VectorXd& q) const {
    const Structure s = unpack(q);
    const PotentialReport rep = pot.evaluate(s);
    Eval e{rep.energy, Eigen::VectorXd::Zero(size()), max_force(rep.forces), 0.0};
    Coords gu = rep.forces;  // -dE/dU
    if (cell_) gu = rep.forces * deformation(q).transpose();
    for (Eigen::Index j = 0; j < n_; ++j)
      for (int c = 0; c < 3; ++c) e.force(3 * j + c) = gu(j, c);
    if (cell_) {
      const Mat3 gD = -(L0_.transpose() * lattice_gradient_from_virial(s, *rep.virial)) / cell_factor_;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) e.force(3 * n_ + 3 * a + b) = gD(a, b);
        e.cell_fmax = std::max(e.cell_fmax, gD.row(a).norm());
      }
    }
    return e;
  }

 private:
  Mat3 deformation(const Eigen::VectorXd& q) const {
    Mat3 D;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) D(a, b) = q(3 * n_ + 3 * a + b) / cell_factor_;
    return D;
  }

  std::vector<std::string> species_;
  bool periodic_;
  bool cell_;
  Eigen::Index n_ = 0;
  double cell_factor_ = 1.0;
  Mat3 L0_ = Mat3::Identity(), L0inv_ = Mat3::Identity();
};

}  // namespace detail

/// FIRE minimization. Periodic structures with relax_cell move the lattice
/// together with the atoms; convergence then also requires the scaled cell
/// force to drop below f_max.
inline RelaxResult fire_relax(const Structure& start, const Potential& pot, const RelaxConfig& cfg) {
  cfg.validate();
  const detail::RelaxDofs dofs(start, cfg.relax_cell);
  const double n = static_cast<double>(start.size());
  Eigen::VectorXd q = dofs.pack(start);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(q.size());

  auto check = [](const detail::RelaxDofs::Eval& e, int step) {
    if (!std::isfinite(e.energy) || !e.force.allFinite())
      throw DivergedError("fire_relax: non-finite energy or force", step);
  };

  auto finish = [&](const detail::RelaxDofs::Eval& e, int steps, bool conv) {
    RelaxResult r;
    r.structure = dofs.unpack(q);
    r.energy_per_atom = e.energy / n;
    r.converged = conv;
    r.steps_used = steps;
    r.max_force_final = e.atom_fmax;
    r.max_cell_force_final = e.cell_fmax;
    return r;
  };

  detail::RelaxDofs::Eval e = dofs.evaluate(pot, q);
  check(e, 0);
  const bool steepest = cfg.method == RelaxMethod::steepest_descent;
  double dt = cfg.dt_initial, a = cfg.alpha_start;
  int n_pos = 0;

  for (int step = 0; step < cfg.max_steps; ++step) {
    if (e.atom_fmax <= cfg.f_max && e.cell_fmax <= cfg.f_max) return finish(e, step, true);

    Eigen::VectorXd dr;
    if (steepest) {
      dr = cfg.step_size * e.force;
    } else {
      const double p = e.force.dot(v);
      if (p > 0.0) {
        const double fn = e.force.norm();
        if (fn > 0.0) v = (1.0 - a) * v + a * v.norm() / fn * e.force;
        if (n_pos > cfg.n_min) {
          dt = std::min(dt * cfg.f_inc, cfg.dt_max);
          a *= cfg.f_alpha;
        }
        ++n_pos;
      } else {
        v.setZero();
        a = cfg.alpha_start;
        dt *= cfg.f_dec;
        n_pos = 0;
      }
      v += dt * e.force;
      dr = dt * v;
    }
    const double norm = dr.norm();
    if (norm > cfg.max_step) dr *= cfg.max_step / norm;
    q += dr;
    e = dofs.evaluate(pot, q);
    check(e, step + 1);
  }
  const bool conv = e.atom_fmax <= cfg.f_max && e.cell_fmax <= cfg.f_max;
  return finish(e, cfg.max_steps, conv);
}

}  // namespace structsearch
