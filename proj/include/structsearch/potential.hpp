#pragma once

// Potential interface, the force/stress to fractional/lattice gradient
// conversions, and a central finite-difference oracle.
//
// Stress sign convention: virial_stress is the tensor for which the lattice
// gradient at fixed fractional coordinates is
//     dE/dL = -|det L| L^{-T} virial_stress.
// For a pair potential this is virial_stress = -(1/V) sum_pairs phi'(r)/r d (x) d.

#include "structsearch/core.hpp"
#include "structsearch/structure.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>

namespace structsearch {

struct PotentialReport {
  double energy = 0.0;          // eV
  Coords forces;                // eV/A, Cartesian, n x 3
  std::optional<Mat3> virial;   // eV/A^3, periodic structures only
};

struct EvalOptions {
  /// Treat pair distances below the overlap floor as sitting on the floor
  /// instead of throwing OverlapError.
  bool clamp_overlap = false;
};

class Potential {
 public:
  virtual ~Potential() = default;
  PotentialReport evaluate(const Structure& s, const EvalOptions& opts = {}) const {
    return compute(s, opts);
  }
  virtual std::string name() const = 0;

 protected:
  virtual PotentialReport compute(const Structure& s, const EvalOptions& opts) const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// Multiplies another potential by a constant factor.
class ScaledPotential final : public Potential {
 public:
  ScaledPotential(PotentialPtr inner, double factor) : inner_(std::move(inner)), factor_(factor) {}

  std::string name() const override { return "scaled(" + inner_->name() + ")"; }

 protected:
  PotentialReport compute(const Structure& s, const EvalOptions& opts) const override {
    PotentialReport r = inner_->evaluate(s, opts);
    r.energy *= factor_;
    r.forces *= factor_;
    if (r.virial) *r.virial *= factor_;
    return r;
  }

 private:
  PotentialPtr inner_;
  double factor_;
};

/// Row j is grad_{x_j} E = -L F_j.
inline Coords frac_gradient(const Structure& s, const PotentialReport& report) {
  return -report.forces * s.lattice().transpose();
}

inline Mat3 lattice_gradient_from_virial(const Mat3& lattice, const Mat3& virial) {
  const double det = lattice.determinant();
  if (!(std::abs(det) > 1e-12)) throw ValidationError("lattice_gradient_from_virial: singular lattice");
  return -std::abs(det) * lattice.inverse().transpose() * virial;
}

inline Mat3 lattice_gradient_from_virial(const Structure& s, const Mat3& virial) {
  return lattice_gradient_from_virial(s.lattice(), virial);
}

/// sigma_total = sigma_virial + (1/|det L|) sum_j R_j F_j^T.
inline Mat3 virial_to_total_stress(const Structure& s, const PotentialReport& report) {
  if (!report.virial) throw ValidationError("virial_to_total_stress: report has no virial");
  const Coords cart = to_cartesian(s);
  return *report.virial + cart.transpose() * report.forces / s.volume();
}

/// dE/dL = -|det L| L^{-T} sigma_total + X^T F. Algebraically equal to the
/// virial route; kept as an independent cross-check.
inline Mat3 lattice_gradient_from_total(const Structure& s, const Mat3& total_stress,
                                        const Coords& forces) {
  const Mat3& L = s.lattice();
  return -s.volume() * L.inverse().transpose() * total_stress +
         s.positions().transpose() * forces;
}

/// Maximum per-atom force norm.
inline double max_force(const Coords& forces) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < forces.rows(); ++j) m = std::max(m, forces.row(j).norm());
  return m;
}

/// Central finite differences of the energy.
struct FiniteDifferenceResult {
  Coords forces;                      // -dE/dR (Cartesian moves; torus coordinates rewrapped)
  std::optional<Coords> frac_grad;    // dE/dX
  std::optional<Mat3> lattice_grad;   // dE/dL at fixed X
};

inline FiniteDifferenceResult finite_difference_oracle(const Potential& pot, const Structure& s,
                                                       double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ValidationError("finite_difference_oracle: h outside [1e-7, 1e-3]");
  const auto n = static_cast<Eigen::Index>(s.size());
  FiniteDifferenceResult out;
  out.forces.setZero(n, 3);

  if (!s.periodic()) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (int c = 0; c < 3; ++c) {
        Coords p = s.positions(), m = s.positions();
        p(j, c) += h;
        m(j, c) -= h;
        const double ep = pot.evaluate(Structure::molecule(s.species(), p)).energy;
        const double em = pot.evaluate(Structure::molecule(s.species(), m)).energy;
        out.forces(j, c) = -(ep - em) / (2.0 * h);
      }
    return out;
  }

  const Mat3& L = s.lattice();
  const Mat3 inv = L.inverse();
  const Coords cart = to_cartesian(s);
  auto energy_at = [&](const Coords& frac, const Mat3& lat) {
    return pot.evaluate(Structure::crystal_unchecked(s.species(), frac, lat)).energy;
  };

  Coords frac_grad(n, 3);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int c = 0; c < 3; ++c) {
      Coords rp = cart, rm = cart;
      rp(j, c) += h;
      rm(j, c) -= h;
      out.forces(j, c) = -(energy_at(rp * inv, L) - energy_at(rm * inv, L)) / (2.0 * h);

      Coords xp = s.positions(), xm = s.positions();
      xp(j, c) += h;
      xm(j, c) -= h;
      frac_grad(j, c) = (energy_at(xp, L) - energy_at(xm, L)) / (2.0 * h);
    }
  out.frac_grad = frac_grad;

  Mat3 lat_grad;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      Mat3 lp = L, lm = L;
      lp(a, b) += h;
      lm(a, b) -= h;
      lat_grad(a, b) = (energy_at(s.positions(), lp) - energy_at(s.positions(), lm)) / (2.0 * h);
    }
  out.lattice_grad = lat_grad;
  return out;
}

/// Norm-wise relative error ||a - b||_max / max(||b||_max, floor).
template <class A, class B>
double relative_error(const A& a, const B& b, double floor = 1e-12) {
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return diff / std::max(b.cwiseAbs().maxCoeff(), floor);
}

}  // namespace structsearch
