#pragma once

// Small analytic surfaces: harmonic well, 1-D / 2-D double wells and a
// two-dihedral torsion molecule. All act on non-periodic structures.

#include "structsearch/potential.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace structsearch {

/// V = 1/2 k |r - center|^2 summed over atoms.
class Harmonic final : public Potential {
 public:
  explicit Harmonic(double k = 1.0, Vec3 center = Vec3::Zero()) : k_(k), center_(center) {}
  std::string name() const override { return "harmonic"; }

  PotentialReport compute(const Structure& s, const EvalOptions&) const override {
    if (s.periodic()) throw ValidationError("harmonic: non-periodic structures only");
    PotentialReport out;
    out.forces.resize(s.positions().rows(), 3);
    for (Eigen::Index j = 0; j < s.positions().rows(); ++j) {
      const Vec3 d = s.positions().row(j).transpose() - center_;
      out.energy += 0.5 * k_ * d.squaredNorm();
      out.forces.row(j) = -k_ * d.transpose();
    }
    return out;
  }

 private:
  double k_;
  Vec3 center_;
};

/// V = height ((x/scale)^2 - 1)^2 + 1/2 k_perp (y^2 + z^2), per atom.
class DoubleWell1D final : public Potential {
 public:
  explicit DoubleWell1D(double height = 1.0, double scale = 1.0, double k_perp = 1.0)
      : height_(height), scale_(scale), k_perp_(k_perp) {}
  std::string name() const override { return "double_well_1d"; }

  double height() const { return height_; }
  double energy_x(double x) const {
    const double u = x / scale_;
    return height_ * (u * u - 1.0) * (u * u - 1.0);
  }

  PotentialReport compute(const Structure& s, const EvalOptions&) const override {
    if (s.periodic()) throw ValidationError("double_well_1d: non-periodic structures only");
    PotentialReport out;
    out.forces.resize(s.positions().rows(), 3);
    for (Eigen::Index j = 0; j < s.positions().rows(); ++j) {
      const double x = s.positions()(j, 0), y = s.positions()(j, 1), z = s.positions()(j, 2);
      const double u = x / scale_;
      out.energy += energy_x(x) + 0.5 * k_perp_ * (y * y + z * z);
      out.forces(j, 0) = -4.0 * height_ * u * (u * u - 1.0) / scale_;
      out.forces(j, 1) = -k_perp_ * y;
      out.forces(j, 2) = -k_perp_ * z;
    }
    return out;
  }

 private:
  double height_, scale_, k_perp_;
};

/// Four-minimum test surface, per atom:
/// V = h[(x^2-1)^2 + (y^2-1)^2] + c xy + t_x x + t_y y + 1/2 k_z z^2.
/// The coupling and tilts split the four wells into distinct energies.
class DoubleWell2D final : public Potential {
 public:
  struct Params {
    double height = 1.0;
    double coupling = 0.1;
    double tilt_x = 0.05;
    double tilt_y = 0.02;
    double k_z = 1.0;
  };
  DoubleWell2D() = default;
  explicit DoubleWell2D(Params p) : p_(p) {}
  std::string name() const override { return "double_well_2d"; }

  double energy_xy(double x, double y) const {
    return p_.height * ((x * x - 1) * (x * x - 1) + (y * y - 1) * (y * y - 1)) +
           p_.coupling * x * y + p_.tilt_x * x + p_.tilt_y * y;
  }

  PotentialReport compute(const Structure& s, const EvalOptions&) const override {
    if (s.periodic()) throw ValidationError("double_well_2d: non-periodic structures only");
    PotentialReport out;
    out.forces.resize(s.positions().rows(), 3);
    for (Eigen::Index j = 0; j < s.positions().rows(); ++j) {
      const double x = s.positions()(j, 0), y = s.positions()(j, 1), z = s.positions()(j, 2);
      out.energy += energy_xy(x, y) + 0.5 * p_.k_z * z * z;
      out.forces(j, 0) = -(4.0 * p_.height * x * (x * x - 1) + p_.coupling * y + p_.tilt_x);
      out.forces(j, 1) = -(4.0 * p_.height * y * (y * y - 1) + p_.coupling * x + p_.tilt_y);
      out.forces(j, 2) = -p_.k_z * z;
    }
    return out;
  }

 private:
  Params p_;
};

/// Signed dihedral angle p0-p1-p2-p3 in (-pi, pi] with its Cartesian gradient.
struct Dihedral {
  double angle = 0.0;
  std::array<Vec3, 4> grad{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

inline Dihedral dihedral(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  const Vec3 b1 = p1 - p0, b2 = p2 - p1, b3 = p3 - p2;
  const Vec3 n1 = b1.cross(b2), n2 = b2.cross(b3);
  const double b2n = b2.norm();
  Dihedral d;
  d.angle = std::atan2(b2n * b1.dot(n2), n1.dot(n2));
  const double n1sq = n1.squaredNorm(), n2sq = n2.squaredNorm();
  // Collinear triples leave the angle undefined; report a flat gradient.
  if (n1sq < 1e-14 || n2sq < 1e-14 || b2n < 1e-12) return d;
  const Vec3 g0 = -b2n / n1sq * n1;
  const Vec3 g3 = b2n / n2sq * n2;
  const double f1 = b1.dot(b2) / (b2n * b2n);
  const double f3 = b3.dot(b2) / (b2n * b2n);
  d.grad[0] = g0;
  d.grad[3] = g3;
  d.grad[1] = f3 * g3 - (1.0 + f1) * g0;
  d.grad[2] = f1 * g0 - (1.0 + f3) * g3;
  return d;
}

/// Six-atom chain a0..a5 whose conformations are set by two dihedrals:
/// phi = dihedral(a0, a1, a2, a3) and psi = dihedral(a2, a3, a4, a5). Bond
/// lengths, bond angles and the central a1-a2-a3-a4 dihedral come from a
/// fixed template and are held by harmonic distance restraints that vanish on
/// every template-built structure, so E(build(phi, psi)) = V(phi, psi) with
///   V = A(1 - cos 2(phi - phi0)) + B(1 - cos 2(psi - psi0))
///       + C cos(phi) cos(psi) + D cos(psi).
class TorsionModel final : public Potential {
 public:
  struct Params {
    double A = 0.15, B = 0.15, C = 0.05, D = 0.02;  // eV
    double phi0 = 0.3, psi0 = 0.3;                  // rad
    double bond = 1.5;                              // A
    double bond_angle_deg = 110.0;
    double central_dihedral = std::numbers::pi;
    double k_restraint = 5.0;  // eV/A^2
  };

  TorsionModel() : TorsionModel(Params{}) {}
  explicit TorsionModel(Params p) : p_(p) {
    const Structure ref = build(0.0, 0.0);
    const Coords& r = ref.positions();
    for (auto [a, b] : restraint_pairs()) rest_.push_back((r.row(b) - r.row(a)).norm());
  }

  std::string name() const override { return "torsion"; }
  const Params& params() const { return p_; }

  static std::vector<std::string> species() { return {"C", "C", "C", "C", "C", "O"}; }

  /// Pairs whose distance does not depend on (phi, psi).
  static const std::vector<std::pair<int, int>>& restraint_pairs() {
    static const std::vector<std::pair<int, int>> pairs = {
        {0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {1, 4}};
    return pairs;
  }

  double surface(double phi, double psi) const {
    return p_.A * (1.0 - std::cos(2.0 * (phi - p_.phi0))) +
           p_.B * (1.0 - std::cos(2.0 * (psi - p_.psi0))) +
           p_.C * std::cos(phi) * std::cos(psi) + p_.D * std::cos(psi);
  }

  std::pair<double, double> surface_gradient(double phi, double psi) const {
    return {2.0 * p_.A * std::sin(2.0 * (phi - p_.phi0)) - p_.C * std::sin(phi) * std::cos(psi),
            2.0 * p_.B * std::sin(2.0 * (psi - p_.psi0)) - p_.C * std::cos(phi) * std::sin(psi) -
                p_.D * std::sin(psi)};
  }

  /// Template molecule with the requested dihedrals.
  Structure build(double phi, double psi) const {
    const double theta = p_.bond_angle_deg * std::numbers::pi / 180.0;
    Coords r(6, 3);
    const Vec3 a0(0.0, 0.0, 0.0);
    const Vec3 a1(p_.bond, 0.0, 0.0);
    const Vec3 a2 = a1 + p_.bond * Vec3(-std::cos(theta), std::sin(theta), 0.0);
    const Vec3 a3 = place(a0, a1, a2, phi);
    const Vec3 a4 = place(a1, a2, a3, p_.central_dihedral);
    const Vec3 a5 = place(a2, a3, a4, psi);
    r.row(0) = a0.transpose();
    r.row(1) = a1.transpose();
    r.row(2) = a2.transpose();
    r.row(3) = a3.transpose();
    r.row(4) = a4.transpose();
    r.row(5) = a5.transpose();
    return Structure::molecule(species(), r);
  }

  std::pair<double, double> dihedrals(const Structure& s) const {
    const Coords& r = s.positions();
    auto row = [&](int i) -> Vec3 { return r.row(i).transpose(); };
    return {dihedral(row(0), row(1), row(2), row(3)).angle,
            dihedral(row(2), row(3), row(4), row(5)).angle};
  }

  PotentialReport compute(const Structure& s, const EvalOptions&) const override {
    if (s.periodic() || s.size() != 6) throw ValidationError("torsion: six-atom molecule required");
    const Coords& r = s.positions();
    auto row = [&](int i) -> Vec3 { return r.row(i).transpose(); };
    PotentialReport out;
    out.forces.setZero(6, 3);

    const Dihedral phi = dihedral(row(0), row(1), row(2), row(3));
    const Dihedral psi = dihedral(row(2), row(3), row(4), row(5));
    out.energy = surface(phi.angle, psi.angle);
    const auto [dphi, dpsi] = surface_gradient(phi.angle, psi.angle);
    for (int i = 0; i < 4; ++i) {
      out.forces.row(i) -= dphi * phi.grad[i].transpose();
      out.forces.row(i + 2) -= dpsi * psi.grad[i].transpose();
    }

    const auto& pairs = restraint_pairs();
    for (std::size_t m = 0; m < pairs.size(); ++m) {
      const auto [a, b] = pairs[m];
      const Vec3 d = row(b) - row(a);
      const double len = d.norm();
      const double stretch = len - rest_[m];
      out.energy += 0.5 * p_.k_restraint * stretch * stretch;
      if (len > 1e-12) {
        const Vec3 g = p_.k_restraint * stretch / len * d;
        out.forces.row(b) -= g.transpose();
        out.forces.row(a) += g.transpose();
      }
    }
    return out;
  }

 private:
  // Natural-extension placement of d given a, b, c, bond length, bond angle
  // b-c-d and dihedral a-b-c-d.
  Vec3 place(const Vec3& a, const Vec3& b, const Vec3& c, double tors) const {
    const double theta = p_.bond_angle_deg * std::numbers::pi / 180.0;
    const Vec3 bc = (c - b).normalized();
    const Vec3 n = (b - a).cross(bc).normalized();
    const Vec3 m = n.cross(bc);
    const Vec3 local(-p_.bond * std::cos(theta), p_.bond * std::sin(theta) * std::cos(tors),
                     p_.bond * std::sin(theta) * std::sin(tors));
    return c + local(0) * bc + local(1) * m + local(2) * n;
  }

  Params p_;
  std::vector<double> rest_;
};

}  // namespace structsearch
