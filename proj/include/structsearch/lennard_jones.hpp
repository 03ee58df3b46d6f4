#pragma once

// Lennard-Jones pair potential for clusters and periodic cells.
//
// Periodic cells are summed over every image within the cutoff, not only the
// minimum image, so cells smaller than twice the cutoff are handled exactly.

#include "structsearch/potential.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

namespace structsearch {

struct LJParameters {
  double epsilon = 1.0;  // eV
  double sigma = 1.0;    // A
};

struct LJOptions {
  LJParameters defaults;
  /// Per species-pair overrides; keys are stored with the smaller label first.
  std::map<std::pair<std::string, std::string>, LJParameters> pairs;
  double cutoff_factor = 2.5;       // r_c = cutoff_factor * sigma
  bool shift = true;                // V(r_c) = 0
  bool cutoff_nonperiodic = false;  // clusters sum all pairs by default
  double overlap_floor = 0.1;       // A
  double max_image_boxes = 2.0e6;   // refuse pathologically thin cells
};

class LennardJones final : public Potential {
 public:
  explicit LennardJones(LJOptions opts = {}) : opts_(std::move(opts)) {}

  std::string name() const override { return "lennard_jones"; }
  const LJOptions& options() const { return opts_; }

  LJParameters pair(const std::string& a, const std::string& b) const {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = opts_.pairs.find(key);
    return it == opts_.pairs.end() ? opts_.defaults : it->second;
  }

  double max_cutoff() const {
    double s = opts_.defaults.sigma;
    for (const auto& [k, p] : opts_.pairs) s = std::max(s, p.sigma);
    return opts_.cutoff_factor * s;
  }

  PotentialReport compute(const Structure& s, const EvalOptions& eo) const override {
    return s.periodic() ? evaluate_periodic(s, eo) : evaluate_cluster(s, eo);
  }

 private:
  struct PairTerm {
    double energy;
    double dphi_over_r;  // phi'(r) / r
  };

  PairTerm term(const LJParameters& p, double r2, bool use_cutoff, const EvalOptions& eo) const {
    const double floor2 = opts_.overlap_floor * opts_.overlap_floor;
    if (r2 < floor2) {
      if (!eo.clamp_overlap) {
        std::ostringstream msg;
        msg << "lennard_jones: atoms " << std::sqrt(r2) << " A apart, below overlap floor "
            << opts_.overlap_floor << " A";
        throw OverlapError(msg.str());
      }
      r2 = floor2;
    }
    const double s2 = p.sigma * p.sigma / r2;
    const double s6 = s2 * s2 * s2;
    const double s12 = s6 * s6;
    double e = 4.0 * p.epsilon * (s12 - s6);
    if (use_cutoff && opts_.shift) {
      const double rc2 = opts_.cutoff_factor * opts_.cutoff_factor;
      const double c6 = 1.0 / (rc2 * rc2 * rc2);
      e -= 4.0 * p.epsilon * (c6 * c6 - c6);
    }
    return {e, -24.0 * p.epsilon * (2.0 * s12 - s6) / r2};
  }

  PotentialReport evaluate_cluster(const Structure& s, const EvalOptions& eo) const {
    const auto n = static_cast<Eigen::Index>(s.size());
    const Coords& r = s.positions();
    PotentialReport out;
    out.forces.setZero(n, 3);
    const bool cut = opts_.cutoff_nonperiodic;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = j + 1; k < n; ++k) {
        const LJParameters p = pair(s.species()[j], s.species()[k]);
        const Vec3 d = (r.row(k) - r.row(j)).transpose();
        const double r2 = d.squaredNorm();
        if (cut) {
          const double rc = opts_.cutoff_factor * p.sigma;
          if (r2 >= rc * rc) continue;
        }
        const PairTerm t = term(p, r2, cut, eo);
        out.energy += t.energy;
        const Vec3 g = t.dphi_over_r * d;  // dE/dr_k
        out.forces.row(k) -= g.transpose();
        out.forces.row(j) += g.transpose();
      }
    return out;
  }

  PotentialReport evaluate_periodic(const Structure& s, const EvalOptions& eo) const {
    const auto n = static_cast<Eigen::Index>(s.size());
    const double det = s.lattice().determinant();
    if (!(std::abs(det) > 1e-9)) throw OverlapError("lennard_jones: degenerate cell");
    // Same translations, shorter basis: R = X L = (X U^-1)(U L).
    const ReducedCell red = reduce_cell(s.lattice());
    const Mat3& L = red.lattice;
    const Mat3 inv = L.inverse();
    const double rcut = max_cutoff();
    if (image_box_count(inv, rcut) * static_cast<double>(n) > opts_.max_image_boxes)
      throw OverlapError("lennard_jones: cell too thin for image enumeration");

    const Coords x = s.positions() * red.transform.inverse().array().round().matrix();
    PotentialReport out;
    out.forces.setZero(n, 3);
    Mat3 g_tensor = Mat3::Zero();  // sum w phi'(r)/r d d^T

    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = j; k < n; ++k) {
        const LJParameters p = pair(s.species()[j], s.species()[k]);
        const double rc = opts_.cutoff_factor * p.sigma;
        Vec3 f = (x.row(k) - x.row(j)).transpose();
        for (int a = 0; a < 3; ++a) f(a) -= std::round(f(a));
        const bool self = (j == k);
        const double w = self ? 0.5 : 1.0;
        for_each_image(L, inv, f, rc, [&](const Vec3& d, double r2, int a, int b, int c) {
          if (self && a == 0 && b == 0 && c == 0) return;
          const PairTerm t = term(p, r2, true, eo);
          out.energy += w * t.energy;
          g_tensor.noalias() += (w * t.dphi_over_r) * d * d.transpose();
          if (!self) {
            const Vec3 g = t.dphi_over_r * d;
            out.forces.row(k) -= g.transpose();
            out.forces.row(j) += g.transpose();
          }
        });
      }
    out.virial = -g_tensor / std::abs(det);
    return out;
  }

  LJOptions opts_;
};

}  // namespace structsearch
