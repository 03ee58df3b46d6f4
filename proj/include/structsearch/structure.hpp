#pragma once

// Structure representation, periodic geometry and random seeding.
//
// Lattice convention: rows of L are the lattice vectors and the Cartesian
// position of atom j is r_j = L^T x_j. In row form the whole block is R = X L.

#include "structsearch/core.hpp"
#include "structsearch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace structsearch {

using Composition = std::map<std::string, int>;

/// Canonical torus representative of a single coordinate, in [0, 1).
inline double wrap_unit(double x) {
  double w = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.
  return w >= 1.0 ? 0.0 : w;
}

inline Coords wrap_fractional(const Coords& frac) {
  if (!frac.allFinite()) throw ValidationError("wrap_fractional: non-finite coordinate");
  Coords out(frac.rows(), 3);
  for (Eigen::Index j = 0; j < frac.rows(); ++j)
    for (int c = 0; c < 3; ++c) out(j, c) = wrap_unit(frac(j, c));
  return out;
}

/// Either a non-periodic atom set (Cartesian coordinates, Angstrom) or a
/// periodic cell (fractional coordinates plus lattice).
class Structure {
 public:
  Structure() = default;

  static Structure molecule(std::vector<std::string> species, Coords coords) {
    Structure s;
    s.species_ = std::move(species);
    s.positions_ = std::move(coords);
    s.validate();
    return s;
  }

  /// Fractional coordinates are wrapped into [0, 1).
  static Structure crystal(std::vector<std::string> species, const Coords& frac,
                           const Mat3& lattice) {
    Structure s;
    s.species_ = std::move(species);
    if (!frac.allFinite()) throw ValidationError("crystal: non-finite fractional coordinate");
    s.positions_ = wrap_fractional(frac);
    s.lattice_ = lattice;
    s.validate();
    return s;
  }

  /// Builds without re-validating the lattice orientation. Used for noisy
  /// sampler intermediates, whose lattices may be arbitrary.
  static Structure crystal_unchecked(std::vector<std::string> species, const Coords& frac,
                                     const Mat3& lattice) {
    Structure s;
    s.species_ = std::move(species);
    s.positions_ = wrap_fractional(frac);
    s.lattice_ = lattice;
    return s;
  }

  std::size_t size() const { return species_.size(); }
  bool periodic() const { return lattice_.has_value(); }

  const std::vector<std::string>& species() const { return species_; }
  /// Fractional rows for crystals, Cartesian rows for molecules.
  const Coords& positions() const { return positions_; }
  const Mat3& lattice() const {
    if (!lattice_) throw ValidationError("structure has no lattice");
    return *lattice_;
  }
  const std::optional<Mat3>& maybe_lattice() const { return lattice_; }

  double volume() const { return std::abs(lattice().determinant()); }

  Composition composition() const {
    Composition c;
    for (const auto& s : species_) ++c[s];
    return c;
  }

  bool operator==(const Structure& o) const {
    return species_ == o.species_ && positions_ == o.positions_ &&
           lattice_.has_value() == o.lattice_.has_value() &&
           (!lattice_ || *lattice_ == *o.lattice_);
  }

 private:
  void validate() const {
    if (species_.empty()) throw ValidationError("structure must contain at least one atom");
    if (static_cast<Eigen::Index>(species_.size()) != positions_.rows())
      throw ValidationError("species count does not match coordinate rows");
    if (!positions_.allFinite()) throw ValidationError("non-finite coordinate");
    if (lattice_) {
      if (!lattice_->allFinite()) throw ValidationError("non-finite lattice");
      if (!(lattice_->determinant() > 0.0))
        throw ValidationError("lattice must have positive determinant");
    }
  }

  std::vector<std::string> species_;
  Coords positions_;
  std::optional<Mat3> lattice_;
};

inline Coords to_cartesian(const Coords& frac, const Mat3& lattice) { return frac * lattice; }

inline Coords to_cartesian(const Structure& s) {
  if (!s.periodic()) return s.positions();
  return to_cartesian(s.positions(), s.lattice());
}

inline Coords to_fractional(const Coords& cart, const Mat3& lattice) {
  return cart * lattice.inverse();
}

inline std::vector<std::string> species_list(const Composition& comp) {
  std::vector<std::string> out;
  for (const auto& [el, count] : comp)
    for (int i = 0; i < count; ++i) out.push_back(el);
  return out;
}

inline int atom_count(const Composition& comp) {
  int n = 0;
  for (const auto& [el, count] : comp) n += count;
  return n;
}

/// Pairwise (Gauss-style) reduction of the lattice rows: returns {L', U} with
/// L' = U L, U integer and unimodular, rows of L' nearly orthogonal. Sampled
/// cells can be extremely skewed; enumerating images in the reduced basis
/// visits far fewer boxes for the same set of translations.
struct ReducedCell {
  Mat3 lattice;
  Mat3 transform;  // integer entries
};

inline ReducedCell reduce_cell(const Mat3& L, int max_sweeps = 64) {
  ReducedCell r{L, Mat3::Identity()};
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        const double bj2 = r.lattice.row(j).squaredNorm();
        if (!(bj2 > 0.0)) return r;
        const double m = std::round(r.lattice.row(i).dot(r.lattice.row(j)) / bj2);
        if (m == 0.0) continue;
        const Vec3 cand = (r.lattice.row(i) - m * r.lattice.row(j)).transpose();
        if (!(cand.squaredNorm() < r.lattice.row(i).squaredNorm())) continue;
        r.lattice.row(i) = cand.transpose();
        r.transform.row(i) -= m * r.transform.row(j);
        changed = true;
      }
    if (!changed) break;
  }
  return r;
}

/// Calls f(d, r2) for every lattice translation t such that d = (s + t) L has
/// |d| <= rcut. s is a fractional displacement. The per-axis translation range
/// is exact: |(s + t)_a| = |d . (L^-1 column a)| <= rcut * |L^-1 column a|.
template <class F>
void for_each_image(const Mat3& lattice, const Mat3& inverse, const Vec3& s, double rcut,
                    F&& f) {
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    const double reach = rcut * inverse.col(a).norm();
    lo[a] = static_cast<int>(std::ceil(-reach - s(a)));
    hi[a] = static_cast<int>(std::floor(reach - s(a)));
  }
  const double rc2 = rcut * rcut;
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const Vec3 t(s(0) + i, s(1) + j, s(2) + k);
        const Vec3 d = lattice.transpose() * t;
        const double r2 = d.squaredNorm();
        if (r2 <= rc2) f(d, r2, i, j, k);
      }
}

/// Number of translations the enumeration would visit; used to refuse
/// pathologically thin cells before doing the work.
inline double image_box_count(const Mat3& inverse, double rcut) {
  double count = 1.0;
  for (int a = 0; a < 3; ++a) count *= 2.0 * std::ceil(rcut * inverse.col(a).norm()) + 2.0;
  return count;
}

/// Shortest distance between atoms j and k over all lattice translations.
/// For j == k the zero translation is excluded.
inline double min_periodic_distance(const Structure& s, std::size_t j, std::size_t k) {
  const Mat3& L = s.lattice();
  const Mat3 inv = L.inverse();
  Vec3 f = (s.positions().row(k) - s.positions().row(j)).transpose();
  for (int a = 0; a < 3; ++a) f(a) -= std::round(f(a));
  double bound;
  if (j == k) {
    bound = std::min({L.row(0).norm(), L.row(1).norm(), L.row(2).norm()});
  } else {
    bound = (L.transpose() * f).norm();
  }
  double best2 = bound * bound;
  for_each_image(L, inv, f, bound * (1.0 + 1e-12) + 1e-12,
                 [&](const Vec3&, double r2, int i, int jj, int kk) {
                   if (j == k && i == 0 && jj == 0 && kk == 0) return;
                   best2 = std::min(best2, r2);
                 });
  return std::sqrt(best2);
}

/// Minimum distance between distinct atoms (images included); +inf for n = 1.
inline double min_pair_distance(const Structure& s) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = s.size();
  if (s.periodic()) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) best = std::min(best, min_periodic_distance(s, j, k));
  } else {
    const Coords& r = s.positions();
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        best = std::min(best, (r.row(k) - r.row(j)).norm());
  }
  return best;
}

/// Cell from lengths (Angstrom) and angles (degrees), a along x, b in xy.
inline std::optional<Mat3> lattice_from_parameters(double a, double b, double c, double alpha,
                                                   double beta, double gamma) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double ca = std::cos(alpha * deg), cb = std::cos(beta * deg), cg = std::cos(gamma * deg);
  const double sg = std::sin(gamma * deg);
  const double disc = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg;
  if (disc <= 1e-6 || sg <= 1e-9) return std::nullopt;
  Mat3 L;
  L.row(0) << a, 0.0, 0.0;
  L.row(1) << b * cg, b * sg, 0.0;
  const double cx = c * cb;
  const double cy = c * (ca - cb * cg) / sg;
  L.row(2) << cx, cy, std::sqrt(std::max(c * c - cx * cx - cy * cy, 0.0));
  return L;
}

/// Parameters of random seed generation.
struct SeedSpec {
  Composition composition;
  double volume_min = 8.0;   // A^3 per atom
  double volume_max = 30.0;  // A^3 per atom
  double angle_min = 60.0;   // degrees
  double angle_max = 120.0;  // degrees
  double min_separation = 1.6;
  std::uint64_t rng_seed = 0;
  bool periodic = true;
  int max_attempts = 1000;

  void validate() const {
    if (composition.empty() || atom_count(composition) < 1)
      throw ValidationError("seed spec: empty composition");
    for (const auto& [el, count] : composition)
      if (count < 0) throw ValidationError("seed spec: negative count for " + el);
    if (!(volume_min > 0.0) || volume_min > volume_max)
      throw ValidationError("seed spec: need 0 < volume_min <= volume_max");
    if (!(angle_min > 0.0) || angle_min > angle_max || !(angle_max < 180.0))
      throw ValidationError("seed spec: need 0 < angle_min <= angle_max < 180");
    if (!(min_separation > 0.0)) throw ValidationError("seed spec: min_separation must be > 0");
    if (max_attempts < 1) throw ValidationError("seed spec: max_attempts must be >= 1");
  }
};

/// Shortest image distance for a fractional displacement f (already reduced
/// to [-0.5, 0.5]).
inline double min_image_distance(const Mat3& L, const Mat3& inv, const Vec3& f) {
  const double bound = (L.transpose() * f).norm();
  double best2 = bound * bound;
  for_each_image(L, inv, f, bound * (1.0 + 1e-12) + 1e-12,
                 [&](const Vec3&, double r2, int, int, int) { best2 = std::min(best2, r2); });
  return std::sqrt(best2);
}

/// Random starting structure, a pure function of (spec, index). Periodic seeds
/// draw volume and angles from the spec ranges, lengths with a random aspect
/// ratio, and uniform fractional positions; molecular seeds place atoms
/// uniformly in a cube of the drawn volume. Atoms are placed one at a time,
/// each redrawn until it clears min_separation from those already placed; an
/// attempt that gets stuck starts over with a fresh cell.
inline Structure random_seed_structure(const SeedSpec& spec, std::uint64_t index) {
  spec.validate();
  Rng rng = Rng::substream(spec.rng_seed, Stream::seed, index);
  const auto species = species_list(spec.composition);
  const int n = static_cast<int>(species.size());
  constexpr int kTriesPerAtom = 200;
  double closest = 0.0;

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    const double volume = n * rng.uniform(spec.volume_min, spec.volume_max);
    Mat3 L = Mat3::Identity(), inv = Mat3::Identity();
    double side = 0.0;
    if (spec.periodic) {
      const double alpha = rng.uniform(spec.angle_min, spec.angle_max);
      const double beta = rng.uniform(spec.angle_min, spec.angle_max);
      const double gamma = rng.uniform(spec.angle_min, spec.angle_max);
      const double ra = rng.uniform(0.75, 1.25), rb = rng.uniform(0.75, 1.25),
                   rc = rng.uniform(0.75, 1.25);
      auto shape = lattice_from_parameters(ra, rb, rc, alpha, beta, gamma);
      if (!shape) continue;
      L = *shape * std::cbrt(volume / shape->determinant());
      inv = L.inverse();
    } else {
      side = std::cbrt(volume);
    }

    Coords pos(n, 3);
    bool stuck = false;
    closest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n && !stuck; ++j) {
      bool placed = false;
      double best_try = 0.0;
      for (int t = 0; t < kTriesPerAtom && !placed; ++t) {
        Vec3 p;
        for (int c = 0; c < 3; ++c) p(c) = spec.periodic ? rng.uniform() : side * rng.uniform();
        double nearest = std::numeric_limits<double>::infinity();
        for (int k = 0; k < j && nearest >= spec.min_separation; ++k) {
          Vec3 d = p - pos.row(k).transpose();
          if (spec.periodic) {
            for (int c = 0; c < 3; ++c) d(c) -= std::round(d(c));
            nearest = std::min(nearest, min_image_distance(L, inv, d));
          } else {
            nearest = std::min(nearest, d.norm());
          }
        }
        best_try = std::max(best_try, nearest);
        if (nearest >= spec.min_separation) {
          pos.row(j) = p.transpose();
          placed = true;
        }
      }
      if (!placed) {
        stuck = true;
        closest = best_try;
      }
    }
    if (stuck) continue;
    return spec.periodic ? Structure::crystal(species, pos, L) : Structure::molecule(species, pos);
  }
  std::ostringstream msg;
  msg << "random_seed_structure: no draw satisfied min_separation " << spec.min_separation
      << " A within " << spec.max_attempts << " attempts (last closest pair " << closest
      << " A)";
  throw ValidationError(msg.str());
}

}  // namespace structsearch
