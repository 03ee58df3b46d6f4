#pragma once

// Structure matching and campaign metrics: coverage, efficiency, budget to
// solve, solved-fraction curves, and the two-torsion Boltzmann analysis.

#include "structsearch/gss.hpp"
#include "structsearch/model_potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>
#include <utility>
#include <vector>

namespace structsearch {

struct MatcherConfig {
  double energy_tol = 1e-3;       // eV/atom
  double fingerprint_tol = 0.05;  // A, RMS over sorted distance lists
  double cutoff = 12.5;           // A

  void validate() const {
    if (!(energy_tol > 0.0) || !(fingerprint_tol > 0.0) || !(cutoff > 0.0))
      throw ConfigError("matcher: tolerances and cutoff must be positive");
  }
};

/// Sorted interatomic distances per unordered species pair. Periodic
/// structures count every image within the cutoff from each atom in the cell.
struct Fingerprint {
  Composition composition;
  std::map<std::pair<std::string, std::string>, std::vector<double>> lists;
};

inline Fingerprint fingerprint(const Structure& s, double cutoff) {
  Fingerprint fp;
  fp.composition = s.composition();
  const std::size_t n = s.size();
  auto key = [&](std::size_t j, std::size_t k) {
    const auto& a = s.species()[j];
    const auto& b = s.species()[k];
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  if (s.periodic()) {
    const Mat3& L = s.lattice();
    if (!(std::abs(L.determinant()) > 1e-9)) return fp;
    const Mat3 inv = L.inverse();
    if (image_box_count(inv, cutoff) * static_cast<double>(n) > 2e6) return fp;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        Vec3 f = (s.positions().row(k) - s.positions().row(j)).transpose();
        for (int a = 0; a < 3; ++a) f(a) -= std::round(f(a));
        auto& list = fp.lists[key(j, k)];
        const bool self = j == k;
        for_each_image(L, inv, f, cutoff, [&](const Vec3&, double r2, int a, int b, int c) {
          // Self images come in +/- pairs; keep one of each so the multiset
          // is that of unordered pairs and does not depend on the cell choice.
          if (self && !(a > 0 || (a == 0 && (b > 0 || (b == 0 && c > 0))))) return;
          list.push_back(std::sqrt(r2));
        });
      }
  } else {
    const Coords& r = s.positions();
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const double d = (r.row(k) - r.row(j)).norm();
        if (d <= cutoff) fp.lists[key(j, k)].push_back(d);
      }
  }
  for (auto& [k, v] : fp.lists) std::sort(v.begin(), v.end());
  return fp;
}

/// RMS deviation of two fingerprints over paired sorted entries; +inf when
/// compositions differ or list lengths differ by more than the edge slack.
inline double fingerprint_distance(const Fingerprint& a, const Fingerprint& b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a.composition != b.composition) return inf;
  double sq = 0.0;
  std::size_t count = 0;
  auto visit = [&](const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t m = std::min(x.size(), y.size());
    const std::size_t diff = std::max(x.size(), y.size()) - m;
    // Distances that sit right at the cutoff can fall on either side.
    const std::size_t slack = std::max<std::size_t>(2, std::max(x.size(), y.size()) / 50);
    if (diff > slack) return false;
    for (std::size_t t = 0; t < m; ++t) sq += (x[t] - y[t]) * (x[t] - y[t]);
    count += m;
    return true;
  };
  static const std::vector<double> empty;
  for (const auto& [k, x] : a.lists) {
    auto it = b.lists.find(k);
    if (!visit(x, it == b.lists.end() ? empty : it->second)) return inf;
  }
  for (const auto& [k, y] : b.lists)
    if (!a.lists.count(k) && !visit(empty, y)) return inf;
  return count == 0 ? 0.0 : std::sqrt(sq / static_cast<double>(count));
}

/// A structure with its energy and precomputed fingerprint.
struct MatchItem {
  std::optional<double> energy_per_atom;
  Fingerprint fp;
};

inline MatchItem match_item(const Structure& s, std::optional<double> e, const MatcherConfig& cfg) {
  return {e, fingerprint(s, cfg.cutoff)};
}

inline bool items_match(const MatchItem& a, const MatchItem& b, const MatcherConfig& cfg) {
  if (a.fp.composition != b.fp.composition) return false;
  if (a.energy_per_atom && b.energy_per_atom &&
      std::abs(*a.energy_per_atom - *b.energy_per_atom) > cfg.energy_tol)
    return false;
  return fingerprint_distance(a.fp, b.fp) <= cfg.fingerprint_tol;
}

inline bool structures_match(const Structure& a, const Structure& b, const MatcherConfig& cfg,
                             std::optional<double> ea = std::nullopt,
                             std::optional<double> eb = std::nullopt) {
  return items_match(match_item(a, ea, cfg), match_item(b, eb, cfg), cfg);
}

/// Labelled structure, the common currency of the metrics below.
struct Sample {
  Structure structure;
  std::optional<double> energy_per_atom;
  bool failed = false;
};

inline Sample as_sample(const SearchRecord& r) { return {r.structure, r.energy_per_atom, r.failed}; }

inline std::vector<MatchItem> match_items(const std::vector<Sample>& xs, const MatcherConfig& cfg) {
  std::vector<MatchItem> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(match_item(x.structure, x.energy_per_atom, cfg));
  return out;
}

/// For each reference, the index of the first non-failed sample matching it
/// (or -1).
inline std::vector<long> first_matches(const std::vector<Sample>& samples,
                                       const std::vector<Sample>& references,
                                       const MatcherConfig& cfg) {
  const auto refs = match_items(references, cfg);
  std::vector<long> first(references.size(), -1);
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (samples[t].failed) continue;
    bool pending = false;
    for (long f : first) pending |= (f < 0);
    if (!pending) break;
    const MatchItem item = match_item(samples[t].structure, samples[t].energy_per_atom, cfg);
    for (std::size_t r = 0; r < refs.size(); ++r)
      if (first[r] < 0 && items_match(item, refs[r], cfg)) first[r] = static_cast<long>(t);
  }
  return first;
}

inline double coverage(const std::vector<Sample>& samples, const std::vector<Sample>& references,
                       const MatcherConfig& cfg) {
  if (references.empty()) throw ValidationError("coverage: empty reference set");
  const auto first = first_matches(samples, references, cfg);
  const auto hit = std::count_if(first.begin(), first.end(), [](long f) { return f >= 0; });
  return static_cast<double>(hit) / static_cast<double>(references.size());
}

struct Efficiency {
  double mean_energy = std::numeric_limits<double>::quiet_NaN();
  double low_energy_fraction = 0.0;
};

/// Mean energy over samples that have one; the low-energy fraction counts
/// every sample (failed ones never qualify).
inline Efficiency efficiency(const std::vector<Sample>& samples, const std::vector<Sample>& references,
                             double threshold = 0.1) {
  double emin = std::numeric_limits<double>::infinity();
  for (const auto& r : references)
    if (r.energy_per_atom) emin = std::min(emin, *r.energy_per_atom);
  Efficiency e;
  double sum = 0.0;
  std::size_t with_energy = 0, low = 0;
  for (const auto& s : samples) {
    if (s.failed || !s.energy_per_atom) continue;
    sum += *s.energy_per_atom;
    ++with_energy;
    if (*s.energy_per_atom <= emin + threshold) ++low;
  }
  if (with_energy > 0) e.mean_energy = sum / static_cast<double>(with_energy);
  if (!samples.empty()) e.low_energy_fraction = static_cast<double>(low) / static_cast<double>(samples.size());
  return e;
}

/// Trials needed until every reference is matched, over |references|; +inf
/// when the stream never covers the set.
inline double budget_to_solve(const std::vector<Sample>& stream, const std::vector<Sample>& references,
                              const MatcherConfig& cfg) {
  if (references.empty()) throw ValidationError("budget_to_solve: empty reference set");
  const auto first = first_matches(stream, references, cfg);
  long last = -1;
  for (long f : first) {
    if (f < 0) return std::numeric_limits<double>::infinity();
    last = std::max(last, f);
  }
  return static_cast<double>(last + 1) / static_cast<double>(references.size());
}

/// Fraction of systems solved within each budget of the grid.
inline std::vector<std::pair<double, double>> solved_fraction_curve(const std::vector<double>& budgets,
                                                                    const std::vector<double>& grid) {
  if (budgets.empty()) throw ValidationError("solved_fraction_curve: no systems");
  std::vector<std::pair<double, double>> curve;
  for (double b : grid) {
    const auto solved = std::count_if(budgets.begin(), budgets.end(), [&](double x) { return x <= b; });
    curve.emplace_back(b, static_cast<double>(solved) / static_cast<double>(budgets.size()));
  }
  return curve;
}

/// Per-system budgets, then the curve; campaigns[k] is scored against references[k].
inline std::vector<std::pair<double, double>> solved_fraction_curve(
    const std::vector<std::vector<Sample>>& campaigns,
    const std::vector<std::vector<Sample>>& references, const std::vector<double>& grid,
    const MatcherConfig& cfg) {
  if (campaigns.size() != references.size())
    throw ValidationError("solved_fraction_curve: one reference set per campaign");
  std::vector<double> budgets;
  for (std::size_t k = 0; k < campaigns.size(); ++k)
    budgets.push_back(budget_to_solve(campaigns[k], references[k], cfg));
  return solved_fraction_curve(budgets, grid);
}

/// Distinct structures: keeps the first of every matching group.
inline std::vector<std::size_t> deduplicate(const std::vector<Sample>& xs, const MatcherConfig& cfg) {
  std::vector<std::size_t> keep;
  std::vector<MatchItem> kept;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const MatchItem item = match_item(xs[t].structure, xs[t].energy_per_atom, cfg);
    bool dup = false;
    for (const auto& k : kept)
      if (items_match(item, k, cfg)) {
        dup = true;
        break;
      }
    if (!dup) {
      keep.push_back(t);
      kept.push_back(item);
    }
  }
  return keep;
}

// ---- two-torsion analysis ----

inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0) a += two_pi;
  return a - std::numbers::pi;
}

struct TorsionMode {
  double phi = 0.0, psi = 0.0;  // radians in [0, 2 pi)
  double energy = 0.0;
};

/// Nearest mode under the wrapped angular distance; ties go to the lower index.
inline std::size_t assign_mode(double phi, double psi, const std::vector<TorsionMode>& modes) {
  if (modes.empty()) throw ValidationError("assign_mode: no modes");
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const double dp = wrap_angle(phi - modes[m].phi), ds = wrap_angle(psi - modes[m].psi);
    const double d = dp * dp + ds * ds;
    if (d < bestd) {
      bestd = d;
      best = m;
    }
  }
  return best;
}

/// Local minima of the torsion surface: grid local minima refined by
/// gradient descent, deduplicated, ordered by half-plane of (phi, psi) in [0, 2 pi).
inline std::vector<TorsionMode> torsion_modes(const TorsionModel& model, int grid = 72) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto V = [&](int a, int b) {
    return model.surface(two_pi * ((a + grid) % grid) / grid, two_pi * ((b + grid) % grid) / grid);
  };
  std::vector<TorsionMode> out;
  for (int a = 0; a < grid; ++a)
    for (int b = 0; b < grid; ++b) {
      const double v = V(a, b);
      bool local = true;
      for (int da = -1; da <= 1 && local; ++da)
        for (int db = -1; db <= 1; ++db)
          if ((da || db) && V(a + da, b + db) < v) {
            local = false;
            break;
          }
      if (!local) continue;
      double phi = two_pi * a / grid, psi = two_pi * b / grid;
      for (int it = 0; it < 20000; ++it) {
        const auto [gp, gs] = model.surface_gradient(phi, psi);
        if (std::hypot(gp, gs) < 1e-12) break;
        phi -= 0.5 * gp;
        psi -= 0.5 * gs;
      }
      phi = wrap_angle(phi - std::numbers::pi) + std::numbers::pi;
      psi = wrap_angle(psi - std::numbers::pi) + std::numbers::pi;
      bool dup = false;
      for (const auto& m : out)
        if (std::hypot(wrap_angle(m.phi - phi), wrap_angle(m.psi - psi)) < 1e-4) dup = true;
      if (!dup) out.push_back({phi, psi, model.surface(phi, psi)});
    }
  // Half-plane first so the labels follow the basins, not the small shifts of
  // each minimum: (phi < pi, psi < pi), (phi < pi, psi >= pi), ...
  std::sort(out.begin(), out.end(), [](const TorsionMode& x, const TorsionMode& y) {
    const auto key = [](const TorsionMode& m) {
      return std::tuple(m.phi >= std::numbers::pi, m.psi >= std::numbers::pi, m.phi, m.psi);
    };
    return key(x) < key(y);
  });
  return out;
}

struct BoltzmannGrid {
  int resolution = 0;
  std::vector<double> angles;           // cell centres, radians in [0, 2 pi)
  std::vector<std::vector<double>> p;   // p[a][b] at (angles[a], angles[b]); sums to 1
};

inline BoltzmannGrid boltzmann_grid(const std::function<double(double, double)>& V, double T,
                                    int resolution) {
  if (!(T > 0.0)) throw ValidationError("boltzmann_grid: T must be > 0");
  if (resolution < 16) throw ValidationError("boltzmann_grid: resolution must be >= 16");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  BoltzmannGrid g;
  g.resolution = resolution;
  for (int a = 0; a < resolution; ++a) g.angles.push_back(two_pi * (a + 0.5) / resolution);
  std::vector<std::vector<double>> e(resolution, std::vector<double>(resolution));
  double emin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < resolution; ++a)
    for (int b = 0; b < resolution; ++b) {
      e[a][b] = V(g.angles[a], g.angles[b]);
      emin = std::min(emin, e[a][b]);
    }
  const double kT = kBoltzmann * T;
  g.p.assign(resolution, std::vector<double>(resolution));
  double z = 0.0;
  for (int a = 0; a < resolution; ++a)
    for (int b = 0; b < resolution; ++b) z += g.p[a][b] = std::exp(-(e[a][b] - emin) / kT);
  for (auto& row : g.p)
    for (double& x : row) x /= z;
  return g;
}

inline BoltzmannGrid boltzmann_grid(const TorsionModel& model, double T, int resolution) {
  return boltzmann_grid([&](double phi, double psi) { return model.surface(phi, psi); }, T, resolution);
}

/// Boltzmann mass of the basin of each mode (cells assigned by assign_mode).
inline std::vector<double> mode_masses(const BoltzmannGrid& g, const std::vector<TorsionMode>& modes) {
  std::vector<double> mass(modes.size(), 0.0);
  for (int a = 0; a < g.resolution; ++a)
    for (int b = 0; b < g.resolution; ++b) mass[assign_mode(g.angles[a], g.angles[b], modes)] += g.p[a][b];
  return mass;
}

}  // namespace structsearch
