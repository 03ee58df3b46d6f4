#pragma once

// Pre-registered experiment suites. Each one writes a bundle of CSV / JSONL
// files that depends only on the options (never on timing or thread count)
// and returns the numbers the acceptance checks read.
//
//   pareto_toy       coverage / low-energy fraction, lj4 + lj8, three methods
//   budget_toy       budget to solve and solved-fraction curves, same systems
//   torsion_fig4     mode occupation of diffusion vs gss on the torsion toy
//   gradient_checks  analytic vs finite-difference crystal gradients
//   limit_checks     alpha = 1 / alpha = 0 limits and Langevin stationarity

#include "structsearch/io.hpp"
#include "structsearch/systems.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

namespace structsearch {

namespace fs = std::filesystem;

struct SuiteOptions {
  fs::path out_dir;
  fs::path data_dir;                  // reference fixtures; missing files are rebuilt
  std::uint64_t root_seed = 1;        // campaign seeds: root_seed, root_seed + 1, ...
  std::size_t trials = 0;             // 0: suite default
  int seeds = 0;                      // 0: suite default
  unsigned threads = 0;
  std::vector<std::string> systems;   // empty: suite default
};

inline std::vector<std::string> suite_names() {
  return {"pareto_toy", "budget_toy", "torsion_fig4", "gradient_checks", "limit_checks"};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Writes text to path, creating parent directories.
inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

// ---- references and campaign settings ----

inline std::vector<StructureRecord> build_references(const System& sys, std::size_t trials,
                                                     std::uint64_t seed, unsigned threads,
                                                     RssCampaignResult* stats = nullptr) {
  SeedSpec spec = sys.seeds;
  spec.rng_seed = seed;
  RssCampaignResult r = rss_campaign(spec, *sys.potential, sys.relax, trials, sys.matcher, threads);
  if (r.empty) throw Error(sys.name + ": reference campaign left no survivors");
  std::vector<StructureRecord> out;
  for (std::size_t k = 0; k < r.structures.size(); ++k) {
    StructureRecord rec{r.structures[k].structure, r.structures[k].energy_per_atom, json::object()};
    rec.meta["system"] = sys.name;
    rec.meta["e_hull"] = r.e_hull[k];
    rec.meta["relax_steps"] = r.structures[k].steps_used;
    rec.meta["max_force"] = r.structures[k].max_force_final;
    out.push_back(std::move(rec));
  }
  if (stats) *stats = std::move(r);
  return out;
}

inline fs::path reference_path(const fs::path& data_dir, const std::string& system) {
  return data_dir / (system + "_reference.jsonl");
}

/// Fixture if present, otherwise the oracle campaign at the system's budget.
inline std::vector<Sample> system_references(const System& sys, const SuiteOptions& o) {
  if (!o.data_dir.empty() && fs::exists(reference_path(o.data_dir, sys.name)))
    return to_samples(read_jsonl(reference_path(o.data_dir, sys.name).string()));
  return to_samples(build_references(sys, sys.reference_trials, sys.reference_seed, o.threads));
}

inline CampaignSettings campaign_settings(const System& sys, const std::vector<Sample>& refs,
                                          unsigned threads) {
  CampaignSettings cs;
  cs.potential = sys.potential;
  cs.species = sys.species;
  cs.periodic = sys.periodic;
  cs.seeds = sys.seeds;
  cs.schedule = sys.schedule;
  cs.guidance = sys.guidance;
  cs.relax = sys.relax;
  cs.threads = threads;
  if (!refs.empty() || sys.training_override)
    cs.field = std::make_shared<ScoreField>(sys.training(refs), sys.schedule);
  return cs;
}

inline json alpha_schedule_meta(const GuidanceConfig& g) {
  json a;
  a["t_mid"] = g.t_mid;
  a["t_scale"] = g.t_scale;
  a["override"] = g.alpha_override ? json(*g.alpha_override) : json(nullptr);
  return a;
}

inline std::vector<StructureRecord> to_structure_records(const std::vector<SearchRecord>& recs,
                                                         const CampaignSettings& cs) {
  std::vector<StructureRecord> out;
  out.reserve(recs.size());
  for (const auto& r : recs) {
    StructureRecord s = to_structure_record(r);
    if (r.method == "gss") s.meta["alpha_schedule"] = alpha_schedule_meta(cs.guidance);
    out.push_back(std::move(s));
  }
  return out;
}

/// Records per (system, method, seed), grown on demand. Trials are
/// independent, so a grown prefix equals the same prefix of a longer run.
class CampaignStore {
 public:
  const std::vector<SearchRecord>& at_least(const std::string& system, const CampaignSettings& base,
                                            Method m, std::uint64_t seed, std::size_t trials) {
    auto& recs = store_[{system, method_name(m), seed}];
    if (recs.size() < trials) {
      CampaignSettings cs = base;
      cs.root_seed = seed;
      auto more = batch_campaign_range(m, cs, recs.size(), trials);
      recs.insert(recs.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    }
    return recs;
  }

 private:
  std::map<std::tuple<std::string, std::string, std::uint64_t>, std::vector<SearchRecord>> store_;
};

inline std::vector<Sample> prefix_samples(const std::vector<SearchRecord>& recs, std::size_t n) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n && k < recs.size(); ++k) out.push_back(as_sample(recs[k]));
  return out;
}

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m = {Method::rss, Method::diffusion, Method::gss};
  return m;
}

// ---- pareto_toy ----

struct ParetoResult {
  std::vector<SummaryRow> rows;
  double median_of(const std::string& system, const std::string& method,
                   double SummaryRow::*field) const {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.system == system && r.method == method) v.push_back(r.*field);
    return median(v);
  }
};

inline ParetoResult pareto_toy(const SuiteOptions& o, CampaignStore* shared = nullptr) {
  CampaignStore local;
  CampaignStore& store = shared ? *shared : local;
  const std::size_t trials = o.trials ? o.trials : 1024;
  const int seeds = o.seeds ? o.seeds : 3;
  const auto systems = o.systems.empty() ? std::vector<std::string>{"lj4", "lj8"} : o.systems;
  ParetoResult res;
  for (const auto& name : systems) {
    const System sys = make_system(name);
    const auto refs = system_references(sys, o);
    const CampaignSettings cs = campaign_settings(sys, refs, o.threads);
    {
      std::vector<StructureRecord> rr;
      for (const auto& r : refs) rr.push_back({r.structure, r.energy_per_atom, json::object()});
      auto os = open_out(o.out_dir / ("references_" + name + ".jsonl"));
      write_jsonl(os, rr);
    }
    for (Method m : all_methods())
      for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = o.root_seed + static_cast<std::uint64_t>(k);
        const auto& recs = store.at_least(name, cs, m, seed, trials);
        const auto samples = prefix_samples(recs, trials);
        const std::vector<SearchRecord> used(recs.begin(), recs.begin() + static_cast<long>(trials));
        auto os = open_out(o.out_dir / "samples" / (name + "_" + method_name(m) + "_s" + std::to_string(seed) + ".jsonl"));
        write_jsonl(os, to_structure_records(used, cs));
        SummaryRow row;
        row.system = name;
        row.method = method_name(m);
        row.seed = seed;
        row.trials = trials;
        row.coverage = coverage(samples, refs, sys.matcher);
        const Efficiency e = efficiency(samples, refs);
        row.mean_energy = e.mean_energy;
        row.low_energy_fraction = e.low_energy_fraction;
        row.budget_cost = budget_to_solve(samples, refs, sys.matcher);
        row.solved = std::isfinite(row.budget_cost);
        res.rows.push_back(row);
      }
  }
  auto os = open_out(o.out_dir / "summary.csv");
  os << kSummaryHeader << '\n';
  for (const auto& r : res.rows) os << summary_csv_line(r) << '\n';
  auto pm = open_out(o.out_dir / "pareto.csv");
  pm << "system,method,median_coverage,median_low_energy_fraction,median_mean_energy\n";
  for (const auto& name : systems)
    for (Method m : all_methods())
      pm << name << ',' << method_name(m) << ','
         << csv_number(res.median_of(name, method_name(m), &SummaryRow::coverage)) << ','
         << csv_number(res.median_of(name, method_name(m), &SummaryRow::low_energy_fraction)) << ','
         << csv_number(res.median_of(name, method_name(m), &SummaryRow::mean_energy)) << '\n';
  return res;
}

// ---- budget_toy ----

struct BudgetRow {
  std::string system, method;
  std::uint64_t seed = 0;
  double budget = 0.0;
  std::size_t trials_run = 0;
};

struct BudgetResult {
  std::vector<BudgetRow> rows;
  double median_budget(const std::string& system, const std::string& method) const {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.system == system && r.method == method) v.push_back(r.budget);
    return median(v);
  }
};

/// Normalised budgets at which the solved fraction is reported.
inline std::vector<double> budget_grid() {
  return {1, 1.5, 2, 3, 5, 7, 10, 15, 20, 30, 50, 70, 100, 150, 200, 300, 500, 1000};
}

inline BudgetResult budget_toy(const SuiteOptions& o, CampaignStore* shared = nullptr) {
  CampaignStore local;
  CampaignStore& store = shared ? *shared : local;
  const std::size_t cap = o.trials ? o.trials : 1024;
  const int seeds = o.seeds ? o.seeds : 5;
  const std::size_t chunk = 32;
  const auto systems = o.systems.empty() ? std::vector<std::string>{"lj4", "lj8"} : o.systems;
  BudgetResult res;
  for (const auto& name : systems) {
    const System sys = make_system(name);
    const auto refs = system_references(sys, o);
    const CampaignSettings cs = campaign_settings(sys, refs, o.threads);
    for (Method m : all_methods())
      for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = o.root_seed + static_cast<std::uint64_t>(k);
        // Grow in chunks and stop once solved; the budget of a solved prefix
        // is the budget of every longer stream.
        std::size_t n = 0;
        double b = std::numeric_limits<double>::infinity();
        while (n < cap && std::isinf(b)) {
          n = std::min(cap, n + chunk);
          b = budget_to_solve(prefix_samples(store.at_least(name, cs, m, seed, n), n), refs, sys.matcher);
        }
        res.rows.push_back({name, method_name(m), seed, b, n});
      }
  }
  auto os = open_out(o.out_dir / "budgets.csv");
  os << "system,method,seed,budget_cost,trials_run\n";
  for (const auto& r : res.rows)
    os << r.system << ',' << r.method << ',' << r.seed << ',' << csv_number(r.budget) << ',' << r.trials_run << '\n';
  auto med = open_out(o.out_dir / "median_budgets.csv");
  med << "system,method,median_budget_cost\n";
  for (const auto& name : systems)
    for (Method m : all_methods())
      med << name << ',' << method_name(m) << ',' << csv_number(res.median_budget(name, method_name(m))) << '\n';
  // Fraction of systems solved vs budget, one curve per method and seed.
  auto cv = open_out(o.out_dir / "solved_fraction.csv");
  cv << "method,seed,budget,fraction_solved\n";
  for (Method m : all_methods())
    for (int k = 0; k < seeds; ++k) {
      const std::uint64_t seed = o.root_seed + static_cast<std::uint64_t>(k);
      std::vector<double> per_system;
      for (const auto& r : res.rows)
        if (r.method == method_name(m) && r.seed == seed) per_system.push_back(r.budget);
      for (const auto& [b, f] : solved_fraction_curve(per_system, budget_grid()))
        cv << method_name(m) << ',' << seed << ',' << csv_number(b) << ',' << csv_number(f) << '\n';
    }
  return res;
}

// ---- torsion_fig4 ----

struct TorsionCounts {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts;  // per mode
  std::size_t failed = 0;
};

struct TorsionResult {
  std::vector<TorsionMode> modes;
  std::vector<double> boltzmann_masses;
  std::vector<TorsionCounts> runs;
};

inline TorsionResult torsion_fig4(const SuiteOptions& o) {
  const std::size_t trials = o.trials ? o.trials : 1024;
  const int seeds = o.seeds ? o.seeds : 5;
  const System sys = make_system("torsion");
  const auto model = std::dynamic_pointer_cast<const TorsionModel>(sys.potential);
  TorsionResult res;
  res.modes = torsion_modes(*model);
  const BoltzmannGrid grid = boltzmann_grid(*model, kReferenceTemperature, 360);
  res.boltzmann_masses = mode_masses(grid, res.modes);

  auto mo = open_out(o.out_dir / "modes.csv");
  mo << "mode,phi,psi,energy,boltzmann_mass\n";
  for (std::size_t k = 0; k < res.modes.size(); ++k)
    mo << 'M' << k + 1 << ',' << csv_number(res.modes[k].phi) << ',' << csv_number(res.modes[k].psi) << ','
       << csv_number(res.modes[k].energy) << ',' << csv_number(res.boltzmann_masses[k]) << '\n';
  {
    const BoltzmannGrid coarse = boltzmann_grid(*model, kReferenceTemperature, 72);
    auto gd = open_out(o.out_dir / "boltzmann_grid.csv");
    gd << "phi,psi,density\n";
    for (int a = 0; a < coarse.resolution; ++a)
      for (int b = 0; b < coarse.resolution; ++b)
        gd << csv_number(coarse.angles[a]) << ',' << csv_number(coarse.angles[b]) << ','
           << csv_number(coarse.p[a][b]) << '\n';
  }

  const CampaignSettings cs = campaign_settings(sys, {}, o.threads);
  auto dh = open_out(o.out_dir / "dihedrals.csv");
  dh << "method,seed,trial,phi,psi,mode\n";
  for (Method m : {Method::diffusion, Method::gss})
    for (int k = 0; k < seeds; ++k) {
      CampaignSettings c = cs;
      c.root_seed = o.root_seed + static_cast<std::uint64_t>(k);
      const auto recs = batch_campaign(m, c, trials);
      TorsionCounts tc{method_name(m), c.root_seed, std::vector<std::size_t>(res.modes.size(), 0), 0};
      for (const auto& r : recs) {
        if (r.failed) {
          ++tc.failed;
          dh << tc.method << ',' << tc.seed << ',' << r.trial << ",nan,nan,failed\n";
          continue;
        }
        const auto [phi, psi] = model->dihedrals(r.structure);
        const std::size_t mode = assign_mode(phi, psi, res.modes);
        ++tc.counts[mode];
        dh << tc.method << ',' << tc.seed << ',' << r.trial << ',' << csv_number(phi) << ','
           << csv_number(psi) << ",M" << mode + 1 << '\n';
      }
      res.runs.push_back(std::move(tc));
    }
  auto mc = open_out(o.out_dir / "mode_counts.csv");
  mc << "method,seed";
  for (std::size_t k = 0; k < res.modes.size(); ++k) mc << ",M" << k + 1;
  mc << ",failed\n";
  for (const auto& r : res.runs) {
    mc << r.method << ',' << r.seed;
    for (auto c : r.counts) mc << ',' << c;
    mc << ',' << r.failed << '\n';
  }
  return res;
}

// ---- gradient_checks ----

namespace detail {

/// Smallest |r - rc| over all pair distances (images included).
inline double cutoff_gap(const Structure& s, double rc) {
  const Mat3& L = s.lattice();
  const Mat3 inv = L.inverse();
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < s.size(); ++j)
    for (std::size_t k = j; k < s.size(); ++k) {
      const Vec3 f = (s.positions().row(static_cast<Eigen::Index>(k)) -
                      s.positions().row(static_cast<Eigen::Index>(j))).transpose();
      for_each_image(L, inv, f, rc + 1.0, [&](const Vec3&, double r2, int, int, int) {
        if (r2 > 0.0) gap = std::min(gap, std::abs(std::sqrt(r2) - rc));
      });
    }
  return gap;
}

}  // namespace detail

struct GradientCheckResult {
  double max_frac_error = 0.0;
  double max_lattice_error = 0.0;
  double max_total_stress_error = 0.0;
  std::size_t configurations = 0;
};

inline GradientCheckResult gradient_checks(const SuiteOptions& o) {
  const std::size_t count = o.trials ? o.trials : 50;
  const System sys = make_system("lj4");
  GradientCheckResult res;
  res.configurations = count;
  const double rc = 2.5 * kToySigma;
  auto os = open_out(o.out_dir / "gradient_checks.csv");
  os << "config,atoms,frac_rel_err,lattice_rel_err,total_stress_rel_err\n";
  for (std::size_t t = 0; t < count; ++t) {
    SeedSpec spec = sys.seeds;
    const int n = 4 + static_cast<int>(t % 9);
    spec.composition = {{"Ar", n}};
    spec.volume_min = 18.0;
    spec.volume_max = 30.0;
    spec.min_separation = 2.0;
    spec.rng_seed = o.root_seed;
    // The shifted potential has a force jump at the cutoff. A pair sitting
    // within a step of it makes central differences meaningless, so such
    // draws are replaced.
    Structure s = random_seed_structure(spec, t);
    for (std::uint64_t redraw = 1; detail::cutoff_gap(s, rc) < 1e-3; ++redraw)
      s = random_seed_structure(spec, t + redraw * count);
    const PotentialReport rep = sys.potential->evaluate(s);
    const FiniteDifferenceResult fd = finite_difference_oracle(*sys.potential, s, 1e-5);
    const Mat3 gl = lattice_gradient_from_virial(s, *rep.virial);
    const double ef = relative_error(frac_gradient(s, rep), *fd.frac_grad);
    const double el = relative_error(gl, *fd.lattice_grad);
    const double et = relative_error(lattice_gradient_from_total(s, virial_to_total_stress(s, rep), rep.forces), gl);
    res.max_frac_error = std::max(res.max_frac_error, ef);
    res.max_lattice_error = std::max(res.max_lattice_error, el);
    res.max_total_stress_error = std::max(res.max_total_stress_error, et);
    os << t << ',' << n << ',' << csv_number(ef) << ',' << csv_number(el) << ',' << csv_number(et) << '\n';
  }
  auto sm = open_out(o.out_dir / "summary.txt");
  sm << "max_rel_err " << csv_number(std::max(res.max_frac_error, res.max_lattice_error)) << '\n'
     << "max_total_stress_rel_err " << csv_number(res.max_total_stress_error) << '\n';
  return res;
}

// ---- limit_checks ----

struct LimitCheckResult {
  std::size_t diffusion_mismatched_steps = 0;  // alpha = 1 vs plain diffusion
  std::size_t diffusion_steps = 0;
  double descent_crystal_deviation = 0.0;      // alpha = 0 vs steepest descent, max per step
  double descent_molecule_deviation = 0.0;
  double langevin_tv = 1.0;                    // histogram vs Boltzmann
  std::size_t langevin_steps = 0;
};

namespace detail {

inline Structure toy_fcc4(double jitter, Rng& rng) {
  const double a = kToySigma * std::pow(2.0, 1.0 / 6.0) * std::numbers::sqrt2;
  Coords x(4, 3);
  x << 0, 0, 0, 0.5, 0.5, 0, 0.5, 0, 0.5, 0, 0.5, 0.5;
  for (Eigen::Index j = 0; j < 4; ++j)
    for (int c = 0; c < 3; ++c) x(j, c) += jitter * rng.uniform(-1.0, 1.0);
  Mat3 L = a * Mat3::Identity();
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) L(p, q) += jitter * a * rng.uniform(-1.0, 1.0);
  return Structure::crystal({"Ar", "Ar", "Ar", "Ar"}, wrap_fractional(x), L);
}

inline double wrapped_deviation(const Structure& a, const Structure& b) {
  Coords d = a.positions() - b.positions();
  if (a.periodic()) {
    for (Eigen::Index j = 0; j < d.rows(); ++j)
      for (int k = 0; k < 3; ++k) d(j, k) -= std::round(d(j, k));
  }
  double m = d.cwiseAbs().maxCoeff();
  if (a.periodic()) m = std::max(m, (a.lattice() - b.lattice()).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace detail

/// alpha == 0 at a fixed noise level on the 1-D double well; returns the
/// total-variation distance of the x histogram from exp(-V / k T).
inline double langevin_stationarity(std::size_t steps, std::uint64_t seed, const fs::path& histogram_csv = {}) {
  const DoubleWell1D well(0.05, 1.0, 1.0);
  const double beta = 1e-3;
  const NoiseSchedule sch = NoiseSchedule::constant(static_cast<int>(steps), beta);
  GuidanceConfig g;
  g.alpha_override = 0.0;
  Rng rng = Rng::substream(seed, Stream::sampler, 0);
  Coords r = Coords::Zero(1, 3);
  const Structure init = Structure::molecule({"X"}, r);
  const int bins = 60;
  const double lo = -2.0, hi = 2.0, w = (hi - lo) / bins;
  std::vector<double> hist(bins, 0.0);
  const std::size_t burn = steps / 100;
  double kept = 0.0;
  gss_trajectory(init, nullptr, well, sch, g, rng, nullptr, [&](int i, const Structure& s) {
    if (static_cast<std::size_t>(i) < burn) return;
    const double x = s.positions()(0, 0);
    kept += 1.0;
    const int b = static_cast<int>(std::floor((x - lo) / w));
    if (b >= 0 && b < bins) hist[b] += 1.0;
  });
  // Analytic bin masses by fine quadrature over a range wide enough to hold
  // all the mass; probability outside [lo, hi] counts as its own bin.
  const double kT = kBoltzmann * kReferenceTemperature;
  const int sub = 200;
  std::vector<double> exact(bins, 0.0);
  double z = 0.0, inside = 0.0;
  for (int k = 0; k < 8 * bins * sub; ++k) {
    const double x = -8.0 + (k + 0.5) * (16.0 / (8 * bins * sub));
    const double p = std::exp(-well.energy_x(x) / kT);
    z += p;
    const int b = static_cast<int>(std::floor((x - lo) / w));
    if (b >= 0 && b < bins) exact[b] += p, inside += p;
  }
  double in_emp = 0.0, tv = 0.0;
  for (int b = 0; b < bins; ++b) {
    exact[b] /= z;
    hist[b] /= kept;
    in_emp += hist[b];
    tv += std::abs(hist[b] - exact[b]);
  }
  tv += std::abs((1.0 - in_emp) - (1.0 - inside / z));
  tv *= 0.5;
  if (!histogram_csv.empty()) {
    auto os = open_out(histogram_csv);
    os << "x,empirical,boltzmann\n";
    for (int b = 0; b < bins; ++b)
      os << csv_number(lo + (b + 0.5) * w) << ',' << csv_number(hist[b] / w) << ',' << csv_number(exact[b] / w) << '\n';
  }
  return tv;
}

inline LimitCheckResult limit_checks(const SuiteOptions& o) {
  LimitCheckResult res;
  const System sys = make_system("lj4");
  const NoiseSchedule& sch = sys.schedule;
  Rng setup = Rng::substream(o.root_seed, Stream::test, 0);

  // alpha = 1: the guided sampler must replay plain diffusion bit for bit.
  {
    const ScoreField field({{detail::toy_fcc4(0.0, setup)}, {}}, sch);
    GuidanceConfig g;
    g.alpha_override = 1.0;
    for (std::uint64_t t = 0; t < 3; ++t) {
      Rng r1 = Rng::substream(o.root_seed, Stream::sampler, t), r2 = r1;
      const Structure init = sample_prior(sys.species, true, sch, r1);
      (void)sample_prior(sys.species, true, sch, r2);
      std::vector<Structure> guided;
      gss_trajectory(init, &field, *sys.potential, sch, g, r1, nullptr,
                     [&](int, const Structure& s) { guided.push_back(s); });
      const auto plain = reverse_sample(init, field, r2);
      res.diffusion_steps += plain.size();
      for (std::size_t k = 0; k < plain.size(); ++k)
        if (k >= guided.size() || !(guided[k].positions() == plain[k].positions()) ||
            !(guided[k].lattice() == plain[k].lattice()))
          ++res.diffusion_mismatched_steps;
    }
  }

  // alpha = 0 without noise: steepest descent with h_X = lambda_frac g_i^2,
  // h_L = lambda_lattice beta_i c^2 (molecules: lambda beta_i). The clip and
  // the drift cap are switched off; the check is about the step mapping.
  GuidanceConfig g;
  g.alpha_override = 0.0;
  g.inject_noise = false;
  g.drift_cap.reset();
  g.force_clip = 1e9;
  g.lambda_frac = 0.5;
  g.lambda_lattice = 0.01;
  g.lambda_molecular = 1.0;
  {
    const Structure init = detail::toy_fcc4(0.02, setup);
    std::vector<Structure> traj;
    Rng rng = Rng::substream(o.root_seed, Stream::sampler, 100);
    gss_trajectory(init, nullptr, *sys.potential, sch, g, rng, nullptr,
                   [&](int, const Structure& s) { traj.push_back(s); });
    const double c2 = std::pow(sch.lattice_scale(4), 2);
    Structure sd = init;
    for (int i = 0; i < sch.steps(); ++i) {
      sd = steepest_descent_step(sd, *sys.potential, g.lambda_frac * sch.ve_variance(i),
                                 g.lambda_lattice * sch.beta(i) * c2);
      res.descent_crystal_deviation =
          std::max(res.descent_crystal_deviation, detail::wrapped_deviation(traj[i + 1], sd));
    }
  }
  {
    const System dimer = make_system("lj-dimer");
    Coords r(3, 3);
    r << 0, 0, 0, 2.9, 0.1, 0, 1.3, 2.4, 0.2;
    const Structure init = Structure::molecule({"Ar", "Ar", "Ar"}, r);
    std::vector<Structure> traj;
    Rng rng = Rng::substream(o.root_seed, Stream::sampler, 101);
    gss_trajectory(init, nullptr, *dimer.potential, sch, g, rng, nullptr,
                   [&](int, const Structure& s) { traj.push_back(s); });
    Structure sd = init;
    for (int i = 0; i < sch.steps(); ++i) {
      sd = steepest_descent_step(sd, *dimer.potential, g.lambda_molecular * sch.beta(i));
      res.descent_molecule_deviation =
          std::max(res.descent_molecule_deviation, detail::wrapped_deviation(traj[i + 1], sd));
    }
  }

  res.langevin_steps = o.trials ? o.trials : 1000000;
  res.langevin_tv = langevin_stationarity(res.langevin_steps, o.root_seed, o.out_dir / "langevin_histogram.csv");

  auto os = open_out(o.out_dir / "limit_checks.csv");
  os << "check,value\n"
     << "alpha1_mismatched_steps," << res.diffusion_mismatched_steps << '\n'
     << "alpha1_steps_compared," << res.diffusion_steps << '\n'
     << "alpha0_crystal_max_deviation," << csv_number(res.descent_crystal_deviation) << '\n'
     << "alpha0_molecule_max_deviation," << csv_number(res.descent_molecule_deviation) << '\n'
     << "langevin_steps," << res.langevin_steps << '\n'
     << "langevin_total_variation," << csv_number(res.langevin_tv) << '\n';
  return res;
}

/// Dispatch by name; throws ConfigError for an unknown suite.
inline void run_suite(const std::string& name, const SuiteOptions& o) {
  if (name == "pareto_toy") pareto_toy(o);
  else if (name == "budget_toy") budget_toy(o);
  else if (name == "torsion_fig4") torsion_fig4(o);
  else if (name == "gradient_checks") gradient_checks(o);
  else if (name == "limit_checks") limit_checks(o);
  else throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace structsearch
