#pragma once

// Named toy systems used by the CLI and the experiment suites.

#include "structsearch/campaign.hpp"
#include "structsearch/lennard_jones.hpp"
#include "structsearch/model_potentials.hpp"

#include <memory>
#include <string>
#include <vector>

namespace structsearch {

/// Lennard-Jones scale shared by all LJ toys (argon-like shape, eV energies).
inline constexpr double kToyEpsilon = 1.0;  // eV
inline constexpr double kToySigma = 2.5;    // A

struct System {
  std::string name;
  PotentialPtr potential;
  std::vector<std::string> species;
  bool periodic = false;
  SeedSpec seeds;
  MatcherConfig matcher;
  RelaxConfig relax;
  NoiseSchedule schedule = NoiseSchedule::standard();
  GuidanceConfig guidance = GuidanceConfig::for_steps(1000);
  std::size_t reference_trials = 4096;  // oracle budget
  std::uint64_t reference_seed = 12345;

  /// Training set built from the system's reference structures (sorted by
  /// energy). Default: the lowest-energy reference only.
  TrainingSet training(const std::vector<Sample>& references) const {
    if (training_override) return training_override(references);
    if (references.empty()) throw ValidationError(name + ": no references to train on");
    return TrainingSet{{references.front().structure}, {}};
  }
  std::function<TrainingSet(const std::vector<Sample>&)> training_override;
};

inline PotentialPtr toy_lj(bool periodic) {
  LJOptions o;
  o.defaults = {kToyEpsilon, kToySigma};
  o.cutoff_factor = 2.5;
  o.shift = true;
  o.cutoff_nonperiodic = false;
  (void)periodic;
  return std::make_shared<LennardJones>(o);
}

inline System lj_periodic_system(const std::string& name, int atoms) {
  System s;
  s.name = name;
  s.potential = toy_lj(true);
  s.species.assign(atoms, "Ar");
  s.periodic = true;
  s.seeds.composition = {{"Ar", atoms}};
  s.matcher.cutoff = 2.0 * 2.5 * kToySigma;
  // Eight times the 1024-trial campaigns the methods are judged on.
  s.reference_trials = 8192;
  return s;
}

inline System lj_dimer_system() {
  System s;
  s.name = "lj-dimer";
  s.potential = toy_lj(false);
  s.species = {"Ar", "Ar"};
  s.periodic = false;
  s.seeds.composition = {{"Ar", 2}};
  s.seeds.periodic = false;
  s.matcher.cutoff = 2.0 * 2.5 * kToySigma;
  s.reference_trials = 64;
  return s;
}

inline System double_well_1d_system() {
  System s;
  s.name = "dw1";
  s.potential = std::make_shared<DoubleWell1D>(0.05, 1.0, 1.0);
  s.species = {"X"};
  s.periodic = false;
  s.seeds.composition = {{"X", 1}};
  s.seeds.periodic = false;
  s.seeds.volume_min = 1.0;
  s.seeds.volume_max = 8.0;
  s.matcher.cutoff = 1.0;
  s.reference_trials = 256;
  return s;
}

inline System double_well_2d_system() {
  System s = double_well_1d_system();
  s.name = "dw2";
  s.potential = std::make_shared<DoubleWell2D>();
  return s;
}

/// Training set for the torsion system: the template molecule at one mode.
inline TrainingSet torsion_training(const TorsionModel& model, std::size_t mode) {
  const auto modes = torsion_modes(model);
  if (mode >= modes.size()) throw ValidationError("torsion: mode index out of range");
  return TrainingSet{{model.build(modes[mode].phi, modes[mode].psi)}, {}};
}

/// Index of the global minimum mode among torsion_modes (the "M2" mode).
inline constexpr std::size_t kTorsionTrainingMode = 1;

inline System torsion_system() {
  System s;
  s.name = "torsion";
  auto model = std::make_shared<TorsionModel>();
  s.potential = model;
  s.species = TorsionModel::species();
  s.periodic = false;
  for (const auto& sp : s.species) ++s.seeds.composition[sp];
  s.seeds.periodic = false;
  s.seeds.min_separation = 1.0;
  s.matcher.cutoff = 10.0;
  s.reference_trials = 1024;
  s.training_override = [model](const std::vector<Sample>&) {
    return torsion_training(*model, kTorsionTrainingMode);
  };
  return s;
}

inline std::vector<std::string> system_names() {
  return {"lj-dimer", "lj4", "lj8", "dw1", "dw2", "torsion"};
}

inline System make_system(const std::string& name) {
  if (name == "lj4") return lj_periodic_system("lj4", 4);
  if (name == "lj8") {
    System s = lj_periodic_system("lj8", 8);
    // Eight atoms need the energy term earlier in the run to reach the
    // higher minima (tuned on coverage only).
    s.guidance.t_mid = 450.0;
    return s;
  }
  if (name == "lj-dimer") return lj_dimer_system();
  if (name == "dw1") return double_well_1d_system();
  if (name == "dw2") return double_well_2d_system();
  if (name == "torsion") return torsion_system();
  throw ConfigError("unknown system '" + name + "'");
}

}  // namespace structsearch
