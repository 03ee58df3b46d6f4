#include "structsearch/lennard_jones.hpp"
#include "structsearch/model_potentials.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace structsearch;

namespace {

LennardJones unit_lj() {
  LJOptions o;
  o.defaults = {1.0, 1.0};
  return LennardJones(o);
}

// Eight-atom fcc-derived cell (two conventional cubes) with random jitter and
// a random shear, so forces and stresses are all non-zero.
Structure jittered_fcc8(Rng& rng, double a = 1.6) {
  Coords x(8, 3);
  const double base[4][3] = {{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
  for (int cell = 0; cell < 2; ++cell)
    for (int b = 0; b < 4; ++b) {
      const int j = 4 * cell + b;
      x(j, 0) = (base[b][0] + cell) / 2.0 + rng.uniform(-0.02, 0.02);
      x(j, 1) = base[b][1] + rng.uniform(-0.03, 0.03);
      x(j, 2) = base[b][2] + rng.uniform(-0.03, 0.03);
    }
  Mat3 L = Vec3(2 * a, a, a).asDiagonal();
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) L(p, q) += rng.uniform(-0.08, 0.08);
  return Structure::crystal(std::vector<std::string>(8, "Ar"), x, L);
}

Structure random_lj_cell(Rng& rng, int n) {
  SeedSpec spec;
  spec.composition = {{"Ar", n}};
  spec.volume_min = 1.2;
  spec.volume_max = 2.0;
  spec.min_separation = 0.8;
  spec.rng_seed = rng.engine()();
  return random_seed_structure(spec, 0);
}

}  // namespace

TEST(LennardJones, DimerAtMinimum) {
  LJOptions o;
  o.shift = false;
  LennardJones lj(o);
  Coords r(2, 3);
  r << 0, 0, 0, std::pow(2.0, 1.0 / 6.0), 0, 0;
  const auto rep = lj.evaluate(Structure::molecule({"Ar", "Ar"}, r));
  EXPECT_NEAR(rep.energy, -1.0, 1e-12);
  EXPECT_LT(rep.forces.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LennardJones, OverlapFloor) {
  Coords r(2, 3);
  r << 0, 0, 0, 0.05, 0, 0;
  const auto s = Structure::molecule({"Ar", "Ar"}, r);
  EXPECT_THROW(unit_lj().evaluate(s), OverlapError);
  EvalOptions eo;
  eo.clamp_overlap = true;
  const auto rep = unit_lj().evaluate(s, eo);
  EXPECT_TRUE(std::isfinite(rep.energy));
}

TEST(LennardJones, PeriodicForcesMatchFiniteDifferences) {
  Rng rng(1);
  const auto lj = unit_lj();
  const Structure s = jittered_fcc8(rng);
  const auto rep = lj.evaluate(s);
  const auto fd = finite_difference_oracle(lj, s, 1e-5);
  EXPECT_LE(relative_error(rep.forces, fd.forces), 1e-6);
}

TEST(LennardJones, ShiftedEnergyVanishesAtCutoff) {
  const auto lj = unit_lj();
  Coords r(2, 3);
  r << 0, 0, 0, 2.5 - 1e-9, 0, 0;
  LJOptions o;
  o.cutoff_nonperiodic = true;
  EXPECT_NEAR(LennardJones(o).evaluate(Structure::molecule({"A", "A"}, r)).energy, 0.0, 1e-9);
}

TEST(LennardJones, SmallCellSumsAllImages) {
  // One atom in a cubic cell of edge 1.1: every neighbour is a self image,
  // which the minimum-image convention would miss entirely.
  Coords x(1, 3);
  x.setZero();
  const auto s = Structure::crystal({"Ar"}, x, 1.1 * Mat3::Identity());
  const auto rep = unit_lj().evaluate(s);
  double expect = 0.0;
  const double shift = 4.0 * (std::pow(2.5, -12) - std::pow(2.5, -6));
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      for (int c = -3; c <= 3; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        const double r = 1.1 * std::sqrt(double(a * a + b * b + c * c));
        if (r < 2.5) expect += 0.5 * (4.0 * (std::pow(r, -12) - std::pow(r, -6)) - shift);
      }
  EXPECT_NEAR(rep.energy, expect, 1e-12);
}

TEST(LennardJones, PairTableOverrides) {
  LJOptions o;
  o.pairs[{"A", "B"}] = {2.0, 1.0};
  LennardJones lj(o);
  Coords r(2, 3);
  r << 0, 0, 0, std::pow(2.0, 1.0 / 6.0), 0, 0;
  o.shift = false;
  EXPECT_NEAR(LennardJones(o).evaluate(Structure::molecule({"B", "A"}, r)).energy, -2.0, 1e-12);
}

TEST(LennardJones, NewtonThirdLawAndSymmetricVirial) {
  Rng rng(2);
  const auto lj = unit_lj();
  for (int t = 0; t < 20; ++t) {
    const Structure s = random_lj_cell(rng, 4 + t % 6);
    const auto rep = lj.evaluate(s);
    EXPECT_LT(rep.forces.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((*rep.virial - rep.virial->transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LennardJones, TranslationInvariance) {
  Rng rng(4);
  const auto lj = unit_lj();
  const Structure s = jittered_fcc8(rng);
  const auto rep = lj.evaluate(s);
  Coords shifted = s.positions();
  shifted.rowwise() += Eigen::RowVector3d(0.31, -0.17, 0.77);
  const auto rep2 = lj.evaluate(Structure::crystal(s.species(), shifted, s.lattice()));
  EXPECT_LT(std::abs(rep.energy - rep2.energy), 1e-10);
  EXPECT_LT((rep.forces - rep2.forces).cwiseAbs().maxCoeff(), 1e-10);

  Coords r(3, 3);
  r << 0, 0, 0, 1.1, 0.1, 0, 0.4, 1.0, 0.3;
  const auto m = Structure::molecule({"A", "A", "A"}, r);
  Coords r2 = r;
  r2.rowwise() += Eigen::RowVector3d(5.0, -2.0, 1.0);
  const auto a = lj.evaluate(m), b = lj.evaluate(Structure::molecule(m.species(), r2));
  EXPECT_LT(std::abs(a.energy - b.energy), 1e-10);
  EXPECT_LT((a.forces - b.forces).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FracGradient, Examples) {
  Coords x(1, 3);
  x << 0.1, 0.2, 0.3;
  PotentialReport rep;
  rep.forces.resize(1, 3);
  rep.forces << 1.0, -2.0, 0.5;
  const auto s = Structure::crystal({"A"}, x, Mat3::Identity());
  EXPECT_TRUE(frac_gradient(s, rep).isApprox(-rep.forces));
  const auto t = Structure::crystal({"A"}, x, 2.0 * Mat3::Identity());
  rep.forces << 1.0, 0.0, 0.0;
  Coords expect(1, 3);
  expect << -2.0, 0.0, 0.0;
  EXPECT_TRUE(frac_gradient(t, rep).isApprox(expect));
}

TEST(LatticeGradient, Examples) {
  const Mat3 L = 3.0 * Mat3::Identity();
  EXPECT_TRUE(lattice_gradient_from_virial(L, Mat3::Zero()).isZero());
  const double p = 0.7;
  EXPECT_TRUE(lattice_gradient_from_virial(L, -p * Mat3::Identity())
                  .isApprox(p * 9.0 * Mat3::Identity()));
  EXPECT_THROW(lattice_gradient_from_virial(Mat3::Zero(), Mat3::Zero()), ValidationError);
}

TEST(LatticeGradient, IsotropicStrainMatchesFiniteDifference) {
  // Simple cubic single-atom cell: the lattice gradient is p a^2 I with
  // sigma_virial = -p I.
  const auto lj = unit_lj();
  Coords x(1, 3);
  x.setZero();
  const double a = 1.3;
  const auto s = Structure::crystal({"Ar"}, x, a * Mat3::Identity());
  const auto rep = lj.evaluate(s);
  const double p = -(*rep.virial)(0, 0);
  const auto fd = finite_difference_oracle(lj, s, 1e-5);
  EXPECT_LE(relative_error(*fd.lattice_grad, Mat3(p * a * a * Mat3::Identity())), 1e-6);
}

TEST(GradientConversions, MatchFiniteDifferencesOnRandomCells) {
  Rng rng(7);
  const auto lj = unit_lj();
  for (int t = 0; t < 50; ++t) {
    const Structure s = random_lj_cell(rng, 4 + t % 9);
    const auto rep = lj.evaluate(s);
    const auto fd = finite_difference_oracle(lj, s, 1e-5);
    EXPECT_LE(relative_error(frac_gradient(s, rep), *fd.frac_grad), 1e-6) << t;
    EXPECT_LE(relative_error(lattice_gradient_from_virial(s, *rep.virial), *fd.lattice_grad), 1e-6)
        << t;
  }
}

TEST(TotalStress, Examples) {
  Coords x(1, 3);
  x.setZero();
  const auto s = Structure::crystal({"A"}, x, 2.0 * Mat3::Identity());
  PotentialReport rep;
  rep.forces.resize(1, 3);
  rep.forces << 3.0, 1.0, -1.0;
  rep.virial = Mat3::Constant(0.25);
  EXPECT_TRUE(virial_to_total_stress(s, rep).isApprox(*rep.virial));
  Coords y(2, 3);
  y << 0.1, 0.2, 0.3, 0.6, 0.1, 0.9;
  rep.forces = Coords::Zero(2, 3);
  const auto t = Structure::crystal({"A", "A"}, y, 2.0 * Mat3::Identity());
  EXPECT_TRUE(virial_to_total_stress(t, rep).isApprox(*rep.virial));
}

TEST(TotalStress, CrossCheckAgreesWithVirialRoute) {
  Rng rng(13);
  const auto lj = unit_lj();
  for (int t = 0; t < 50; ++t) {
    const Structure s = random_lj_cell(rng, 4 + t % 9);
    const auto rep = lj.evaluate(s);
    const Mat3 via_virial = lattice_gradient_from_virial(s, *rep.virial);
    const Mat3 via_total =
        lattice_gradient_from_total(s, virial_to_total_stress(s, rep), rep.forces);
    EXPECT_LE(relative_error(via_total, via_virial), 1e-10);
  }
}

TEST(FiniteDifference, HarmonicForces) {
  Harmonic h(2.0);
  Coords r(2, 3);
  r << 0.3, -0.2, 1.0, -1.0, 0.5, 0.0;
  const auto fd = finite_difference_oracle(h, Structure::molecule({"A", "A"}, r), 1e-4);
  EXPECT_LT((fd.forces + 2.0 * r).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(finite_difference_oracle(h, Structure::molecule({"A", "A"}, r), 1e-2),
               ValidationError);
}

TEST(DoubleWell, StationaryMaximum) {
  DoubleWell1D dw;
  Coords r(1, 3);
  r.setZero();
  const auto rep = dw.evaluate(Structure::molecule({"X"}, r));
  EXPECT_DOUBLE_EQ(rep.energy, 1.0);
  EXPECT_DOUBLE_EQ(rep.forces.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DoubleWell, ForcesMatchFiniteDifferences) {
  Coords r(1, 3);
  r << 0.7, -0.3, 0.2;
  const auto s = Structure::molecule({"X"}, r);
  DoubleWell1D d1(0.05, 1.2, 2.0);
  DoubleWell2D d2;
  EXPECT_LE(relative_error(d1.evaluate(s).forces, finite_difference_oracle(d1, s, 1e-5).forces), 1e-8);
  EXPECT_LE(relative_error(d2.evaluate(s).forces, finite_difference_oracle(d2, s, 1e-5).forces), 1e-8);
}

TEST(Torsion, BuildReproducesDihedrals) {
  TorsionModel tm;
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const double phi = rng.uniform(-3.1, 3.1), psi = rng.uniform(-3.1, 3.1);
    const auto [p, q] = tm.dihedrals(tm.build(phi, psi));
    EXPECT_NEAR(p, phi, 1e-10);
    EXPECT_NEAR(q, psi, 1e-10);
  }
}

TEST(Torsion, EnergyOnTemplateIsSurface) {
  TorsionModel tm;
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const double phi = rng.uniform(-3.1, 3.1), psi = rng.uniform(-3.1, 3.1);
    EXPECT_NEAR(tm.evaluate(tm.build(phi, psi)).energy, tm.surface(phi, psi), 1e-12);
  }
}

TEST(Torsion, PeriodicInBothAngles) {
  TorsionModel tm;
  for (double phi : {-2.0, 0.1, 1.3})
    for (double psi : {-1.0, 0.4, 2.9}) {
      EXPECT_NEAR(tm.surface(phi + 2 * std::numbers::pi, psi), tm.surface(phi, psi), 1e-12);
      EXPECT_NEAR(tm.surface(phi, psi - 2 * std::numbers::pi), tm.surface(phi, psi), 1e-12);
    }
}

TEST(Torsion, ForcesMatchFiniteDifferences) {
  TorsionModel tm;
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    Structure s = tm.build(rng.uniform(-3, 3), rng.uniform(-3, 3));
    Coords r = s.positions();
    for (int j = 0; j < 6; ++j)
      for (int c = 0; c < 3; ++c) r(j, c) += rng.uniform(-0.1, 0.1);
    s = Structure::molecule(s.species(), r);
    EXPECT_LE(relative_error(tm.evaluate(s).forces, finite_difference_oracle(tm, s, 1e-5).forces),
              1e-6);
  }
}

TEST(ScaledPotential, ScalesEverything) {
  auto lj = std::make_shared<LennardJones>(LJOptions{});
  ScaledPotential sp(lj, 3.0);
  Rng rng(1);
  const Structure s = jittered_fcc8(rng);
  const auto a = lj->evaluate(s), b = sp.evaluate(s);
  EXPECT_NEAR(b.energy, 3.0 * a.energy, 1e-12);
  EXPECT_TRUE(b.forces.isApprox(3.0 * a.forces));
  EXPECT_TRUE(b.virial->isApprox(3.0 * *a.virial));
}
