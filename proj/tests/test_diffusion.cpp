#include "structsearch/diffusion.hpp"
#include "structsearch/evaluate.hpp"
#include "structsearch/lennard_jones.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace structsearch;

namespace {

constexpr double kPi = std::numbers::pi;

// Kolmogorov-Smirnov statistic against U[0, 1).
double ks_uniform(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k)
    d = std::max({d, (k + 1) / n - v[k], v[k] - k / n});
  return d;
}
// Asymptotic critical value at p = 0.01.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

Structure point(double x, double y = 0.0, double z = 0.0) {
  Coords c(1, 3);
  c << x, y, z;
  return Structure::molecule({"X"}, c);
}

Structure cell2(double a, double b, double c) {
  Coords x(2, 3);
  x << 0.1, 0.2, 0.3, a, b, c;
  Mat3 L;
  L << 3.0, 0.1, 0.0, -0.2, 2.8, 0.3, 0.1, 0.0, 3.2;
  return Structure::crystal({"Ar", "Ar"}, x, L);
}

}  // namespace

// ---- wrapped normal ----

TEST(WrappedNormal, PeakMatchesGaussianForNarrowWidth) {
  const double s = 0.05;
  EXPECT_NEAR(wrapped_normal_log_density(0.3, 0.3, s), std::log(1.0 / (s * std::sqrt(2 * kPi))), 1e-12);
}

TEST(WrappedNormal, IntegratesToOne) {
  // Trapezoid on a periodic integrand converges spectrally.
  for (double s : {0.1, 0.5, 2.0}) {
    const int M = 4000;
    double sum = 0.0;
    for (int k = 0; k < M; ++k) sum += std::exp(wrapped_normal_log_density((k + 0.5) / M, 0.37, s));
    EXPECT_NEAR(sum / M, 1.0, 1e-6) << "sigma " << s;
  }
}

TEST(WrappedNormal, WideIsUniform) {
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k < 1000; ++k) {
    const double p = std::exp(wrapped_normal_log_density(k / 1000.0, 0.2, 5.0));
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  EXPECT_LT(hi - lo, 1e-6);
  EXPECT_NEAR(hi, 1.0, 1e-6);
}

TEST(WrappedNormal, ScoreSymmetryPoints) {
  for (double s : {0.05, 0.2, 0.7, 3.0}) {
    EXPECT_NEAR(wrapped_normal_score(0.4, 0.4, s), 0.0, 1e-12);
    EXPECT_NEAR(wrapped_normal_score(0.9, 0.4, s), 0.0, 1e-9);
  }
}

TEST(WrappedNormal, ScoreMatchesFiniteDifference) {
  const double h = 1e-5;
  for (double s : {0.2, 0.45, 0.8, 2.0})
    for (double x : {0.01, 0.13, 0.31, 0.62, 0.88}) {
      const double fd =
          (wrapped_normal_log_density(x + h, 0.25, s) - wrapped_normal_log_density(x - h, 0.25, s)) / (2 * h);
      const double an = wrapped_normal_score(x, 0.25, s);
      EXPECT_NEAR(an, fd, 1e-8 * std::max(1.0, std::abs(fd))) << "sigma " << s << " x " << x;
    }
}

TEST(WrappedNormal, ImageSumAndFourierFormsAgree) {
  for (double s : {0.6, 0.9, 1.5})
    for (double x : {0.0, 0.2, 0.5, 0.77}) {
      const auto a = wrapped_normal_eval(x, 0.1, s);
      const auto b = wrapped_normal_eval(x, 0.1, s, 20);
      EXPECT_NEAR(a.log_density, b.log_density, 1e-12);
      EXPECT_NEAR(a.score, b.score, 1e-10);
    }
}

TEST(WrappedNormal, PeriodicInArgument) {
  EXPECT_NEAR(wrapped_normal_log_density(0.3, 0.1, 0.2), wrapped_normal_log_density(2.3, 0.1, 0.2), 1e-12);
  EXPECT_NEAR(wrapped_normal_score(0.3, 0.1, 0.2), wrapped_normal_score(-1.7, 0.1, 0.2), 1e-12);
}

TEST(WrappedNormal, RejectsBadArguments) {
  EXPECT_THROW(wrapped_normal_log_density(0.1, 0.0, 0.0), ValidationError);
  EXPECT_THROW(wrapped_normal_log_density(0.1, 0.0, -1.0), ValidationError);
  EXPECT_THROW(wrapped_normal_log_density(0.1, 0.0, 0.3, 0), ValidationError);
}

// ---- schedules ----

TEST(Schedule, MonotoneAndEndpoints) {
  const NoiseSchedule s = NoiseSchedule::standard();
  ASSERT_EQ(s.steps(), 1000);
  EXPECT_DOUBLE_EQ(s.sigma(0), 1.0);
  EXPECT_NEAR(s.sigma(999), 0.01, 1e-15);
  EXPECT_EQ(s.sigma(1000), 0.0);
  EXPECT_DOUBLE_EQ(s.beta(0), 2e-2);
  EXPECT_DOUBLE_EQ(s.beta(999), 1e-4);
  EXPECT_EQ(s.alpha_bar(1000), 1.0);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_GT(s.sigma(i), s.sigma(i + 1));
    EXPECT_LT(s.alpha_bar(i), s.alpha_bar(i + 1));
    EXPECT_GT(s.alpha_bar(i), 0.0);
    EXPECT_GT(s.ve_variance(i), 0.0);
  }
  EXPECT_NEAR(s.lattice_scale(8), 4.0, 1e-12);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(NoiseSchedule::standard(1), ConfigError);
  EXPECT_THROW(NoiseSchedule::standard(10, 1.0, 0.5), ConfigError);
  EXPECT_THROW(NoiseSchedule::standard(10, 0.01, 1.0, 0.1, 0.01), ConfigError);
  EXPECT_THROW(NoiseSchedule::constant(10, 0.0), ConfigError);
}

TEST(Schedule, ConstantRates) {
  const NoiseSchedule s = NoiseSchedule::constant(50, 0.01, 2e-4);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(s.beta(i), 0.01);
    EXPECT_NEAR(s.ve_variance(i), 2e-4, 1e-15);
  }
}

// ---- forward noise and prior ----

TEST(ForwardNoise, DataEndIsIdentity) {
  const NoiseSchedule sch = NoiseSchedule::standard(100);
  Rng rng(1);
  const Structure s = cell2(0.5, 0.6, 0.7);
  EXPECT_EQ(forward_noise(s, 100, sch, rng), s);
  const Structure m = point(0.3, -1.0, 2.0);
  EXPECT_EQ(forward_noise(m, 100, sch, rng), m);
}

TEST(ForwardNoise, WideNoiseGivesUniformFractional) {
  const NoiseSchedule sch = NoiseSchedule::standard(100, 0.01, 10.0);
  Rng rng = Rng::substream(7, Stream::test, 0);
  const Structure s = cell2(0.5, 0.6, 0.7);
  std::vector<double> v;
  const int draws = 50000;
  for (int k = 0; k < draws; ++k) {
    const Structure t = forward_noise(s, 0, sch, rng);
    v.push_back(t.positions()(0, 0));
    v.push_back(t.positions()(1, 2));
  }
  EXPECT_LT(ks_uniform(v), ks_critical(v.size()));
}

TEST(ForwardNoise, LatticeMeanScalesWithAlphaBar) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  Rng rng = Rng::substream(8, Stream::test, 0);
  const Structure s = cell2(0.5, 0.6, 0.7);
  const int i = 400, draws = 100000;
  Mat3 mean = Mat3::Zero();
  for (int k = 0; k < draws; ++k) mean += forward_noise(s, i, sch, rng).lattice();
  mean /= draws;
  const double sd = std::sqrt(1.0 - sch.alpha_bar(i)) * sch.lattice_scale(2) / std::sqrt(double(draws));
  const Mat3 want = std::sqrt(sch.alpha_bar(i)) * s.lattice();
  EXPECT_LT((mean - want).cwiseAbs().maxCoeff(), 5.0 * sd);
}

TEST(Prior, UniformFractionalZeroMeanLatticeDeterministic) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const std::vector<std::string> sp(3, "Ar");
  Rng rng = Rng::substream(9, Stream::test, 0);
  std::vector<double> v;
  Mat3 mean = Mat3::Zero();
  const int draws = 40000;
  for (int k = 0; k < draws; ++k) {
    const Structure s = sample_prior(sp, true, sch, rng);
    for (int j = 0; j < 3; ++j) v.push_back(s.positions()(j, j));
    mean += s.lattice();
  }
  EXPECT_LT(ks_uniform(v), ks_critical(v.size()));
  mean /= draws;
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 5.0 * sch.lattice_scale(3) / std::sqrt(double(draws)));

  Rng a = Rng::substream(3, Stream::prior, 1), b = Rng::substream(3, Stream::prior, 1);
  EXPECT_EQ(sample_prior(sp, true, sch, a), sample_prior(sp, true, sch, b));
}

// ---- exact score ----

TEST(EmpiricalScore, SingleEuclideanComponentClosedForm) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const Structure m = point(0.7, -0.2, 1.1);
  const ScoreField field({{m}, {}}, sch);
  const Structure x = point(-0.4, 0.5, 0.9);
  for (int i : {0, 300, 999}) {
    const double ab = sch.alpha_bar(i);
    const Score s = empirical_score(x, i, field);
    const Coords want = (std::sqrt(ab) * m.positions() - x.positions()) / (1.0 - ab);
    EXPECT_LT((s.positions - want).cwiseAbs().maxCoeff(), 1e-12 * want.cwiseAbs().maxCoeff());
  }
}

TEST(EmpiricalScore, FlatTorusAtLargeWidth) {
  const NoiseSchedule sch = NoiseSchedule::standard(100, 0.01, 2.0);
  const ScoreField field({{cell2(0.5, 0.6, 0.7)}, {}}, sch);
  const Score s = empirical_score(cell2(0.0, 0.1, 0.95), 0, field);
  EXPECT_LT(s.positions.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EmpiricalScore, TwoComponentMatchesFiniteDifference) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{point(-1.0), point(1.2)}, {0.3, 0.7}}, sch);
  const double h = 1e-6;
  for (int i : {200, 700, 950})
    for (double x : {-1.3, -0.2, 0.05, 0.9}) {
      const double fd = (empirical_mixture(point(x + h), i, field).log_density -
                         empirical_mixture(point(x - h), i, field).log_density) / (2 * h);
      const double an = empirical_score(point(x), i, field).positions(0, 0);
      EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(fd))) << "i " << i << " x " << x;
    }
}

TEST(EmpiricalScore, CrystalBlocksMatchFiniteDifference) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{cell2(0.5, 0.6, 0.7), cell2(0.55, 0.4, 0.7)}, {}}, sch);
  const Structure q = cell2(0.52, 0.5, 0.66);
  const int i = 900;
  const MixtureEval e = empirical_mixture(q, i, field);
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    Coords xp = q.positions(), xm = q.positions();
    xp(1, c) += h;
    xm(1, c) -= h;
    const double fd = (empirical_mixture(Structure::crystal_unchecked(q.species(), xp, q.lattice()), i, field).log_density -
                       empirical_mixture(Structure::crystal_unchecked(q.species(), xm, q.lattice()), i, field).log_density) /
                      (2 * h);
    EXPECT_NEAR(e.score.positions(1, c), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      Mat3 lp = q.lattice(), lm = q.lattice();
      lp(a, b) += h;
      lm(a, b) -= h;
      const double fd = (empirical_mixture(Structure::crystal_unchecked(q.species(), q.positions(), lp), i, field).log_density -
                         empirical_mixture(Structure::crystal_unchecked(q.species(), q.positions(), lm), i, field).log_density) /
                        (2 * h);
      EXPECT_NEAR((*e.score.lattice)(a, b), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(EmpiricalScore, ResponsibilitiesAreADistribution) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{point(-1.0), point(0.1), point(2.0)}, {0.2, 0.5, 0.3}}, sch);
  for (int i : {0, 500, 999})
    for (double x : {-3.0, 0.0, 40.0}) {
      const auto r = empirical_mixture(point(x), i, field).responsibilities;
      double sum = 0.0;
      for (double v : r) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(EmpiricalScore, TorusEquivariance) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const Structure a = cell2(0.5, 0.6, 0.7), b = cell2(0.3, 0.9, 0.1), q = cell2(0.45, 0.75, 0.2);
  Coords shift(2, 3);
  shift.rowwise() = Eigen::RowVector3d(0.31, -0.17, 0.64);
  auto moved = [&](const Structure& s) {
    return Structure::crystal(s.species(), s.positions() + shift, s.lattice());
  };
  const ScoreField f1({{a, b}, {}}, sch), f2({{moved(a), moved(b)}, {}}, sch);
  for (int i : {100, 600, 990}) {
    const Score s1 = empirical_score(q, i, f1), s2 = empirical_score(moved(q), i, f2);
    EXPECT_LT((s1.positions - s2.positions).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EmpiricalScore, PeriodicInFractionalCoordinates) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField f({{cell2(0.5, 0.6, 0.7)}, {}}, sch);
  const Structure q = cell2(0.45, 0.75, 0.2);
  Coords x = q.positions();
  x(1, 0) += 1.0;
  x(0, 2) -= 2.0;
  const Structure q2 = Structure::crystal_unchecked(q.species(), x, q.lattice());
  EXPECT_LT((empirical_score(q, 500, f).positions - empirical_score(q2, 500, f).positions).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(EmpiricalScore, PointsToNearestComponentNearData) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{point(-1.0), point(1.0)}, {}}, sch);
  EXPECT_GT(empirical_score(point(-1.2), 990, field).positions(0, 0), 0.0);
  EXPECT_LT(empirical_score(point(-0.8), 990, field).positions(0, 0), 0.0);
  EXPECT_GT(empirical_score(point(0.8), 990, field).positions(0, 0), 0.0);
  EXPECT_LT(empirical_score(point(1.3), 990, field).positions(0, 0), 0.0);
}

TEST(EmpiricalScore, RejectsMismatchedInput) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{point(0.0)}, {}}, sch);
  EXPECT_THROW(empirical_score(cell2(0.1, 0.1, 0.1), 5, field), ValidationError);
  EXPECT_THROW(empirical_score(point(0.0), 1000, field), ValidationError);
  EXPECT_THROW(ScoreField({{}, {}}, sch), ValidationError);
  EXPECT_THROW(ScoreField({{point(0), point(1)}, {0.5, 0.6}}, sch), ValidationError);
}

// ---- reverse sampler ----

TEST(ReverseSampler, NoNoiseNoScoreNoDriftIsConstant) {
  const NoiseSchedule sch = NoiseSchedule::standard(50);
  Rng rng(3);
  const Structure s0 = cell2(0.1, 0.2, 0.3);
  ScoreFn zero = [](const Structure& s, int) { return Score::zeros_like(s); };
  ReverseOptions o;
  o.inject_noise = false;
  const Structure out = reverse_run(s0, sch, zero, [](int) { return 0.0; }, rng, o);
  EXPECT_EQ(out, s0);
}

TEST(ReverseSampler, BitwiseDeterministic) {
  const NoiseSchedule sch = NoiseSchedule::standard(200);
  const ScoreField field({{cell2(0.5, 0.6, 0.7)}, {}}, sch);
  Rng a = Rng::substream(5, Stream::sampler, 2), b = Rng::substream(5, Stream::sampler, 2);
  const auto ta = reverse_sample(sample_prior(field.training().structures[0].species(), true, sch, a), field, a);
  const auto tb = reverse_sample(sample_prior(field.training().structures[0].species(), true, sch, b), field, b);
  ASSERT_EQ(ta.size(), 201u);
  for (std::size_t k = 0; k < ta.size(); ++k) ASSERT_EQ(ta[k], tb[k]);
}

TEST(ReverseSampler, SingleStructureIsReproduced) {
  LJOptions o;
  o.defaults = {1.0, 2.5};
  const LennardJones lj(o);
  Coords r(2, 3);
  r << 0, 0, 0, 2.5 * std::pow(2.0, 1.0 / 6.0), 0, 0;
  const Structure target = Structure::molecule({"Ar", "Ar"}, r);
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{target}, {}}, sch);
  const MatcherConfig m;
  const double et = lj.evaluate(target).energy / 2;
  int hits = 0;
  ReverseOptions ro;
  ro.keep_trajectory = false;
  for (int t = 0; t < 1024; ++t) {
    Rng rng = Rng::substream(11, Stream::sampler, t);
    const Structure s = reverse_sample(sample_prior(target.species(), false, sch, rng), field, rng, ro).back();
    hits += structures_match(s, target, m, lj.evaluate(s).energy / 2, et);
  }
  EXPECT_GE(hits, static_cast<int>(std::ceil(0.99 * 1024)));
}

TEST(ReverseSampler, TwoModeFrequencies) {
  const NoiseSchedule sch = NoiseSchedule::standard();
  const ScoreField field({{point(-1.0), point(1.0)}, {0.3, 0.7}}, sch);
  const int draws = 10000;
  int right = 0;
  ReverseOptions ro;
  ro.keep_trajectory = false;
  for (int t = 0; t < draws; ++t) {
    Rng rng = Rng::substream(12, Stream::sampler, t);
    right += reverse_sample(sample_prior({"X"}, false, sch, rng), field, rng, ro).back().positions()(0, 0) > 0.0;
  }
  EXPECT_NEAR(static_cast<double>(right) / draws, 0.7, 0.05);
}
