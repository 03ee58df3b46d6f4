#pragma once

// Multi-trial campaigns: the random-search reference pipeline and the
// uniform batch runner for rss / diffusion / gss.

#include "structsearch/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace structsearch {

/// Runs f(t) for t in [0, count) on up to `threads` workers. Results must be
/// written to pre-sized storage indexed by t, so the output never depends on
/// scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f,
                         unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t t = 0; t < count; ++t) f(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t; (t = next++) < count;) f(t);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum class Method { rss, diffusion, gss };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::rss: return "rss";
    case Method::diffusion: return "diffusion";
    case Method::gss: return "gss";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "rss") return Method::rss;
  if (s == "diffusion") return Method::diffusion;
  if (s == "gss") return Method::gss;
  throw ConfigError("unknown method '" + s + "' (expected rss, diffusion or gss)");
}

// ---- reference pipeline ----

struct RssCampaignResult {
  std::vector<RelaxResult> structures;  // distinct, sorted by energy
  std::vector<double> e_hull;           // eV/atom above the campaign minimum
  std::size_t attempted = 0;
  std::size_t converged = 0;
  std::size_t unstable = 0;  // distinct stationary points rejected as saddles
  bool empty = false;        // no survivors; legal but worth flagging
};

inline constexpr double kEHullCutoff = 1.0;  // eV/atom

/// FIRE stops wherever the force falls below f_max, which occasionally is a
/// saddle. A distinct structure is kept only if at least one small random
/// kick followed by a fresh relaxation brings it back to itself.
struct StabilityCheck {
  bool enabled = true;
  double jitter = 0.05;  // A on atoms, and on each lattice entry
  int probes = 2;
  double tighten = 0.01;  // f_max factor for the re-relaxation
};

inline bool returns_after_kick(const RelaxResult& r, const Potential& pot, const RelaxConfig& cfg,
                               const MatcherConfig& matcher, const StabilityCheck& chk, Rng& rng) {
  const Structure& s = r.structure;
  const MatchItem self = match_item(s, r.energy_per_atom, matcher);
  // Tighter threshold: along a soft unstable mode the kicked structure can
  // already satisfy f_max, and a loose relaxation would never leave it.
  RelaxConfig tight = cfg;
  tight.f_max = cfg.f_max * chk.tighten;
  tight.max_steps = 3 * cfg.max_steps;
  for (int p = 0; p < chk.probes; ++p) {
    Coords kick(static_cast<Eigen::Index>(s.size()), 3);
    for (Eigen::Index j = 0; j < kick.rows(); ++j)
      for (int c = 0; c < 3; ++c) kick(j, c) = chk.jitter * rng.normal();
    Structure moved;
    if (s.periodic()) {
      Mat3 L = s.lattice();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) L(a, b) += chk.jitter * rng.normal();
      moved = Structure::crystal(s.species(), s.positions() + kick * s.lattice().inverse(), L);
    } else {
      moved = Structure::molecule(s.species(), s.positions() + kick);
    }
    try {
      const RelaxResult back = fire_relax(moved, pot, tight);
      if (back.converged && items_match(self, match_item(back.structure, back.energy_per_atom, matcher), matcher))
        return true;
    } catch (const Error&) {
    }
  }
  return false;
}

/// seed -> relax -> keep converged -> E_hull filter -> de-duplicate -> drop saddles.
inline RssCampaignResult rss_campaign(const SeedSpec& spec, const Potential& pot, const RelaxConfig& cfg,
                                      std::size_t trials, const MatcherConfig& matcher,
                                      unsigned threads = 0, const StabilityCheck& check = {}) {
  if (trials < 1) throw ConfigError("rss_campaign: trials must be >= 1");
  spec.validate();
  cfg.validate();
  std::vector<std::optional<RelaxResult>> runs(trials);
  parallel_for(
      trials,
      [&](std::size_t t) {
        try {
          RelaxResult r = fire_relax(random_seed_structure(spec, t), pot, cfg);
          if (r.converged) runs[t] = std::move(r);
        } catch (const Error&) {
          // overlap, divergence or an impossible seed: an unconverged trial
        }
      },
      threads);

  RssCampaignResult out;
  out.attempted = trials;
  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < trials; ++t)
    if (runs[t]) order.push_back(t);
  out.converged = order.size();
  if (order.empty()) {
    out.empty = true;
    return out;
  }
  // Energy then trial index: the kept representative of each group is the
  // lowest-energy member regardless of evaluation order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return runs[a]->energy_per_atom < runs[b]->energy_per_atom;
  });
  const double emin = runs[order.front()]->energy_per_atom;
  std::vector<Sample> kept;
  std::vector<std::size_t> idx;
  for (std::size_t t : order) {
    if (runs[t]->energy_per_atom - emin > kEHullCutoff) continue;
    kept.push_back({runs[t]->structure, runs[t]->energy_per_atom, false});
    idx.push_back(t);
  }
  const std::vector<std::size_t> reps = deduplicate(kept, matcher);
  std::vector<char> stable(reps.size(), 1);
  if (check.enabled)
    parallel_for(
        reps.size(),
        [&](std::size_t r) {
          const std::size_t t = idx[reps[r]];
          Rng rng = Rng::substream(spec.rng_seed, Stream::noise, t);
          stable[r] = returns_after_kick(*runs[t], pot, cfg, matcher, check, rng);
        },
        threads);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (!stable[r]) {
      ++out.unstable;
      continue;
    }
    out.structures.push_back(*runs[idx[reps[r]]]);
    out.e_hull.push_back(runs[idx[reps[r]]]->energy_per_atom - emin);
  }
  out.empty = out.structures.empty();
  return out;
}

// ---- batch runner ----

struct CampaignSettings {
  PotentialPtr potential;
  std::vector<std::string> species;
  bool periodic = true;
  SeedSpec seeds;                       // rss
  NoiseSchedule schedule = NoiseSchedule::standard();
  std::shared_ptr<const ScoreField> field;  // diffusion / gss
  GuidanceConfig guidance;
  RelaxConfig relax;
  std::uint64_t root_seed = 0;
  unsigned threads = 0;
};

/// One record per trial, in trial order. Trial t draws only from substreams
/// keyed by (root_seed, t).
/// Trials [begin, end) only; concatenating ranges reproduces the full run.
inline std::vector<SearchRecord> batch_campaign_range(Method method, const CampaignSettings& cfg,
                                                      std::size_t begin, std::size_t end) {
  if (end <= begin) throw ConfigError("batch_campaign: trials must be >= 1");
  const std::size_t trials = end - begin;
  if (!cfg.potential) throw ConfigError("batch_campaign: no potential");
  if (method != Method::rss && !cfg.field && !(method == Method::gss && cfg.guidance.alpha_override == 0.0))
    throw ConfigError("batch_campaign: " + method_name(method) + " needs a training set");
  cfg.guidance.validate();
  cfg.relax.validate();
  const Potential& pot = *cfg.potential;
  std::vector<SearchRecord> out(trials);

  parallel_for(
      trials,
      [&](std::size_t slot) {
        const std::size_t t = begin + slot;
        SearchRecord rec;
        switch (method) {
          case Method::rss: {
            SeedSpec spec = cfg.seeds;
            spec.rng_seed = cfg.root_seed;
            try {
              rec = finish_record(random_seed_structure(spec, t), pot, &cfg.relax, "rss", cfg.root_seed, t);
            } catch (const Error& e) {
              rec.failed = true;
              rec.method = "rss";
              rec.note = e.what();
            }
            break;
          }
          case Method::diffusion: {
            Rng rng = Rng::substream(cfg.root_seed, Stream::sampler, t);
            const ScoreField& field = *cfg.field;
            const Structure init = sample_prior(cfg.species, cfg.periodic, field.schedule(), rng);
            ScoreFn fn = [&](const Structure& s, int i) { return empirical_score(s, i, field); };
            ReverseOptions ro;
            ro.keep_trajectory = false;
            try {
              Structure last = reverse_run(init, field.schedule(), fn, {}, rng, ro);
              rec = finish_record(std::move(last), pot, cfg.guidance.final_relax ? &cfg.relax : nullptr,
                                  "diffusion", cfg.root_seed, t);
            } catch (const DivergedError& e) {
              rec.structure = init;
              rec.failed = true;
              rec.method = "diffusion";
              rec.note = e.what();
            }
            break;
          }
          case Method::gss: {
            Rng rng = Rng::substream(cfg.root_seed, Stream::sampler, t);
            const NoiseSchedule& sch = cfg.field ? cfg.field->schedule() : cfg.schedule;
            rec = gss_sample(cfg.species, cfg.periodic, cfg.field.get(), pot, sch, cfg.guidance, cfg.relax,
                             rng, cfg.root_seed, t);
            break;
          }
        }
        rec.seed = cfg.root_seed;
        rec.trial = t;
        out[slot] = std::move(rec);
      },
      cfg.threads);
  return out;
}

inline std::vector<SearchRecord> batch_campaign(Method method, const CampaignSettings& cfg,
                                                std::size_t trials) {
  if (trials < 1) throw ConfigError("batch_campaign: trials must be >= 1");
  return batch_campaign_range(method, cfg, 0, trials);
}

}  // namespace structsearch
