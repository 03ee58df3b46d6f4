// structsearch: sample / reference / evaluate / experiment.

#include "structsearch/config.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace structsearch;

#ifndef STRUCTSEARCH_DEFAULT_DATA_DIR
#define STRUCTSEARCH_DEFAULT_DATA_DIR "data"
#endif

namespace {

struct Flags {
  std::string config, system, method, out, references, data;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config (flags override it)");
  cmd->add_option("--system", f.system, "toy system: " + [] {
    std::string s;
    for (const auto& n : system_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  cmd->add_option("--trials", f.trials, "number of trials");
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--out", f.out, "output path");
  cmd->add_option("--data", f.data, "reference fixture directory");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.system.empty()) c.system = f.system;
  if (!f.method.empty()) c.method = f.method;
  if (f.trials) c.trials = *f.trials;
  if (f.seed) c.root_seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (!f.out.empty()) c.out = f.out;
  if (!f.references.empty()) c.references = f.references;
  if (!f.data.empty()) c.data_dir = f.data;
  if (c.data_dir.empty()) c.data_dir = STRUCTSEARCH_DEFAULT_DATA_DIR;
  if (c.trials < 1) throw ConfigError("trials: must be >= 1");
  if (!c.references.empty() && !fs::exists(c.references))
    throw ConfigError("references: no such file " + c.references);
  return c;
}

std::vector<Sample> references_for(const System& sys, const RunConfig& c) {
  if (!c.references.empty()) return to_samples(read_jsonl(c.references));
  SuiteOptions o;
  o.data_dir = c.data_dir;
  o.threads = c.threads;
  return system_references(sys, o);
}

int cmd_sample(const Flags& f) {
  const RunConfig c = resolve(f);
  const System sys = configured_system(c);
  const Method m = parse_method(c.method);
  std::vector<Sample> refs;
  if (m != Method::rss) refs = references_for(sys, c);
  CampaignSettings cs = campaign_settings(sys, refs, c.threads);
  cs.root_seed = c.root_seed;
  const auto recs = batch_campaign(m, cs, c.trials);
  const std::string out =
      c.out.empty() ? sys.name + "_" + method_name(m) + "_s" + std::to_string(c.root_seed) + ".jsonl" : c.out;
  {
    auto os = open_out(out);
    write_jsonl(os, to_structure_records(recs, cs));
  }
  double sum = 0.0;
  std::size_t ok = 0, failed = 0;
  for (const auto& r : recs) {
    if (r.failed || !r.energy_per_atom) {
      ++failed;
      continue;
    }
    sum += *r.energy_per_atom;
    ++ok;
  }
  std::cout << "records " << recs.size() << " mean_energy_per_atom "
            << (ok ? csv_number(sum / static_cast<double>(ok)) : "nan") << " failed " << failed << " -> " << out
            << '\n';
  return 0;
}

int cmd_reference(const Flags& f) {
  RunConfig c = resolve(f);
  const System sys = configured_system(c);
  const std::size_t trials = f.trials ? c.trials : sys.reference_trials;
  const std::uint64_t seed = f.seed ? c.root_seed : sys.reference_seed;
  RssCampaignResult stats;
  std::vector<StructureRecord> refs;
  try {
    refs = build_references(sys, trials, seed, c.threads, &stats);
  } catch (const Error& e) {
    std::cerr << "reference: " << e.what() << '\n';
    return 1;
  }
  const std::string out = c.out.empty() ? sys.name + "_reference.jsonl" : c.out;
  {
    auto os = open_out(out);
    write_jsonl(os, refs);
  }
  std::cout << "references " << refs.size() << " attempted " << stats.attempted << " converged "
            << stats.converged << " rejected_saddles " << stats.unstable << " -> " << out << '\n';
  return 0;
}

int cmd_evaluate(const Flags& f, const std::string& samples_path, const std::string& label) {
  RunConfig c = resolve(f);
  if (c.references.empty()) throw ConfigError("evaluate: --references is required");
  const System sys = configured_system(c);
  const auto samples = to_samples(read_jsonl(samples_path));
  const auto refs = to_samples(read_jsonl(c.references));
  if (refs.empty()) throw ConfigError("evaluate: reference file is empty");
  const Composition want = refs.front().structure.composition();
  for (const auto& r : refs)
    if (r.structure.composition() != want) throw ValidationError("evaluate: references mix compositions");
  for (std::size_t k = 0; k < samples.size(); ++k)
    if (samples[k].structure.composition() != want)
      throw ValidationError("evaluate: sample " + std::to_string(k) + " has a different composition from the references");
  SummaryRow row;
  row.system = sys.name;
  row.method = label;
  row.seed = c.root_seed;
  row.trials = samples.size();
  row.coverage = coverage(samples, refs, sys.matcher);
  const Efficiency e = efficiency(samples, refs);
  row.mean_energy = e.mean_energy;
  row.low_energy_fraction = e.low_energy_fraction;
  row.budget_cost = budget_to_solve(samples, refs, sys.matcher);
  row.solved = std::isfinite(row.budget_cost);
  std::ostringstream os;
  os << kSummaryHeader << '\n' << summary_csv_line(row) << '\n';
  if (c.out.empty()) std::cout << os.str();
  else open_out(c.out) << os.str();
  return 0;
}

int cmd_experiment(const Flags& f, const std::string& suite, int seeds, const std::vector<std::string>& systems) {
  const auto names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    std::cerr << "experiment: unknown suite '" << suite << "' (expected";
    for (const auto& n : names) std::cerr << ' ' << n;
    std::cerr << ")\n";
    return 2;
  }
  SuiteOptions o;
  o.out_dir = f.out.empty() ? fs::path("runs") / suite : fs::path(f.out);
  o.data_dir = f.data.empty() ? fs::path(STRUCTSEARCH_DEFAULT_DATA_DIR) : fs::path(f.data);
  if (f.seed) o.root_seed = *f.seed;
  if (f.trials) o.trials = *f.trials;
  if (f.threads) o.threads = *f.threads;
  o.seeds = seeds;
  o.systems = systems;
  try {
    run_suite(suite, o);
  } catch (const std::exception& e) {
    std::cerr << "experiment " << suite << ": " << e.what() << '\n';
    return 1;
  }
  std::cout << suite << " -> " << o.out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided structure search on toy energy landscapes"};
  app.require_subcommand(1);

  Flags sf, rf, ef, xf;
  auto* sample = app.add_subcommand("sample", "run a search campaign and write JSONL records");
  add_common(sample, sf);
  sample->add_option("--method", sf.method, "rss, diffusion or gss");
  sample->add_option("--references", sf.references, "reference JSONL used as the training set");

  auto* reference = app.add_subcommand("reference", "build a de-duplicated reference set by random search");
  add_common(reference, rf);

  std::string samples_path, label = "samples";
  auto* evaluate = app.add_subcommand("evaluate", "score samples against references (CSV)");
  add_common(evaluate, ef);
  evaluate->add_option("--samples", samples_path, "sample JSONL")->required();
  evaluate->add_option("--references", ef.references, "reference JSONL")->required();
  evaluate->add_option("--label", label, "method column of the output row");

  std::string suite;
  int seeds = 0;
  std::vector<std::string> systems;
  auto* experiment = app.add_subcommand("experiment", "run a pre-registered experiment suite");
  experiment->add_option("suite", suite, "pareto_toy, budget_toy, torsion_fig4, gradient_checks, limit_checks")
      ->required();
  add_common(experiment, xf);
  experiment->add_option("--seeds", seeds, "number of campaign seeds (0 = suite default)");
  experiment->add_option("--only", systems, "restrict to these systems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sample) return cmd_sample(sf);
    if (*reference) return cmd_reference(rf);
    if (*evaluate) return cmd_evaluate(ef, samples_path, label);
    if (*experiment) return cmd_experiment(xf, suite, seeds, systems);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
