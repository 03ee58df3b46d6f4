#include "structsearch/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace structsearch;

namespace {

std::vector<StructureRecord> some_records() {
  Rng rng = Rng::substream(7, Stream::test, 0);
  std::vector<StructureRecord> out;
  Coords r(3, 3);
  for (int j = 0; j < 3; ++j)
    for (int c = 0; c < 3; ++c) r(j, c) = rng.normal() / 3.0;
  out.push_back({Structure::molecule({"C", "H", "H"}, r), -0.1 / 3.0, json::object()});
  Coords x(2, 3);
  x << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9999999999999999;
  Mat3 L;
  L << 3.1, 0.0, 0.0, 0.2, 2.9, 0.0, 0.1, 0.3, 3.3;
  StructureRecord p{Structure::crystal({"Ar", "Kr"}, x, L), std::nullopt, json::object()};
  p.meta["method"] = "gss";
  p.meta["alpha_schedule"] = {{"t_mid", 600}, {"t_scale", 50}};
  out.push_back(p);
  return out;
}

}  // namespace

TEST(Jsonl, RoundTripIsExact) {
  const auto in = some_records();
  std::stringstream ss;
  write_jsonl(ss, in);
  const auto out = read_jsonl(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t k = 0; k < in.size(); ++k) {
    EXPECT_EQ(out[k].structure, in[k].structure);
    EXPECT_EQ(out[k].energy_per_atom, in[k].energy_per_atom);
    EXPECT_EQ(out[k].meta, in[k].meta);
  }
  // Writing again yields identical bytes.
  std::stringstream again;
  write_jsonl(again, out);
  std::stringstream first;
  write_jsonl(first, in);
  EXPECT_EQ(again.str(), first.str());
}

TEST(Jsonl, BlankLinesSkipped) {
  std::stringstream ss;
  write_jsonl(ss, some_records());
  std::stringstream padded("\n" + ss.str() + "  \n");
  EXPECT_EQ(read_jsonl(padded).size(), 2u);
}

TEST(Jsonl, RejectsBadRecordsWithLineNumber) {
  std::stringstream ss;
  write_jsonl(ss, some_records());
  std::stringstream bad(ss.str() + R"({"species":["Ar"],"coords":[[0,0,0]],"lattice":null,"colour":1})" + "\n");
  try {
    read_jsonl(bad, "x.jsonl");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  for (const char* line : {R"({"species":["Ar","Ar"],"coords":[[0,0,0]],"lattice":null})",
                           R"({"species":["Ar"],"lattice":[[1,0,0],[0,1,0],[0,0,1]]})",
                           R"({"species":["Ar"],"coords":[[0,0]],"lattice":null})", "not json"}) {
    std::stringstream s(line);
    EXPECT_THROW(read_jsonl(s), ValidationError) << line;
  }
}

TEST(Jsonl, MissingFileIsConfigError) {
  EXPECT_THROW(read_jsonl(std::string("/nonexistent/file.jsonl")), ConfigError);
}

TEST(Jsonl, FailedFlagReachesSample) {
  auto rs = some_records();
  rs[0].meta["failed"] = true;
  const auto s = to_samples(rs);
  EXPECT_TRUE(s[0].failed);
  EXPECT_FALSE(s[1].failed);
}

TEST(SummaryCsv, RoundTrip) {
  SummaryRow r;
  r.system = "lj8";
  r.method = "gss";
  r.seed = 5;
  r.trials = 1024;
  r.coverage = 2.0 / 3.0;
  r.mean_energy = -7.123456789012345;
  r.low_energy_fraction = 0.1;
  r.budget_cost = std::numeric_limits<double>::infinity();
  const SummaryRow b = parse_summary_line(summary_csv_line(r));
  EXPECT_EQ(b.system, r.system);
  EXPECT_EQ(b.method, r.method);
  EXPECT_EQ(b.seed, r.seed);
  EXPECT_EQ(b.trials, r.trials);
  EXPECT_EQ(b.coverage, r.coverage);
  EXPECT_EQ(b.mean_energy, r.mean_energy);
  EXPECT_EQ(b.low_energy_fraction, r.low_energy_fraction);
  EXPECT_TRUE(std::isinf(b.budget_cost));
  EXPECT_FALSE(b.solved);
  EXPECT_EQ(split_csv(kSummaryHeader).size(), 9u);
  EXPECT_THROW(parse_summary_line("a,b,c"), ValidationError);
}
