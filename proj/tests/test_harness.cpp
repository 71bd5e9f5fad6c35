#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <varmeas/harness.hpp>

using namespace varmeas;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
RunResult run_cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = (env.empty() ? "" : env + " ") + std::string(VARMEAS_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (const auto n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "varmeas_test_harness";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kDefaultConfig = std::string(VARMEAS_SOURCE_DIR) + "/configs/default.json";

json small_config() {
  return json::parse(R"({
    "seed": 7, "horizon": 64, "tolerance": 0.05, "threads": 2,
    "theorem_ids": ["p4", "th1", "thmcsequi"],
    "family_specs": [
      {"kind": "convex_mix", "name": "mix", "params": {"atoms": 5}, "expect": {"p4": "pass", "th1": "pass"}},
      {"kind": "mass_escape", "name": "escape", "params": {"atoms": 6},
       "expect": {"p4": "pass", "th1": "hypothesis_failed"}},
      {"kind": "mcshane_step", "name": "steps", "expect": {"thmcsequi": "pass"}}
    ],
    "gallery": ["vacuous_uac"]
  })");
}

}  // namespace

TEST(ParseText, ReportsLineAndColumn) {
  try {
    json_io::parse_text("{\n  \"a\": 1,\n  \"b\": ]\n}", "f.json");
    FAIL() << "no exception";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("f.json: line 3, column 8"), std::string::npos) << e.what();
  }
}

TEST(ParseFamily, UnknownKindAndBadParams) {
  EXPECT_THROW(harness::parse_family(json{{"kind", "nope"}}, 0), SpecError);
  EXPECT_THROW(harness::parse_family(json{{"name", "x"}}, 0), SpecError);
  EXPECT_THROW(harness::parse_family(json::parse(R"({"kind":"rademacher","params":{"level":40}})"), 0), SpecError);
  EXPECT_THROW(
      harness::parse_family(json::parse(R"({"kind":"convex_mix","params":{"m":{"weights":[0.5,-0.5]}}})"), 0),
      SpecError);
  EXPECT_THROW(harness::parse_family(json::parse(R"({"kind":"mass_escape","expect":{"zz":"pass"}})"), 0), SpecError);
  EXPECT_THROW(harness::parse_family(json::parse(R"({"kind":"mass_escape","expect":{"p4":"great"}})"), 0), SpecError);
}

TEST(ParseFamily, SeededParametersAreDeterministic) {
  const auto spec = json::parse(R"({"kind":"convex_mix","name":"a","params":{"atoms":6}})");
  const auto a = harness::parse_family(spec, 11), b = harness::parse_family(spec, 11), c = harness::parse_family(spec, 12);
  EXPECT_EQ(a.mf->limit, b.mf->limit);
  EXPECT_FALSE(a.mf->limit == c.mf->limit);
}

TEST(ParseConfig, Validation) {
  auto c = small_config();
  c["horizon"] = 4;
  EXPECT_THROW(harness::parse_config(c), SpecError);
  c = small_config();
  c["tolerance"] = 0.0;
  EXPECT_THROW(harness::parse_config(c), SpecError);
  c = small_config();
  c["theorem_ids"] = {"th9"};
  EXPECT_THROW(harness::parse_config(c), SpecError);
  c = small_config();
  c.erase("family_specs");
  EXPECT_THROW(harness::parse_config(c), SpecError);
}

TEST(RunTheorem, MissingInputsAndPreconditions) {
  const auto steps = harness::parse_family(json{{"kind", "mcshane_step"}}, 0);
  EXPECT_THROW(harness::run_theorem("th1", steps, 16, 1e-2), SpecError);
  const auto signed_fam = harness::parse_family(json::parse(R"({"kind":"signed_mix","params":{"atoms":4}})"), 0);
  EXPECT_EQ(harness::run_theorem("th1", signed_fam, 16, 1e-2).verdict, Verdict::not_applicable);
}

TEST(Gallery, EveryEntryReproduces) {
  for (const auto& id : harness::gallery_ids()) EXPECT_EQ(harness::gallery(id).verdict, Verdict::pass) << id;
  const auto r = harness::gallery("rem2_weak_not_tv", 10);
  EXPECT_EQ(r.curve.size(), 10u);
  EXPECT_LE(r.final_gap, 1e-12);
  EXPECT_THROW(harness::gallery("nope"), SpecError);
}

TEST(PlotData, HeaderAndRoundTrip) {
  TheoremReport r;
  r.theorem = "th1";
  r.family = "a, \"quoted\" family";
  r.curve = {{1, 0.5}, {2, 1.0 / 3.0}, {3, 1e-300}};
  std::stringstream ss;
  harness::write_plotdata(ss, {r});
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "n,gap,theorem,family");
  const auto rows = harness::parse_plotdata(ss);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(rows[k].n, r.curve[k].first);
    EXPECT_EQ(rows[k].gap, r.curve[k].second);
    EXPECT_EQ(rows[k].family, r.family);
  }
}

TEST(PlotData, EmptyCurveIsHeaderOnly) {
  std::stringstream ss;
  harness::write_plotdata(ss, {TheoremReport{}});
  EXPECT_EQ(ss.str(), "n,gap,theorem,family\n");
}

TEST(Suite, DeterministicAcrossThreadCounts) {
  auto c1 = harness::parse_config(small_config());
  auto c2 = c1;
  c2.threads = 1;
  const auto a = harness::run_suite(c1), b = harness::run_suite(c2);
  EXPECT_TRUE(a.all_expected);
  EXPECT_EQ(a.document.dump(), b.document.dump());
  EXPECT_EQ(a.jobs.size(), 6u);
}

TEST(Suite, HorizonEightVersusFiveTwelve) {
  auto cfg = harness::parse_config(json::parse(slurp(kDefaultConfig)), std::filesystem::path(kDefaultConfig).parent_path());
  cfg.tolerance = 0.5;
  cfg.gallery.clear();
  auto low = cfg;
  low.horizon = 8;
  const auto hi = harness::run_suite(cfg), lo = harness::run_suite(low);
  ASSERT_EQ(hi.jobs.size(), lo.jobs.size());
  for (std::size_t k = 0; k < hi.jobs.size(); ++k) {
    const auto& fam = hi.families[hi.jobs[k].family];
    // pass at the short horizon is never lost at the long one
    if (lo.reports[k].verdict == Verdict::pass) {
      EXPECT_EQ(hi.reports[k].verdict, Verdict::pass) << hi.jobs[k].theorem << " " << fam;
    }
    // p4 reports the integral bound, not a gap
    if (hi.jobs[k].theorem != "p4" && lo.reports[k].verdict == Verdict::pass && hi.reports[k].verdict == Verdict::pass) {
      EXPECT_GE(lo.reports[k].final_gap + 1e-15, hi.reports[k].final_gap) << hi.jobs[k].theorem << " " << fam;
    }
    // certificate-driven families settle identically
    if (fam == "mix8" || fam == "dominated4" || fam == "scaling2d" || fam == "step_setwise" || fam == "step_tv" ||
        fam == "interval" || fam == "mass_escape16" || fam == "jump" || fam == "drift") {
      EXPECT_EQ(lo.reports[k].verdict, hi.reports[k].verdict) << hi.jobs[k].theorem << " " << fam;
    }
  }
}

TEST(Cli, MalformedSpecExitsTwoWithPosition) {
  const auto bad = scratch("bad.json");
  write(bad, "{\n  \"kind\": \"mass_escape\",\n  \"params\": {\"atoms\": 4,}\n}\n");
  const auto r = run_cli("check th1 --family " + bad.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 3, column"), std::string::npos) << r.out;
}

TEST(Cli, UnknownKindExitsTwo) {
  const auto r = run_cli("check th1 --family '{\"kind\": \"nope\"}'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unknown family kind"), std::string::npos) << r.out;
}

TEST(Cli, BadSeedEnvironmentExitsTwo) {
  const auto r = run_cli("check th1 --family '{\"kind\": \"mass_escape\"}'", "VARMEAS_SEED=abc");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, CheckVerdictsAndExitCodes) {
  const auto ok = run_cli("check th1 --family '{\"kind\": \"convex_mix\", \"params\": {\"atoms\": 4}}' --horizon 512");
  EXPECT_EQ(ok.code, 0) << ok.out;
  const auto hf = run_cli("check th1 --family '{\"kind\": \"mass_escape\"}' --horizon 64");
  EXPECT_EQ(hf.code, 1);
  EXPECT_NE(hf.out.find("hypothesis_failed"), std::string::npos);
}

TEST(Cli, GalleryAndEmitPlot) {
  const auto rep = scratch("rem2.json");
  const auto g = run_cli("gallery rem2_weak_not_tv --level 6");
  ASSERT_EQ(g.code, 0) << g.out;
  write(rep, g.out);
  const auto csv = scratch("rem2.csv");
  const auto e = run_cli("emit-plot " + rep.string() + " " + csv.string());
  ASSERT_EQ(e.code, 0) << e.out;
  std::ifstream in(csv);
  const auto rows = harness::parse_plotdata(in);
  EXPECT_EQ(rows.size(), 6u);
}

TEST(Cli, SeedEnvironmentOverridesConfig) {
  auto c = small_config();
  const auto cfg = scratch("small.json");
  write(cfg, c.dump());
  const auto out_a = scratch("a.json"), out_b = scratch("b.json"), out_c = scratch("c.json");
  ASSERT_EQ(run_cli("suite --config " + cfg.string() + " --out " + out_a.string()).code, 0);
  ASSERT_EQ(run_cli("suite --config " + cfg.string() + " --out " + out_b.string(), "VARMEAS_SEED=7").code, 0);
  ASSERT_EQ(run_cli("suite --config " + cfg.string() + " --out " + out_c.string(), "VARMEAS_SEED=8").code, 0);
  EXPECT_EQ(slurp(out_a), slurp(out_b));
  EXPECT_NE(slurp(out_a), slurp(out_c));
  EXPECT_EQ(json::parse(slurp(out_c))["seed"], 8);
}
