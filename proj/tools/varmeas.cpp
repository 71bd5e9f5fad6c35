// varmeas: command-line front end for the convergence checkers.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <varmeas/harness.hpp>

namespace {

using namespace varmeas;
using nlohmann::json;

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("VARMEAS_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != std::string(s).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw SpecError("VARMEAS_SEED", std::string("not an unsigned integer: '") + s + "'");
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_suite(const std::string& config_path, const std::string& out_override, std::size_t threads) {
  const auto text = harness::detail::read_file(config_path);
  const auto j = json_io::parse_text(text, config_path);
  auto cfg = harness::parse_config(j, std::filesystem::path(config_path).parent_path());
  if (const auto s = env_seed()) cfg.seed = *s;
  if (!out_override.empty()) cfg.output_path = out_override;
  if (threads) cfg.threads = threads;
  const auto res = harness::run_suite(cfg);
  for (std::size_t k = 0; k < res.jobs.size(); ++k) {
    const auto& job = res.document["jobs"][k];
    std::cout << (job["ok"].get<bool>() ? "ok   " : "FAIL ") << job["theorem"].get<std::string>() << " ["
              << job["family"].get<std::string>() << "] " << job["verdict"].get<std::string>() << " (expected "
              << job["expected"].get<std::string>() << ")\n";
  }
  if (!cfg.output_path.empty()) {
    if (cfg.output_format == "csv") {
      harness::emit_plotdata(res.reports, cfg.output_path);
    } else {
      write_text(cfg.output_path, res.document.dump(2) + "\n");
    }
  }
  std::cout << (res.all_expected ? "suite: all outcomes as expected" : "suite: unexpected outcomes") << "\n";
  return res.all_expected ? harness::kExitOk : harness::kExitFailed;
}

int cmd_check(const std::string& theorem, const std::string& family, std::size_t horizon, double tol,
              std::optional<std::uint64_t> seed, const std::string& mode, const std::string& out) {
  if (horizon < 1) throw SpecError("--horizon", "must be >= 1");
  if (!(tol > 0.0)) throw SpecError("--tol", "must be > 0");
  std::uint64_t s = 0;
  if (seed) s = *seed;
  else if (const auto e = env_seed()) s = *e;
  auto spec = harness::load_spec_text(family);
  if (!mode.empty()) spec["mode"] = mode;
  const auto fam = harness::parse_family(spec, s);
  const auto report = harness::run_theorem(theorem, fam, horizon, tol);
  const auto text = json(report).dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_text(out, text);
  std::cerr << theorem << " [" << report.family << "]: " << to_string(report.verdict) << "\n";
  return report.verdict == Verdict::pass ? harness::kExitOk : harness::kExitFailed;
}

int cmd_gallery(const std::string& id, unsigned level) {
  const auto r = harness::gallery(id, level);
  std::cout << json(r).dump(2) << "\n";
  return r.verdict == Verdict::pass ? harness::kExitOk : harness::kExitFailed;
}

int cmd_emit_plot(const std::string& report_path, const std::string& out) {
  const auto j = json_io::parse_text(harness::detail::read_file(report_path), report_path);
  harness::emit_plotdata(harness::reports_from_json(j), out);
  return harness::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varmeas: convergence of integrals under varying measures"};
  app.require_subcommand(1);

  std::string config, suite_out;
  std::size_t threads = 0;
  auto* suite = app.add_subcommand("suite", "run a campaign from a config file");
  suite->add_option("--config", config, "campaign config (JSON)")->required();
  suite->add_option("--out", suite_out, "override the configured output path");
  suite->add_option("--threads", threads, "worker threads (default: hardware concurrency)");

  std::string theorem, family, mode, check_out;
  std::size_t horizon = kDefaultHorizon;
  double tol = 1e-2;
  std::optional<std::uint64_t> seed;
  auto* check = app.add_subcommand("check", "run one theorem checker on one family");
  check->add_option("theorem", theorem, "theorem id")
      ->required()
      ->check(CLI::IsMember(harness::theorem_ids()));
  check->add_option("--family", family, "family spec: JSON file or inline JSON")->required();
  check->add_option("--horizon", horizon, "largest index checked");
  check->add_option("--tol", tol, "tolerance on the final gap");
  check->add_option("--seed", seed, "seed for random family parameters");
  check->add_option("--mode", mode, "setwise or tv (McShane theorems)")->check(CLI::IsMember({"setwise", "tv"}));
  check->add_option("--out", check_out, "write the report here instead of stdout");

  std::string gallery_id;
  unsigned level = 10;
  auto* gal = app.add_subcommand("gallery", "reproduce a counterexample");
  gal->add_option("id", gallery_id, "gallery id")->required()->check(CLI::IsMember(harness::gallery_ids()));
  gal->add_option("--level", level, "dyadic level for rem2_weak_not_tv")->check(CLI::Range(2u, 16u));

  std::string report_path, csv_path;
  auto* plot = app.add_subcommand("emit-plot", "write the (n, gap) curves of a report as CSV");
  plot->add_option("report", report_path, "report or suite JSON")->required();
  plot->add_option("out", csv_path, "CSV output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*suite) return cmd_suite(config, suite_out, threads);
    if (*check) return cmd_check(theorem, family, horizon, tol, seed, mode, check_out);
    if (*gal) return cmd_gallery(gallery_id, level);
    if (*plot) return cmd_emit_plot(report_path, csv_path);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return harness::kExitBadSpec;
  } catch (const InvariantBreach& e) {
    std::cerr << "internal invariant breach: " << e.what() << "\n";
    return harness::kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return harness::kExitFailed;
  }
  return harness::kExitFailed;
}
