#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kframe_cli/cli.hpp"

namespace kframe::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  double tol_scale = 1.0;
};

RunConfig prepare(const Common& c) {
  RunConfig cfg = load_config(c.config, c.tol_scale);
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

int report_gate(const StageOutcome& o) {
  if (auto f = o.first_failure()) {
    std::cerr << "gate failed: " << *f << "\n";
    return kGateFailed;
  }
  return kOk;
}

int run_pipeline(const RunConfig& cfg) {
  std::error_code ec;
  for (const auto& s : stage_order()) fs::remove(cfg.output / ("stage_" + s + ".json"), ec);
  fs::remove(cfg.output / "stage_interpolate.json", ec);
  int code = kOk;
  for (const auto& s : cfg.stages) {
    const StageOutcome o = run_stage(cfg, s);
    code = report_gate(o);
    if (code != kOk) break;
  }
  write_certificate(cfg);
  return code;
}

int single_stage(const RunConfig& cfg, const std::string& stage, const fs::path& values = {}) {
  const StageOutcome o = run_stage(cfg, stage, values);
  write_certificate(cfg);
  return report_gate(o);
}

int report(const std::string& dir) {
  const fs::path p = fs::path(dir) / "certificate.json";
  std::ifstream in(p);
  if (!in) {
    std::cerr << "missing upstream stage: run (no certificate in " << dir << ")\n";
    return kGateFailed;
  }
  json c;
  try {
    c = json::parse(in);
  } catch (const json::parse_error& e) {
    std::cerr << p.string() << ": " << e.what() << "\n";
    return kParseError;
  }
  const std::string text = summarize(c);
  std::cout << text;
  std::ofstream(fs::path(dir) / "summary.txt") << text;
  return kOk;
}

}  // namespace

int main_entry(int argc, const char* const* argv) {
  CLI::App app{"Kernel frames: certify kernels, build sampling sets, frames and Riesz systems"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--tol-scale", common.tol_scale, "Multiply all default tolerances")->check(CLI::PositiveNumber);

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* o = sub->add_option("-c,--config", common.config, "Run configuration (JSON)");
    if (need_config) o->required();
    sub->add_option("-o,--out", common.out, "Output directory (overrides the config)");
    sub->add_option("--tol-scale", common.tol_scale, "Multiply all default tolerances")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Run every stage listed in the config");
  run->add_option("config", common.config, "Run configuration (JSON)")->required();
  run->add_option("-o,--out", common.out, "Output directory (overrides the config)");
  run->add_option("--tol-scale", common.tol_scale, "Multiply all default tolerances")->check(CLI::PositiveNumber);

  auto* ck = app.add_subcommand("certify-kernel", "Check bounded diagonal, localization and continuity");
  add_common(ck, true);
  auto* bp = app.add_subcommand("build-points", "Build the sampling family and its cover");
  add_common(bp, true);
  double near_uniform = 0.0;
  bp->add_option("--near-uniform", near_uniform, "Build a near-uniform family with this epsilon")
      ->check(CLI::PositiveNumber);
  auto* bf = app.add_subcommand("build-frame", "Frame bounds and a dual or tight frame");
  add_common(bf, true);
  auto* br = app.add_subcommand("build-riesz", "Riesz bounds and a biorthogonal or orthonormal system");
  add_common(br, true);
  auto* cm = app.add_subcommand("certify-molecules", "Molecule envelopes of the constructed systems");
  add_common(cm, true);
  auto* ip = app.add_subcommand("interpolate", "Interpolate node values with the biorthogonal system");
  add_common(ip, true);
  std::string values;
  ip->add_option("--values", values, "CSV with columns re[,im], one row per point")->required();
  auto* rp = app.add_subcommand("report", "Summarize an existing certificate");
  std::string report_dir;
  rp->add_option("dir", report_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParseError;
  }

  try {
    if (rp->parsed()) return report(report_dir);
    RunConfig cfg = prepare(common);
    if (run->parsed()) return run_pipeline(cfg);
    if (bp->parsed()) {
      if (near_uniform > 0.0) override_near_uniform(cfg, near_uniform);
      return single_stage(cfg, "build-points");
    }
    if (ck->parsed()) return single_stage(cfg, "certify-kernel");
    if (bf->parsed()) return single_stage(cfg, "build-frame");
    if (br->parsed()) return single_stage(cfg, "build-riesz");
    if (cm->parsed()) return single_stage(cfg, "certify-molecules");
    if (ip->parsed()) return single_stage(cfg, "interpolate", values);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kParseError;
  } catch (const MissingStage& e) {
    std::cerr << e.what() << "\n";
    return kGateFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGateFailed;
  }
  return kParseError;
}

}  // namespace kframe::cli
