#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

#include "kframe_cli/cli.hpp"

namespace kframe::cli {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(where, "unknown key '" + it.key() + "'");
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) fail(where, "must be positive");
  return v;
}

int integer(const json& j, const std::string& where, int lo) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > 1000000) fail(where, "out of range");
  return static_cast<int>(v);
}

std::string string(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected true or false");
  return j.get<bool>();
}

std::array<double, 2> pair(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || j.size() > 2) fail(where, "expected one or two numbers");
  std::array<double, 2> out{0.0, 0.0};
  for (std::size_t i = 0; i < j.size(); ++i) out[i] = number(j[i], where);
  return out;
}

std::array<int, 2> int_pair(const json& j, const std::string& where, int lo) {
  if (!j.is_array() || j.empty() || j.size() > 2) fail(where, "expected one or two integers");
  std::array<int, 2> out{1, 1};
  for (std::size_t i = 0; i < j.size(); ++i) out[i] = integer(j[i], where, lo);
  return out;
}

Box box(const json& j, const std::string& where) {
  check_keys(j, where, {"lo", "hi"});
  if (!j.contains("lo") || !j.contains("hi")) fail(where, "needs lo and hi");
  Box b{pair(j["lo"], where + ".lo"), pair(j["hi"], where + ".hi")};
  for (std::size_t i = 0; i < j["lo"].size(); ++i)
    if (!(b.hi[i] > b.lo[i])) fail(where, "hi must exceed lo");
  return b;
}

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) fail(where, "missing '" + key + "'");
  return j[key];
}

PointDirective point_directive(const json& j, const std::string& where, const std::filesystem::path& base) {
  if (!j.is_object()) fail(where, "expected an object");
  PointDirective d;
  d.kind = lower(string(need(j, "kind", where), where + ".kind"));
  if (d.kind == "lattice") {
    check_keys(j, where, {"kind", "spacing", "half_width", "jitter", "seed"});
    d.spacing = positive(need(j, "spacing", where), where + ".spacing");
    d.half_width = positive(need(j, "half_width", where), where + ".half_width");
    if (j.contains("jitter")) d.jitter = number(j["jitter"], where + ".jitter");
    if (d.jitter < 0.0) fail(where + ".jitter", "must be non-negative");
    if (j.contains("seed")) d.seed = static_cast<std::uint64_t>(integer(j["seed"], where + ".seed", 0));
  } else if (d.kind == "affine_lattice") {
    check_keys(j, where, {"kind", "a", "b", "window"});
    d.a = positive(need(j, "a", where), where + ".a");
    if (!(d.a > 1.0)) fail(where + ".a", "dilation must exceed 1");
    d.b = positive(need(j, "b", where), where + ".b");
    d.window = box(need(j, "window", where), where + ".window");
    if (!(d.window.lo[1] > 0.0)) fail(where + ".window", "a range must be positive");
  } else if (d.kind == "near_uniform") {
    check_keys(j, where, {"kind", "eps"});
    d.eps = positive(need(j, "eps", where), where + ".eps");
  } else if (d.kind == "file") {
    check_keys(j, where, {"kind", "path"});
    d.path = string(need(j, "path", where), where + ".path");
    if (d.path.is_relative()) d.path = base / d.path;
  } else if (d.kind == "explicit") {
    check_keys(j, where, {"kind", "points"});
    const json& p = need(j, "points", where);
    if (!p.is_array() || p.empty()) fail(where + ".points", "expected a non-empty list");
    for (const auto& q : p) d.points.push_back(pair(q, where + ".points"));
  } else {
    fail(where + ".kind", "unknown point directive '" + d.kind + "'");
  }
  return d;
}

void stage_list(RunConfig& cfg, const json& j) {
  if (!j.is_array() || j.empty()) fail("stages", "expected a non-empty list");
  std::set<std::string> seen;
  for (const auto& s : j) {
    const std::string name = string(s, "stages");
    const auto& order = stage_order();
    if (std::find(order.begin(), order.end(), name) == order.end()) fail("stages", "unknown stage '" + name + "'");
    if (seen.count(name)) fail("stages", "duplicate stage '" + name + "'");
    const bool ok = name == "certify-kernel"
                        ? seen.empty()
                    : name == "build-points"              ? seen.count("certify-kernel") > 0
                    : name == "build-frame" || name == "build-riesz" ? seen.count("build-points") > 0
                    : seen.count("build-frame") > 0 || seen.count("build-riesz") > 0;
    if (!ok) fail("stages", "'" + name + "' is out of order");
    seen.insert(name);
    cfg.stages.push_back(name);
  }
}

void tolerances(Tolerances& t, const json& j, double scale) {
  // Defaults are scaled; explicit values are taken as given.
  for (double* v : {&t.bd_floor, &t.hermitian, &t.soundness, &t.loc_growth, &t.wuc, &t.residual, &t.decay,
                    &t.uniformity, &t.riesz_gap, &t.biorthogonality, &t.interpolation})
    *v *= scale;
  if (j.is_null()) return;
  check_keys(j, "tolerances",
             {"bd_floor", "hermitian", "soundness", "loc_growth", "wuc", "residual", "decay", "uniformity", "riesz_gap",
              "biorthogonality", "interpolation"});
  auto set = [&](const char* key, double& v) {
    if (j.contains(key)) v = positive(j[key], std::string("tolerances.") + key);
  };
  set("bd_floor", t.bd_floor);
  set("hermitian", t.hermitian);
  set("soundness", t.soundness);
  set("loc_growth", t.loc_growth);
  set("wuc", t.wuc);
  set("residual", t.residual);
  set("decay", t.decay);
  set("uniformity", t.uniformity);
  set("riesz_gap", t.riesz_gap);
  set("biorthogonality", t.biorthogonality);
  set("interpolation", t.interpolation);
}

}  // namespace

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{"certify-kernel", "build-points", "build-frame", "build-riesz",
                                              "certify-molecules"};
  return order;
}

json Tolerances::to_json() const {
  return {{"bd_floor", bd_floor},
          {"hermitian", hermitian},
          {"soundness", soundness},
          {"loc_growth", loc_growth},
          {"wuc", wuc},
          {"residual", residual},
          {"decay", decay},
          {"uniformity", uniformity},
          {"riesz_gap", riesz_gap},
          {"biorthogonality", biorthogonality},
          {"interpolation", interpolation}};
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const {
  return fnv1a_hex(echo.dump() + "\n" + tol.to_json().dump() + "\n" + kCodeVersion);
}

RunConfig parse_config(const json& j, double tol_scale, const std::filesystem::path& base_dir) {
  if (!(tol_scale > 0.0) || !std::isfinite(tol_scale)) throw ConfigError("--tol-scale must be a positive number");
  check_keys(j, "config",
             {"scenario", "points", "span", "cover", "displacement", "frame", "riesz", "interpolate", "stages",
              "tolerances", "output"});
  RunConfig cfg;
  cfg.echo = j;

  const json& sc = need(j, "scenario", "config");
  check_keys(sc, "scenario", {"id", "mother", "phase", "band", "reg", "weight_exponent"});
  std::string id = lower(string(need(sc, "id", "scenario"), "scenario.id"));
  if (id == "affinewavelet" || id == "affine-wavelet" || id == "wavelet") id = "affine_wavelet";
  if (id != "fock" && id != "affine_wavelet" && id != "bandlimited") fail("scenario.id", "unknown scenario '" + id + "'");
  cfg.scenario.id = id;
  if (sc.contains("mother")) {
    cfg.scenario.mother = string(sc["mother"], "scenario.mother");
    try {
      parse_mother(cfg.scenario.mother);
    } catch (const std::exception& e) {
      fail("scenario.mother", e.what());
    }
  }
  if (sc.contains("phase")) {
    cfg.scenario.phase = lower(string(sc["phase"], "scenario.phase"));
    if (cfg.scenario.phase != "twisted" && cfg.scenario.phase != "conjugate" && cfg.scenario.phase != "trivial")
      fail("scenario.phase", "expected twisted, conjugate or trivial");
  }
  if (sc.contains("band")) cfg.scenario.band = positive(sc["band"], "scenario.band");
  if (sc.contains("reg")) cfg.scenario.reg = number(sc["reg"], "scenario.reg");
  if (cfg.scenario.reg < 0.0) fail("scenario.reg", "must be non-negative");
  if (sc.contains("weight_exponent")) cfg.scenario.weight_exponent = number(sc["weight_exponent"], "scenario.weight_exponent");

  stage_list(cfg, need(j, "stages", "config"));
  tolerances(cfg.tol, j.contains("tolerances") ? j["tolerances"] : json(), tol_scale);
  cfg.output = string(need(j, "output", "config"), "output");
  if (cfg.output.empty()) fail("output", "must not be empty");

  cfg.points = point_directive(need(j, "points", "config"), "points", base_dir);
  if (j.contains("span")) {
    cfg.span = point_directive(j["span"], "span", base_dir);
    if (cfg.span->kind == "near_uniform") fail("span.kind", "the span needs an explicit atom set");
  }
  if (j.contains("cover")) {
    const json& c = j["cover"];
    check_keys(c, "cover", {"u", "window", "resolution", "candidates"});
    CoverSettings s;
    s.u = box(need(c, "u", "cover"), "cover.u");
    s.window = box(need(c, "window", "cover"), "cover.window");
    if (c.contains("resolution")) s.resolution = int_pair(c["resolution"], "cover.resolution", 1);
    if (c.contains("candidates")) s.candidates = integer(c["candidates"], "cover.candidates", 1);
    cfg.cover = s;
  }
  if (j.contains("displacement")) {
    const json& d = j["displacement"];
    check_keys(d, "displacement", {"half_extent", "half_count"});
    cfg.displacement_extent = pair(need(d, "half_extent", "displacement"), "displacement.half_extent");
    cfg.displacement_count = int_pair(need(d, "half_count", "displacement"), "displacement.half_count", 1);
  }
  if (j.contains("frame")) {
    const json& f = j["frame"];
    check_keys(f, "frame", {"method", "radius", "dense_fallback", "random_vectors", "seed", "minimality_trials"});
    if (f.contains("method")) cfg.frame.method = lower(string(f["method"], "frame.method"));
    if (cfg.frame.method != "dual" && cfg.frame.method != "tight" && cfg.frame.method != "canonical")
      fail("frame.method", "expected dual, tight or canonical");
    if (f.contains("radius")) cfg.frame.radius = positive(f["radius"], "frame.radius");
    if (f.contains("dense_fallback")) cfg.frame.dense_fallback = boolean(f["dense_fallback"], "frame.dense_fallback");
    if (f.contains("random_vectors")) cfg.frame.random_vectors = integer(f["random_vectors"], "frame.random_vectors", 1);
    if (f.contains("seed")) cfg.frame.seed = static_cast<std::uint64_t>(integer(f["seed"], "frame.seed", 0));
    if (f.contains("minimality_trials"))
      cfg.frame.minimality_trials = integer(f["minimality_trials"], "frame.minimality_trials", 0);
  }
  if (j.contains("riesz")) {
    const json& r = j["riesz"];
    check_keys(r, "riesz", {"method", "separation", "dense_fallback"});
    if (r.contains("method")) cfg.riesz.method = lower(string(r["method"], "riesz.method"));
    if (cfg.riesz.method != "biorthogonal" && cfg.riesz.method != "orthonormal")
      fail("riesz.method", "expected biorthogonal or orthonormal");
    if (r.contains("separation")) cfg.riesz.separation = positive(r["separation"], "riesz.separation");
    if (r.contains("dense_fallback")) cfg.riesz.dense_fallback = boolean(r["dense_fallback"], "riesz.dense_fallback");
  }
  if (j.contains("interpolate")) {
    const json& p = j["interpolate"];
    check_keys(p, "interpolate", {"window", "resolution"});
    if (p.contains("window")) cfg.interpolate_window = box(p["window"], "interpolate.window");
    if (p.contains("resolution")) cfg.interpolate_resolution = int_pair(p["resolution"], "interpolate.resolution", 1);
  }

  const bool needs_frame = std::count(cfg.stages.begin(), cfg.stages.end(), "build-frame") > 0;
  if (needs_frame && !cfg.span) fail("span", "build-frame needs a span atom set");
  const bool lattice = cfg.points.kind == "lattice" && cfg.points.jitter == 0.0;
  const bool weighted = lattice || cfg.points.kind == "affine_lattice";
  if (needs_frame && cfg.frame.method == "canonical" && !cfg.cover)
    fail("cover", "the canonical dual needs cover settings for the uniformity bound");
  if (needs_frame && !weighted && !cfg.cover) fail("cover", "frame weights of a non-lattice family come from a cover");
  if (cfg.points.kind == "near_uniform" && !cfg.cover) fail("cover", "near_uniform needs cover settings");
  if (cfg.scenario.id == "affine_wavelet" && (cfg.points.kind == "lattice"))
    fail("points.kind", "square lattices are not defined on the affine group");
  if (cfg.scenario.id != "affine_wavelet" && cfg.points.kind == "affine_lattice")
    fail("points.kind", "affine lattices need the affine_wavelet scenario");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, double tol_scale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, tol_scale, path.parent_path());
}

void override_near_uniform(RunConfig& cfg, double eps) {
  if (!(eps > 0.0)) throw ConfigError("--near-uniform needs a positive epsilon");
  if (!cfg.cover) throw ConfigError("--near-uniform needs cover settings in the config");
  cfg.points = PointDirective{};
  cfg.points.kind = "near_uniform";
  cfg.points.eps = eps;
  cfg.echo["points"] = {{"kind", "near_uniform"}, {"eps", eps}};
}

}  // namespace kframe::cli
