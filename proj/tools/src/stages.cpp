#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kframe/io.hpp"
#include "kframe_cli/cli.hpp"

namespace kframe::cli {

namespace fs = std::filesystem;

namespace {

// ---- report helpers ----

json claim(double value, double tol, const std::string& window, const std::string& relation = "<=") {
  json j;
  j["value"] = std::isfinite(value) ? json(value) : json(format_double(value));
  j["tol"] = tol;
  j["relation"] = relation;
  j["window"] = window;
  return j;
}

json number_or_string(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

struct Stage {
  std::string name;
  json report = json::object();
  std::vector<GateResult> gates;
  std::vector<std::string> artifacts;

  void gate(const std::string& gate_name, bool pass, const std::string& detail) {
    gates.push_back({gate_name, pass, detail});
  }
};

std::string fmt(double v) { return format_double(v); }

std::string window_text(const QuadratureGrid& g) { return g.describe(); }

// ---- scenario setup ----

struct Setup {
  GroupSpec group;
  Kernel kernel;
  std::optional<WaveletSpec> wavelet;
};

Setup make_setup(const ScenarioSettings& s) {
  Setup out;
  if (s.id == "fock") {
    const FockPhase ph = s.phase == "trivial"     ? FockPhase::Trivial
                         : s.phase == "conjugate" ? FockPhase::Conjugate
                                                  : FockPhase::Twisted;
    out.kernel = fock_kernel(ph);
  } else if (s.id == "bandlimited") {
    out.kernel = bandlimited_kernel(s.band, s.reg);
  } else {
    out.wavelet = wavelet_spec(parse_mother(s.mother));
    out.kernel = wavelet_kernel(*out.wavelet);
  }
  out.group = out.kernel.group;
  return out;
}

GridFunction scenario_envelope(const ScenarioSettings& s, const Setup& setup, GridPtr disp) {
  if (s.id == "fock") return fock_envelope(disp);
  if (s.id == "bandlimited")
    return radial_envelope(disp, [&](double r) { return bandlimited_profile(s.band, s.reg, r); });
  return wavelet_envelope(*setup.wavelet, disp);
}

GridPtr displacement_grid(const RunConfig& cfg, const GroupSpec& g) {
  if (g.dim() == 1)
    return QuadratureGrid::centered(g, {cfg.displacement_extent[0], 0.5}, {cfg.displacement_count[0], 0}, false);
  return QuadratureGrid::centered(g, cfg.displacement_extent, cfg.displacement_count, false);
}

Window to_window(const Box& b) {
  Window w;
  w.lo = b.lo;
  w.hi = b.hi;
  return w;
}

GridPtr cover_grid(const CoverSettings& c, const GroupSpec& g) {
  std::array<int, 2> res = c.resolution;
  Window w = to_window(c.window);
  if (g.dim() == 1) {
    res[1] = 1;
    w.lo[1] = 0.0;
    w.hi[1] = 1.0;
  }
  return QuadratureGrid::make(g, w, res);
}

Neighborhood cover_u(const CoverSettings& c) { return Neighborhood::box(c.u.lo, c.u.hi, Edges::HalfOpen); }

PointFamily lattice_family(const PointDirective& d, const GroupSpec& g) {
  PointFamily f = square_lattice(g, d.spacing, d.half_width);
  if (d.jitter == 0.0) return f;
  std::mt19937_64 rng(d.seed);
  std::uniform_real_distribution<double> u(-d.jitter, d.jitter);
  std::vector<GroupPoint> pts;
  for (const auto& p : f.points()) {
    GroupPoint q = p;
    q[0] += u(rng);
    if (g.dim() == 2) q[1] += u(rng);
    pts.push_back(q);
  }
  return PointFamily(g, std::move(pts));
}

PointFamily plain_family(const PointDirective& d, const GroupSpec& g) {
  if (d.kind == "lattice") return lattice_family(d, g);
  if (d.kind == "affine_lattice") return affine_lattice(d.a, d.b, to_window(d.window));
  if (d.kind == "file") {
    std::vector<Column> cols;
    try {
      cols = read_csv(d.path.string());
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    if (g.dim() == 1 && std::none_of(cols.begin(), cols.end(), [](const Column& c) { return c.name == "x1"; }))
      cols.push_back({"x1", std::vector<double>(cols.empty() ? 0 : cols.front().data.size(), 0.0)});
    try {
      PointFamily f = points_from_columns(g, cols);
      for (const auto& p : f.points()) g.require_valid(p);
      return f;
    } catch (const std::exception& e) {
      throw ConfigError(d.path.string() + ": " + e.what());
    }
  }
  if (d.kind == "explicit") {
    std::vector<GroupPoint> pts;
    for (const auto& p : d.points) {
      GroupPoint q(p[0], p[1]);
      try {
        g.require_valid(q);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("points: ") + e.what());
      }
      pts.push_back(q);
    }
    return PointFamily(g, std::move(pts));
  }
  throw ConfigError("point directive '" + d.kind + "' needs the build-points stage");
}

// Cell measure for the lattice directives, zero otherwise.
double lattice_weight(const PointDirective& d, const GroupSpec& g) {
  if (d.kind == "lattice" && d.jitter == 0.0) return square_cell(g, d.spacing).measure(g);
  if (d.kind == "affine_lattice") return affine_lattice_cell(d.a, d.b).measure(g);
  return 0.0;
}

// ---- stage files ----

fs::path stage_file(const RunConfig& cfg, const std::string& stage) { return cfg.output / ("stage_" + stage + ".json"); }

json load_stage(const RunConfig& cfg, const std::string& stage) {
  const fs::path p = stage_file(cfg, stage);
  std::ifstream in(p);
  if (!in) throw MissingStage(stage);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error&) {
    throw MissingStage(stage);
  }
  if (j.value("config_hash", "") != cfg.hash()) throw MissingStage(stage);
  return j;
}

bool has_stage(const RunConfig& cfg, const std::string& stage) {
  try {
    load_stage(cfg, stage);
    return true;
  } catch (const MissingStage&) {
    return false;
  }
}

std::vector<Column> read_artifact(const RunConfig& cfg, const std::string& file, const std::string& stage) {
  try {
    return read_columns((cfg.output / file).string());
  } catch (const FormatError&) {
    throw MissingStage(stage);
  }
}

struct Family {
  PointFamily points;
  std::vector<double> tau;
};

Family load_family(const RunConfig& cfg, const GroupSpec& g) {
  load_stage(cfg, "build-points");
  const auto cols = read_artifact(cfg, "points.kfcol", "build-points");
  Family f;
  f.points = points_from_columns(g, cols);
  f.tau = find_column(cols, "tau").data;
  return f;
}

void write_system(const RunConfig& cfg, const std::string& file, const VectorSystem& s) {
  const Eigen::MatrixXcd c = s.dense_coeffs();
  Column re{"re", {}}, im{"im", {}};
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      re.data.push_back(c(i, j).real());
      im.data.push_back(c(i, j).imag());
    }
  std::ostringstream meta;
  meta << "atoms " << c.rows() << " members " << c.cols() << " kind " << kind_name(s.kind);
  write_columns((cfg.output / file).string(), {re, im}, meta.str());
}

VectorSystem read_system(const RunConfig& cfg, const std::string& file, const std::string& stage, const Kernel& k,
                         const PointFamily& index, const std::vector<GroupPoint>& atoms, SystemKind kind) {
  std::string meta;
  std::vector<Column> cols;
  try {
    cols = read_columns((cfg.output / file).string(), &meta);
  } catch (const FormatError&) {
    throw MissingStage(stage);
  }
  const auto& re = find_column(cols, "re").data;
  const auto& im = find_column(cols, "im").data;
  const auto rows = static_cast<Eigen::Index>(atoms.size());
  const auto members = static_cast<Eigen::Index>(index.size());
  if (static_cast<Eigen::Index>(re.size()) != rows * members) throw MissingStage(stage);
  VectorSystem s;
  s.index = index;
  s.kind = kind;
  s.kernel = k;
  s.atoms = atoms;
  s.coeffs.resize(rows, members);
  for (Eigen::Index j = 0; j < members; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto n = static_cast<std::size_t>(j * rows + i);
      s.coeffs(i, j) = cplx(re[n], im[n]);
    }
  return s;
}

void write_eigenvalues(const fs::path& path, const Eigen::VectorXd& ev) {
  Column idx{"index", {}}, val{"eigenvalue", {}};
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    idx.data.push_back(static_cast<double>(i));
    val.data.push_back(ev(i));
  }
  write_csv(path.string(), {idx, val});
}

// Maximum of |f| over distance shells of one cell width.
std::vector<Column> decay_curve(const GridFunction& f) {
  const GroupSpec& g = f.group();
  const auto st = f.grid->step();
  const double width = g.dim() == 2 ? std::min(st[0], st[1]) : st[0];
  std::map<long, double> shells;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const long s = std::lround(g.dist(f.grid->node(i)) / width);
    double& m = shells[s];
    m = std::max(m, std::abs(f.values(static_cast<Eigen::Index>(i))));
  }
  Column d{"distance", {}}, m{"max_envelope", {}};
  for (const auto& [s, v] : shells) {
    d.data.push_back(static_cast<double>(s) * width);
    m.data.push_back(v);
  }
  return {d, m};
}

void record_failure(Stage& st, const GateFailure& e) {
  st.report["error"] = e.what();
  st.gate(e.gate, false, e.what());
}

// ---- certify-kernel ----

struct KernelProbe {
  GridPtr samples;
  std::vector<GroupPoint> offsets;
  std::vector<GroupPoint> probes;
  GridPtr local;
};

KernelProbe kernel_probe(const ScenarioSettings& s, const GroupSpec& g) {
  KernelProbe p;
  const std::vector<double> sizes{0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625};
  if (s.id == "fock") {
    p.samples = QuadratureGrid::make(g, Window{{-3.0, -3.0}, {3.0, 3.0}}, {12, 12});
    for (double d : sizes) p.offsets.emplace_back(d, 0.5 * d);
    // Far probes expose phase defects that grow with |y|.
    p.probes = {{1.0, 1.0}, {3.0, -2.0}, {-4.0, 2.0}, {100.0, 0.0}, {0.0, 100.0}};
    p.local = QuadratureGrid::centered(g, {5.0, 5.0}, {20, 20}, false);
  } else if (s.id == "bandlimited") {
    p.samples = QuadratureGrid::make(g, Window{{-5.0, 0.0}, {5.0, 1.0}}, {40, 1});
    for (double d : sizes) p.offsets.emplace_back(d);
    p.probes = {GroupPoint(0.0), GroupPoint(3.0), GroupPoint(-40.0)};
    p.local = QuadratureGrid::centered(g, {20.0, 0.5}, {800, 0}, false);
  } else {
    p.samples = QuadratureGrid::make(g, Window{{-2.0, 0.5}, {2.0, 2.0}}, {12, 12});
    for (double d : sizes) p.offsets.emplace_back(d, std::exp(0.5 * d));
    p.probes = {{0.0, 1.0}, {1.0, 2.0}, {-2.0, 0.5}};
    p.local = QuadratureGrid::centered(g, {6.0, 4.0}, {24, 16}, false);
  }
  return p;
}

struct LocOutcome {
  std::vector<LocStep> sweep;
  std::vector<LocStep> weighted_sweep;
  double growth = 0.0;
  double weighted_growth = 0.0;
  GridFunction theta;
  double dominance = 0.0;  // max |k(x,y)| - Theta(y^-1 x) over sample pairs (wavelet only)
  std::string window;
};

double growth_of(const std::vector<LocStep>& s) {
  const double a = s[s.size() - 2].norm, b = s.back().norm;
  return b > 0.0 && std::isfinite(b) ? (b - a) / b : std::numeric_limits<double>::infinity();
}

LocOutcome kernel_loc(const ScenarioSettings& s, const Setup& setup, const QuadratureGrid& samples, double growth_tol) {
  LocOutcome out;
  const Weight w = Weight::constant();
  const Weight wp = Weight::polynomial(setup.group, s.weight_exponent);
  if (s.id != "affine_wavelet") {
    const bool fock = s.id == "fock";
    const std::vector<double> widths = fock ? std::vector<double>{3, 4, 5, 6} : std::vector<double>{4, 8, 16, 32};
    const double step = fock ? 0.5 : 0.05;
    LocReport r = loc_certificate(setup.kernel, w, widths, step, growth_tol);
    LocReport rp = loc_certificate(setup.kernel, wp, widths, step, growth_tol);
    out.sweep = r.sweep;
    out.weighted_sweep = rp.sweep;
    out.theta = r.fit.theta;
    out.window = r.fit.theta.grid->describe();
  } else {
    // The kernel depends on y^-1 x only; the closed-form cell envelope is swept
    // over windows doubling in b and growing by one in log a.
    const GroupSpec& g = setup.group;
    const std::vector<std::pair<double, double>> windows{{4, 2}, {8, 3}, {16, 4}, {32, 5}, {64, 6}};
    const double sb = 1.0, ss = 0.5;
    for (auto [b, sl] : windows) {
      GridPtr grid = QuadratureGrid::centered(g, {b + 0.5 * sb, sl + 0.5 * ss},
                                              {static_cast<int>(std::lround(b / sb)), static_cast<int>(std::lround(sl / ss))},
                                              false);
      GridFunction th = wavelet_envelope(*setup.wavelet, grid);
      out.sweep.push_back({b, amalgam_norms(th, w).norm_two_sided});
      out.weighted_sweep.push_back({b, amalgam_norms(th, wp).norm_two_sided});
      out.theta = th;
    }
    out.window = out.theta.grid->describe();
    out.dominance = -std::numeric_limits<double>::infinity();
    for (const auto& x : samples.nodes())
      for (const auto& y : samples.nodes())
        out.dominance = std::max(out.dominance, std::abs(setup.kernel(x, y)) - out.theta.bound_at(g.mul(g.inv(y), x)));
  }
  out.growth = growth_of(out.sweep);
  out.weighted_growth = growth_of(out.weighted_sweep);
  return out;
}

json sweep_json(const std::vector<LocStep>& s) {
  json a = json::array();
  for (const auto& st : s) a.push_back({{"half_width", st.half_width}, {"norm", number_or_string(st.norm)}});
  return a;
}

void stage_certify_kernel(const RunConfig& cfg, Stage& st) {
  const auto& s = cfg.scenario;
  Setup setup;
  try {
    setup = make_setup(s);
  } catch (const KernelInvalid& e) {
    st.report["error"] = e.what();
    st.gate("certify_kernel.admissible", false, e.what());
    return;
  }
  const GroupSpec& g = setup.group;
  st.report["kernel"] = setup.kernel.label;
  st.report["group"] = g.name();
  if (setup.wavelet) {
    const Admissibility adm = check_admissible(setup.wavelet->psi_hat);
    st.report["admissibility"] = {{"constant", adm.constant},
                                  {"inner_gap", claim(adm.inner_gap, 1e-4 * adm.constant, "frequency [1e-6, 1e-3]")},
                                  {"calderon", setup.wavelet->calderon}};
    st.gate("certify_kernel.admissible", adm.admissible, "inner gap " + fmt(adm.inner_gap));
  }
  const KernelProbe probe = kernel_probe(s, g);
  const std::string sample_window = window_text(*probe.samples);

  BdReport bd;
  try {
    bd = check_bd(setup.kernel, *probe.samples, cfg.tol.bd_floor);
  } catch (const KernelInvalid& e) {
    st.report["error"] = e.what();
    st.gate("certify_kernel.bd", false, e.what());
    return;
  }
  st.report["bd"] = {{"alpha", claim(bd.alpha, bd.floor, sample_window, ">")},
                     {"beta", claim(bd.beta, bd.floor, sample_window, ">")},
                     {"diagonal_spread", bd.beta - bd.alpha}};
  st.gate("certify_kernel.bd", bd.pass, "alpha " + fmt(bd.alpha) + " floor " + fmt(bd.floor));

  std::vector<GroupPoint> subset;
  const std::size_t stride = std::max<std::size_t>(1, (probe.samples->size() + 49) / 50);
  for (std::size_t i = 0; i < probe.samples->size(); i += stride) subset.push_back(probe.samples->node(i));
  const SanityReport san = kernel_sanity(setup.kernel, subset);
  st.report["sanity"] = {{"hermitian_gap", claim(san.hermitian_gap, cfg.tol.hermitian, sample_window)},
                         {"min_eigen_ratio", claim(san.min_eig_ratio, -1e-8, sample_window, ">=")},
                         {"points", subset.size()}};
  st.gate("certify_kernel.sanity", san.pass && san.hermitian_gap <= cfg.tol.hermitian,
          "hermitian gap " + fmt(san.hermitian_gap) + " min eigen ratio " + fmt(san.min_eig_ratio));

  const LocOutcome loc = kernel_loc(s, setup, *probe.samples, cfg.tol.loc_growth);
  st.report["loc"] = {{"sweep", sweep_json(loc.sweep)},
                      {"growth", claim(loc.growth, cfg.tol.loc_growth, loc.window)},
                      {"weight", "constant"}};
  st.report["loc_weighted"] = {{"sweep", sweep_json(loc.weighted_sweep)},
                               {"growth", claim(loc.weighted_growth, cfg.tol.loc_growth, loc.window)},
                               {"weight", "(1 + dist)^" + fmt(s.weight_exponent)}};
  st.gate("certify_kernel.loc", loc.growth <= cfg.tol.loc_growth, "windowed norm growth " + fmt(loc.growth));
  st.gate("certify_kernel.loc_weighted", loc.weighted_growth <= cfg.tol.loc_growth,
          "windowed norm growth " + fmt(loc.weighted_growth));
  if (setup.wavelet) {
    st.report["loc"]["dominance"] = claim(loc.dominance, cfg.tol.soundness, sample_window);
    st.gate("certify_kernel.envelope_dominance", loc.dominance <= cfg.tol.soundness,
            "max excess " + fmt(loc.dominance));
  }
  const double theta_l2 = l2_norm_squared(loc.theta);
  st.report["diagonal_vs_envelope"] = {{"beta", bd.beta}, {"theta_l2_squared", theta_l2}, {"holds", bd.beta <= theta_l2}};

  const WucReport wuc = check_wuc(setup.kernel, probe.offsets, probe.probes, *probe.local, cfg.tol.wuc);
  json eta = json::array();
  for (std::size_t i = 0; i < wuc.eta.size(); ++i)
    eta.push_back({{"offset", wuc.offset_size[i]}, {"eta", wuc.eta[i]}});
  st.report["wuc"] = {{"profile", eta},
                      {"monotone", wuc.monotone},
                      {"smallest", claim(wuc.eta.back(), cfg.tol.wuc, window_text(*probe.local))},
                      {"phase", setup.kernel.phase ? s.phase : std::string("trivial")}};
  st.gate("certify_kernel.wuc", wuc.pass, "eta " + fmt(wuc.eta.back()) + (wuc.monotone ? "" : ", not monotone"));

  write_csv((cfg.output / "kernel_envelope.csv").string(), grid_function_columns(loc.theta));
  Column hw{"half_width", {}}, nm{"norm", {}}, wn{"weighted_norm", {}};
  for (std::size_t i = 0; i < loc.sweep.size(); ++i) {
    hw.data.push_back(loc.sweep[i].half_width);
    nm.data.push_back(loc.sweep[i].norm);
    wn.data.push_back(loc.weighted_sweep[i].norm);
  }
  write_csv((cfg.output / "loc_sweep.csv").string(), {hw, nm, wn});
  write_csv((cfg.output / "wuc_profile.csv").string(), {{"offset", wuc.offset_size}, {"eta", wuc.eta}});
  st.artifacts = {"kernel_envelope.csv", "loc_sweep.csv", "wuc_profile.csv"};
}

// ---- build-points ----

void stage_build_points(const RunConfig& cfg, Stage& st) {
  const Setup setup = make_setup(cfg.scenario);
  const GroupSpec& g = setup.group;
  PointFamily lambda;
  std::vector<double> tau;
  std::optional<DisjointCover> cover;
  GridPtr grid;
  Neighborhood u;
  if (cfg.cover) {
    grid = cover_grid(*cfg.cover, g);
    u = cover_u(*cfg.cover);
  }
  std::vector<DisjointCover> extra;
  if (cfg.points.kind == "near_uniform") {
    NearUniformResult nu;
    try {
      nu = near_uniform_set(u, cfg.points.eps, grid);
    } catch (const NotDenseError& e) {
      st.report["error"] = e.what();
      st.gate("build_points.dense", false, e.what());
      return;
    }
    lambda = nu.points;
    extra.push_back(nu.cover);
    st.report["near_uniform"] = {{"eps", cfg.points.eps},
                                 {"n", nu.n},
                                 {"seeds", nu.seeds},
                                 {"ratio_bound", nu.ratio_bound},
                                 {"achieved_ratio", nu.achieved_ratio},
                                 {"quantization_slack", nu.quantization_slack}};
  } else {
    lambda = plain_family(cfg.points, g);
  }
  if (lambda.empty()) {
    st.gate("build_points.nonempty", false, "the point family is empty");
    return;
  }
  st.gate("build_points.nonempty", true, std::to_string(lambda.size()) + " points");
  st.report["count"] = lambda.size();
  st.report["kind"] = cfg.points.kind;
  st.report["relative_separation"] = relative_separation(lambda);

  if (grid) {
    const std::string win = window_text(*grid);
    const DensityReport dens = is_dense(lambda, u, *grid);
    st.report["dense"] = {{"value", dens.dense}, {"uncovered_nodes", dens.uncovered.size()}, {"window", win},
                          {"u", u.describe()}};
    st.gate("build_points.dense", dens.dense, std::to_string(dens.uncovered.size()) + " uncovered nodes");
    if (!dens.dense) return;
    const UniformityReport ur = uniformity(lambda, u, grid, cfg.cover->candidates, extra);
    st.report["uniformity"] = {{"bound", claim(ur.bound, 1.0 + cfg.tol.uniformity, win)},
                               {"covers_tried", ur.covers_tried},
                               {"rebalanced", ur.rebalanced},
                               {"cover_hash", fnv1a_hex(std::to_string(ur.best.hash()))}};
    cover = ur.best;
    if (cfg.points.kind == "near_uniform")
      st.gate("build_points.near_uniform", ur.bound <= 1.0 + cfg.points.eps,
              "uniformity " + fmt(ur.bound) + " vs 1 + " + fmt(cfg.points.eps));
  }

  const double cell = lattice_weight(cfg.points, g);
  if (cell > 0.0) {
    tau.assign(lambda.size(), cell);
    st.report["weights"] = {{"source", "lattice cell"}, {"value", cell}};
  } else if (cover) {
    tau = cover->measures;
    st.report["weights"] = {{"source", "cover measures"}};
  } else {
    tau.assign(lambda.size(), 0.0);
    st.report["weights"] = {{"source", "none"}};
  }

  auto cols = point_columns(lambda);
  cols.push_back({"tau", tau});
  write_csv((cfg.output / "points.csv").string(), cols);
  write_columns((cfg.output / "points.kfcol").string(), cols, "points " + std::to_string(lambda.size()));
  st.artifacts = {"points.csv", "points.kfcol"};
  if (cover) {
    const auto cc = cover_columns(*cover);
    write_csv((cfg.output / "cover.csv").string(), cc);
    write_columns((cfg.output / "cover.kfcol").string(), cc);
    st.artifacts.push_back("cover.csv");
    st.artifacts.push_back("cover.kfcol");
  }
}

// ---- build-frame ----

void stage_build_frame(const RunConfig& cfg, Stage& st) {
  const Setup setup = make_setup(cfg.scenario);
  const GroupSpec& g = setup.group;
  const json points_stage = load_stage(cfg, "build-points");
  const Family fam = load_family(cfg, g);
  const PointFamily atoms = plain_family(*cfg.span, g);
  auto span = std::make_shared<const KernelSpan>(setup.kernel, atoms.points());
  GridPtr disp = displacement_grid(cfg, g);
  auto ctx = std::make_shared<const SpanContext>(span, disp);
  const GridFunction theta = scenario_envelope(cfg.scenario, setup, disp);
  const std::string dwin = window_text(*disp);

  st.report["span"] = {{"atoms", atoms.size()}, {"rank", span->rank()}, {"truncation", span->truncation()}};
  st.report["displacement"] = dwin;

  const AlmostTight at = almost_tight_frame(*span, fam.points, fam.tau);
  st.report["frame_bounds"] = {{"lower", at.report.lower},
                               {"upper", at.report.upper},
                               {"deviation", at.report.deviation()},
                               {"ratio", number_or_string(at.report.ratio())},
                               {"dimension", at.report.dimension},
                               {"members", at.report.members}};
  st.gate("build_frame.frame", at.report.is_frame(), "lower bound " + fmt(at.report.lower));
  {
    const Eigen::MatrixXcd a = span->kernel_coords(fam.points.points());
    Eigen::VectorXd t(static_cast<Eigen::Index>(fam.tau.size()));
    for (std::size_t i = 0; i < fam.tau.size(); ++i) t(static_cast<Eigen::Index>(i)) = fam.tau[i];
    const Eigen::MatrixXcd s = a * t.cast<cplx>().asDiagonal() * a.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    write_eigenvalues(cfg.output / "frame_eigenvalues.csv", es.eigenvalues());
    st.artifacts.push_back("frame_eigenvalues.csv");
  }
  if (!at.report.is_frame()) return;

  DualOptions opt;
  opt.radius = cfg.frame.radius;
  opt.threshold = cfg.tol.decay;
  opt.dense_fallback = cfg.frame.dense_fallback;
  opt.random_vectors = cfg.frame.random_vectors;
  opt.seed = cfg.frame.seed;
  DualResult r;
  try {
    if (cfg.frame.method == "dual") {
      r = dual_frame_molecules(ctx, fam.points, fam.tau, theta, opt);
    } else if (cfg.frame.method == "tight") {
      r = tight_frame_molecules(ctx, fam.points, fam.tau, theta, opt);
    } else {
      const auto cc = read_artifact(cfg, "cover.kfcol", "build-points");
      DisjointCover cover;
      cover.grid = cover_grid(*cfg.cover, g);
      for (double m : find_column(cc, "member").data) cover.assignment.push_back(static_cast<int>(m));
      cover.measures = fam.tau;
      const double bound = points_stage["report"]["uniformity"]["bound"]["value"].is_number()
                               ? points_stage["report"]["uniformity"]["bound"]["value"].get<double>()
                               : std::numeric_limits<double>::infinity();
      st.report["uniformity"] = claim(bound, 1.0 + cfg.tol.uniformity, cover.grid->describe());
      r = canonical_dual(ctx, fam.points, cover, bound, cfg.tol.uniformity, theta, opt);
    }
  } catch (const GateFailure& e) {
    record_failure(st, e);
    return;
  }
  st.report["method"] = cfg.frame.method;
  st.report["gate"] = {{"status", r.gate_status},
                       {"gap", r.gate_gap},
                       {"epsilon", r.gate_epsilon},
                       {"dense_fallback", r.dense_fallback}};
  if (r.holo)
    st.report["holo"] = {{"terms", r.holo->terms},
                         {"tail", r.holo->tail},
                         {"soundness_worst", r.holo->soundness.worst_excess},
                         {"soundness_pass", r.holo->soundness.pass}};
  const std::string res_window = std::to_string(cfg.frame.random_vectors) + " random span vectors";
  st.report["residual"] = claim(r.residual, cfg.tol.residual, res_window);
  st.report["output_frame"] = {{"lower", r.output_frame.lower}, {"upper", r.output_frame.upper}};
  st.gate("build_frame.residual", r.residual <= cfg.tol.residual, "residual " + fmt(r.residual));
  if (r.holo) st.gate("build_frame.soundness", r.holo->soundness.pass, "worst excess " + fmt(r.holo->soundness.worst_excess));

  if (cfg.frame.method == "canonical" && cfg.frame.minimality_trials > 0) {
    DualOptions o2 = opt;
    o2.dense_fallback = true;
    const DualResult other = dual_frame_molecules(ctx, fam.points, fam.tau, theta, o2);
    const MinimalityReport m =
        coefficient_minimality(*span, r.coords, other.coords, cfg.frame.minimality_trials, cfg.frame.seed);
    st.report["minimality"] = {{"trials", m.trials}, {"violations", m.violations}, {"worst_ratio", m.worst_ratio}};
    st.gate("build_frame.minimality", m.violations == 0, std::to_string(m.violations) + " violations");
  }
  write_system(cfg, "system_frame.kfcol", r.system);
  st.artifacts.push_back("system_frame.kfcol");
}

// ---- build-riesz ----

Neighborhood separation_cell(double s) { return Neighborhood::box({-0.5 * s, -0.5 * s}, {0.5 * s, 0.5 * s}, Edges::HalfOpen); }

void stage_build_riesz(const RunConfig& cfg, Stage& st) {
  const Setup setup = make_setup(cfg.scenario);
  const GroupSpec& g = setup.group;
  const Family fam = load_family(cfg, g);
  GridPtr disp = displacement_grid(cfg, g);
  const GridFunction theta = scenario_envelope(cfg.scenario, setup, disp);
  const Neighborhood sep = separation_cell(cfg.riesz.separation);
  if (!is_separated(fam.points, sep)) {
    st.gate("build_riesz.separated", false, "family is not separated by " + sep.describe());
    return;
  }
  const RieszResult rr = almost_orthogonal_riesz(setup.kernel, fam.points, sep);
  const std::string fam_window = std::to_string(fam.points.size()) + " points";
  st.report["riesz_bounds"] = {{"lower", rr.report.lower}, {"upper", rr.report.upper}};
  st.report["gram_gap"] = claim(rr.gap, cfg.tol.riesz_gap, fam_window);
  st.gate("build_riesz.gap", rr.gap <= cfg.tol.riesz_gap, "gap " + fmt(rr.gap));
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rr.system.gram(), Eigen::EigenvaluesOnly);
    write_eigenvalues(cfg.output / "riesz_gram_eigenvalues.csv", es.eigenvalues());
    st.artifacts.push_back("riesz_gram_eigenvalues.csv");
  }
  RieszOptions opt;
  opt.dense_fallback = cfg.riesz.dense_fallback;
  BiorthogonalResult br;
  try {
    br = cfg.riesz.method == "orthonormal" ? orthonormalize(setup.kernel, fam.points, theta, opt)
                                           : biorthogonal_system(setup.kernel, fam.points, theta, opt);
  } catch (const GateFailure& e) {
    record_failure(st, e);
    return;
  }
  st.report["method"] = cfg.riesz.method;
  st.report["gate"] = {{"status", br.gate_status}, {"dense_fallback", br.dense_fallback}};
  if (br.holo) {
    st.report["gate"]["k"] = br.holo->gate.k;
    st.report["gate"]["epsilon"] = br.holo->gate.epsilon;
    st.report["gate"]["gap"] = br.holo->gap;
    st.report["holo"] = {{"terms", br.holo->terms}, {"tail", br.holo->tail}, {"soundness_pass", br.holo->soundness.pass}};
    st.gate("build_riesz.soundness", br.holo->soundness.pass, "worst excess " + fmt(br.holo->soundness.worst_excess));
  }
  st.report["biorthogonality_error"] = claim(br.error, cfg.tol.biorthogonality, fam_window);
  st.gate("build_riesz.error", br.error <= cfg.tol.biorthogonality, "error " + fmt(br.error));
  write_system(cfg, "system_riesz.kfcol", br.system);
  st.artifacts.push_back("system_riesz.kfcol");
}

// ---- certify-molecules ----

void certify_one(const RunConfig& cfg, Stage& st, const std::string& which, const VectorSystem& sys,
                 const std::vector<GroupPoint>& samples, GridPtr disp) {
  const MoleculeCertificate c =
      molecule_certify(sys, samples, disp, Weight::constant(), cfg.frame.radius, cfg.tol.decay);
  const std::string win = window_text(*disp);
  st.report[which] = {{"pairs", c.pairs},
                      {"dominance_residual", claim(c.dominance_residual, 0.0, win)},
                      {"tail_max", claim(c.tail_max, cfg.tol.decay, "distance >= " + fmt(c.radius) + " on " + win)},
                      {"norm_two_sided", c.norms.norm_two_sided}};
  st.gate("certify_molecules." + which + ".dominance", c.dominance_residual <= 0.0,
          "residual " + fmt(c.dominance_residual));
  st.gate("certify_molecules." + which + ".decay", c.tail_max <= cfg.tol.decay,
          "tail " + fmt(c.tail_max) + " at distance " + fmt(c.radius));
  write_csv((cfg.output / ("molecule_envelope_" + which + ".csv")).string(), grid_function_columns(c.phi));
  write_csv((cfg.output / ("molecule_decay_" + which + ".csv")).string(), decay_curve(c.phi));
  st.artifacts.push_back("molecule_envelope_" + which + ".csv");
  st.artifacts.push_back("molecule_decay_" + which + ".csv");
}

void stage_certify_molecules(const RunConfig& cfg, Stage& st) {
  const bool frame = has_stage(cfg, "build-frame");
  const bool riesz = has_stage(cfg, "build-riesz");
  if (!frame && !riesz) throw MissingStage("build-frame");
  const Setup setup = make_setup(cfg.scenario);
  const GroupSpec& g = setup.group;
  const Family fam = load_family(cfg, g);
  GridPtr disp = displacement_grid(cfg, g);
  std::vector<GroupPoint> span_atoms;
  if (cfg.span) span_atoms = plain_family(*cfg.span, g).points();
  if (frame) {
    const json fs = load_stage(cfg, "build-frame");
    if (!fs.value("pass", false)) {
      st.gate("certify_molecules.frame.input", false, "build-frame did not pass");
    } else {
      const VectorSystem sys =
          read_system(cfg, "system_frame.kfcol", "build-frame", setup.kernel, fam.points, span_atoms, SystemKind::Dual);
      certify_one(cfg, st, "frame", sys, span_atoms, disp);
    }
  }
  if (riesz) {
    const json rs = load_stage(cfg, "build-riesz");
    if (!rs.value("pass", false)) {
      st.gate("certify_molecules.riesz.input", false, "build-riesz did not pass");
    } else {
      const VectorSystem sys = read_system(cfg, "system_riesz.kfcol", "build-riesz", setup.kernel, fam.points,
                                           fam.points.points(), SystemKind::Biorthogonal);
      std::vector<GroupPoint> samples = fam.points.points();
      samples.insert(samples.end(), span_atoms.begin(), span_atoms.end());
      certify_one(cfg, st, "riesz", sys, samples, disp);
    }
  }
}

// ---- interpolate ----

void stage_interpolate(const RunConfig& cfg, Stage& st, const fs::path& values_csv) {
  const json rs = load_stage(cfg, "build-riesz");
  if (!rs.value("pass", false)) {
    st.gate("interpolate.input", false, "build-riesz did not pass");
    return;
  }
  const Setup setup = make_setup(cfg.scenario);
  const GroupSpec& g = setup.group;
  const Family fam = load_family(cfg, g);
  const VectorSystem sys = read_system(cfg, "system_riesz.kfcol", "build-riesz", setup.kernel, fam.points,
                                       fam.points.points(), SystemKind::Biorthogonal);
  if (values_csv.empty()) throw ConfigError("interpolate needs --values");
  std::vector<Column> cols;
  try {
    cols = read_csv(values_csv.string());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  const auto re_it = std::find_if(cols.begin(), cols.end(), [](const Column& c) { return c.name == "re"; });
  if (re_it == cols.end()) throw ConfigError(values_csv.string() + ": missing column 're'");
  const auto im_it = std::find_if(cols.begin(), cols.end(), [](const Column& c) { return c.name == "im"; });
  if (re_it->data.size() != fam.points.size())
    throw ConfigError(values_csv.string() + ": expected " + std::to_string(fam.points.size()) + " values");
  Eigen::VectorXcd a(static_cast<Eigen::Index>(fam.points.size()));
  for (std::size_t i = 0; i < fam.points.size(); ++i)
    a(static_cast<Eigen::Index>(i)) = cplx(re_it->data[i], im_it == cols.end() ? 0.0 : im_it->data[i]);
  const double lower = rs["report"]["riesz_bounds"]["lower"].get<double>();
  const Interpolant ip = interpolate(sys, a, lower);
  st.report["node_error"] = claim(ip.node_error, cfg.tol.interpolation, std::to_string(fam.points.size()) + " nodes");
  st.report["norm"] = {{"value", ip.norm}, {"bound", ip.norm_bound}};
  st.gate("interpolate.nodes", ip.node_error <= cfg.tol.interpolation, "node error " + fmt(ip.node_error));

  Window w;
  if (cfg.interpolate_window) {
    w = to_window(*cfg.interpolate_window);
  } else {
    w.lo = w.hi = fam.points[0].c;
    for (const auto& p : fam.points.points())
      for (int k = 0; k < 2; ++k) {
        w.lo[k] = std::min(w.lo[k], p[k]);
        w.hi[k] = std::max(w.hi[k], p[k]);
      }
    if (g.id() == GroupId::Affine) {
      w.lo = {w.lo[0] - 1.0, w.lo[1] / 1.5};
      w.hi = {w.hi[0] + 1.0, w.hi[1] * 1.5};
    } else {
      w.lo = {w.lo[0] - 1.0, w.lo[1] - 1.0};
      w.hi = {w.hi[0] + 1.0, w.hi[1] + 1.0};
    }
  }
  std::array<int, 2> res = cfg.interpolate_resolution;
  if (g.dim() == 1) {
    res[1] = 1;
    w.lo[1] = 0.0;
    w.hi[1] = 1.0;
  }
  GridPtr grid = QuadratureGrid::make(g, w, res);
  const Eigen::VectorXcd v = ip.evaluate(grid->nodes());
  GridFunction f(grid, v);
  write_csv((cfg.output / "interpolant.csv").string(), grid_function_columns(f));
  st.report["samples"] = grid->describe();
  st.artifacts.push_back("interpolant.csv");
}

json gates_json(const std::vector<GateResult>& gates) {
  json a = json::array();
  for (const auto& g : gates) a.push_back({{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
  return a;
}

}  // namespace

bool StageOutcome::pass() const {
  return !gates.empty() && std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return g.pass; });
}

std::optional<std::string> StageOutcome::first_failure() const {
  for (const auto& g : gates)
    if (!g.pass) return g.name;
  if (gates.empty()) return stage + ".empty";
  return std::nullopt;
}

StageOutcome run_stage(const RunConfig& cfg, const std::string& stage, const fs::path& values_csv) {
  fs::create_directories(cfg.output);
  std::error_code ec;
  fs::remove(stage_file(cfg, stage), ec);
  Stage st;
  st.name = stage;
  if (stage == "certify-kernel")
    stage_certify_kernel(cfg, st);
  else if (stage == "build-points")
    stage_build_points(cfg, st);
  else if (stage == "build-frame")
    stage_build_frame(cfg, st);
  else if (stage == "build-riesz")
    stage_build_riesz(cfg, st);
  else if (stage == "certify-molecules")
    stage_certify_molecules(cfg, st);
  else if (stage == "interpolate")
    stage_interpolate(cfg, st, values_csv);
  else
    throw ConfigError("unknown stage '" + stage + "'");

  StageOutcome out;
  out.stage = stage;
  out.gates = st.gates;
  out.report = {{"stage", stage},
                {"config_hash", cfg.hash()},
                {"pass", out.pass()},
                {"gates", gates_json(st.gates)},
                {"report", st.report},
                {"artifacts", st.artifacts}};
  std::ofstream f(stage_file(cfg, stage));
  f << out.report.dump(2) << "\n";
  return out;
}

json write_certificate(const RunConfig& cfg) {
  json cert;
  cert["schema"] = kSchema;
  cert["code_version"] = kCodeVersion;
  cert["config"] = cfg.echo;
  cert["tolerances"] = cfg.tol.to_json();
  cert["hash"] = cfg.hash();
  json stages = json::array();
  json failed = json::array();
  json names = json::array();
  std::vector<std::string> order = stage_order();
  order.push_back("interpolate");
  bool all = true;
  for (const auto& s : order) {
    json j;
    try {
      j = load_stage(cfg, s);
    } catch (const MissingStage&) {
      continue;
    }
    j.erase("config_hash");
    for (const auto& g : j["gates"])
      if (!g["pass"].get<bool>()) failed.push_back(g["name"]);
    all = all && j["pass"].get<bool>();
    names.push_back(s);
    stages.push_back(std::move(j));
  }
  cert["stages"] = stages;
  cert["summary"] = {{"pass", all && !names.empty()}, {"stages", names}, {"failed_gates", failed}};
  fs::create_directories(cfg.output);
  std::ofstream f(cfg.output / "certificate.json");
  f << cert.dump(2) << "\n";
  return cert;
}

std::string summarize(const json& c) {
  std::ostringstream os;
  os << "certificate " << c.value("schema", "?") << " (" << c.value("code_version", "?") << ")\n";
  os << "hash " << c.value("hash", "?") << "\n";
  if (c.contains("config") && c["config"].contains("scenario"))
    os << "scenario " << c["config"]["scenario"].value("id", "?") << "\n";
  for (const auto& s : c.value("stages", json::array())) {
    os << "\n[" << s.value("stage", "?") << "] " << (s.value("pass", false) ? "PASS" : "FAIL") << "\n";
    for (const auto& g : s.value("gates", json::array()))
      os << "  " << (g.value("pass", false) ? "ok   " : "FAIL ") << g.value("name", "?") << ": " << g.value("detail", "")
         << "\n";
    for (const auto& a : s.value("artifacts", json::array())) os << "  artifact " << a.get<std::string>() << "\n";
  }
  const json sum = c.value("summary", json::object());
  os << "\nsummary: " << (sum.value("pass", false) ? "PASS" : "FAIL");
  const json failed = sum.value("failed_gates", json::array());
  if (!failed.empty()) {
    os << " (failed:";
    for (const auto& f : failed) os << " " << f.get<std::string>();
    os << ")";
  }
  os << "\n";
  return os.str();
}

}  // namespace kframe::cli
