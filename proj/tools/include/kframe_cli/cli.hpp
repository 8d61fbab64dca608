#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kframe/frames.hpp"
#include "kframe/scenarios.hpp"

namespace kframe::cli {

using json = nlohmann::json;

inline constexpr const char* kCodeVersion = "kframe 0.1.0";
inline constexpr const char* kSchema = "kframe.certificate/1";

enum ExitCode { kOk = 0, kGateFailed = 1, kParseError = 2 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a stage finds no artifacts of a stage it depends on.
class MissingStage : public std::runtime_error {
 public:
  explicit MissingStage(const std::string& stage)
      : std::runtime_error("missing upstream stage: " + stage), stage(stage) {}
  std::string stage;
};

struct Tolerances {
  double bd_floor = 1e-8;
  double hermitian = 1e-12;
  double soundness = kSoundnessTol;
  double loc_growth = 1e-2;
  double wuc = 0.05;
  double residual = 1e-6;
  double decay = 1e-3;
  double uniformity = 0.05;
  double riesz_gap = 0.02;
  double biorthogonality = 1e-8;
  double interpolation = 1e-8;

  json to_json() const;
};

struct Box {
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{0.0, 0.0};
};

struct CoverSettings {
  Box u;
  Box window;
  std::array<int, 2> resolution{60, 60};
  int candidates = 6;
};

struct PointDirective {
  std::string kind;  // lattice | affine_lattice | near_uniform | file | explicit
  double spacing = 0.0;
  double half_width = 0.0;
  double jitter = 0.0;
  std::uint64_t seed = 1;
  double a = 0.0, b = 0.0;
  Box window;
  double eps = 0.0;
  std::filesystem::path path;
  std::vector<std::array<double, 2>> points;
};

struct ScenarioSettings {
  std::string id;  // fock | affine_wavelet | bandlimited
  std::string mother = "mexican_hat";
  std::string phase = "twisted";
  double band = 1.0;
  double reg = 0.1;
  double weight_exponent = 0.5;
};

struct FrameSettings {
  std::string method = "dual";  // dual | tight | canonical
  double radius = 4.0;
  bool dense_fallback = false;
  int random_vectors = 20;
  std::uint64_t seed = 7;
  int minimality_trials = 0;
};

struct RieszSettings {
  std::string method = "biorthogonal";  // biorthogonal | orthonormal
  double separation = 3.0;
  bool dense_fallback = false;
};

struct RunConfig {
  json echo;
  ScenarioSettings scenario;
  PointDirective points;
  std::optional<PointDirective> span;
  std::optional<CoverSettings> cover;
  std::array<double, 2> displacement_extent{6.0, 6.0};
  std::array<int, 2> displacement_count{12, 12};
  FrameSettings frame;
  RieszSettings riesz;
  std::optional<Box> interpolate_window;
  std::array<int, 2> interpolate_resolution{40, 40};
  std::vector<std::string> stages;
  Tolerances tol;
  std::filesystem::path output;

  std::string hash() const;
};

// Stages in dependency order. build-frame and build-riesz are siblings.
const std::vector<std::string>& stage_order();

RunConfig parse_config(const json& j, double tol_scale, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path, double tol_scale);
// Applies the --near-uniform override (keeps the cover settings of the config).
void override_near_uniform(RunConfig& cfg, double eps);

struct GateResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct StageOutcome {
  std::string stage;
  json report;
  std::vector<GateResult> gates;
  bool pass() const;
  std::optional<std::string> first_failure() const;
};

// Runs one stage, writing its artifacts and stage_<name>.json under cfg.output.
StageOutcome run_stage(const RunConfig& cfg, const std::string& stage, const std::filesystem::path& values_csv = {});
// Collects the stage reports matching the config hash into certificate.json.
json write_certificate(const RunConfig& cfg);
// Human readable summary of an existing certificate; no numerics are recomputed.
std::string summarize(const json& certificate);

// Stateless FNV-1a 64-bit hash.
std::string fnv1a_hex(const std::string& data);

// Entry point shared by the executable and the tests.
int main_entry(int argc, const char* const* argv);

}  // namespace kframe::cli
