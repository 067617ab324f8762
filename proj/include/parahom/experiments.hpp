#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parahom/csv.hpp"
#include "parahom/environment.hpp"
#include "parahom/fit.hpp"
#include "parahom/homogenized.hpp"
#include "parahom/parabolic.hpp"

namespace parahom {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "parahom-1.0.0";

const std::vector<std::string>& experiment_names();

// Corrector-side knobs for q(0,0) by extrapolation.
struct QSettings {
  int box_side = 32;
  int time_steps = 64;
  std::size_t N = 200;
  int eta_k_min = 3;
  int eta_k_max = 7;
  double tol = 1e-10;
  int max_iter = 1000;
};

// Fourier-mode decay of G_a for the direct q estimate.
struct DirectSettings {
  bool enabled = true;
  int box_side = 32;
  int mode = 2;  // ξ = 2π mode / box_side along the first axis
  double horizon = 128;
  std::size_t N = 2000;
  double t_min = 8;
  double t_max = 128;
};

struct Numerics {
  // heatkernel
  double Lambda = 0.125;
  int horizon = 256;
  int box_side = 0;  // 0 = sizing rule
  double Cd = 8.0;
  bool double_horizon = true;
  // Monte Carlo
  std::size_t N = 100;
  std::size_t batches = 16;
  QSettings q;
  DirectSettings direct;
  std::optional<std::vector<double>> a_hom;  // d x d, skips the extrapolation when given
  // rate
  std::vector<double> eps{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> times{0.25, 0.5, 1.0};
  Profile profile{ProfileKind::gaussian, 0.5, 1.0};
  double x_extent = 2.0;
  // green-compare
  HomFlavor reference = HomFlavor::continuum;
  int window = 16;  // CSV radius for G_a
  int fit_t_min = 0;  // earliest time in the bound fits; 0 = horizon / 8
  // langevin-check
  std::size_t samples = 10000;
  double relax = 20.0;
  int records = 1;
  double record_every = 5.0;
  // identity-check
  int triples = 5;
  int scaling_triples = 100;
  double id_kappa = 0.125;
  double re_eta = 0.1;
  int panels = 64;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string experiment;
  std::uint64_t seed = 1;
  std::string output_dir = "parahom-out";
  EnvironmentSpec env;
  Numerics num;
  std::string echo;  // canonical JSON of the parsed input
};

// Parse JSON text; schema errors are appended to `diags` and nullopt returned.
std::optional<ExperimentConfig> parse_config(const std::string& text, std::vector<std::string>& diags);
std::optional<ExperimentConfig> load_config(const std::filesystem::path& path, std::vector<std::string>& diags);
// Admissibility checks beyond the schema; empty when runnable.
std::vector<std::string> validate(const ExperimentConfig& cfg);
std::vector<std::string> validate_file(const std::filesystem::path& path);

struct Check {
  std::string name;
  Verdict verdict = Verdict::inconclusive;
  std::string detail;
};

struct RunManifest {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string config_echo;
  std::string artifact_version = kArtifactVersion;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, csv::Emitted>> files;  // stage, file
  std::vector<Check> checks;
  std::map<std::string, double> results;
  Verdict verdict = Verdict::inconclusive;
  std::filesystem::path manifest_path;

  int exit_code() const noexcept { return static_cast<int>(verdict); }
};

inline constexpr int kExitConfigError = 4;
inline constexpr int kExitRuntimeError = 1;

// Runs end to end, writes CSVs then manifest.json. Throws ConfigError for invalid configs and
// StageError for runtime failures.
RunManifest run(const ExperimentConfig& cfg);

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Worker count from PARAHOM_WORKERS, falling back to the OpenMP default.
int configure_workers();

}  // namespace parahom
