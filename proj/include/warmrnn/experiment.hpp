#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "warmrnn/benchmarks.hpp"
#include "warmrnn/drqn.hpp"
#include "warmrnn/rnn.hpp"
#include "warmrnn/trainer.hpp"
#include "warmrnn/warmup.hpp"

// Config-driven experiment runner. A config is a JSON object; see README for
// the key reference. Every run writes per-seed metric CSVs, checkpoints, the
// resolved config and a summary JSON with mean and standard deviation per
// metric.
namespace warmrnn::experiment {

enum class Task { Copy, Denoise, PMnist, PLMnist, TMaze, VaaProbe, GradCheck };
enum class WarmupMode { None, Full, Double };
enum class Command { Warmup, Train, Rl, VaaProbe, GradCheck };

std::string_view to_string(Task t);
std::string_view to_string(WarmupMode m);
std::string_view to_string(Command c);
std::optional<Command> parse_command(std::string_view name);

inline constexpr int kSummarySchemaVersion = 1;
inline constexpr const char* kDataDirEnv = "WARMRNN_DATA_DIR";

struct DataConfig {
  std::size_t length = 50;            // T for copy and denoise
  std::size_t forgetting = 5;         // N for denoise
  std::size_t train_samples = 40000;
  std::size_t test_samples = 50000;
  std::size_t black_lines = 0;        // line MNIST padding
  std::uint64_t permutation_seed = 0;
  std::size_t train_limit = 0;        // MNIST subsets; 0 keeps everything
  std::size_t test_limit = 0;
  std::string directory;              // MNIST directory; falls back to the env var
  Task source = Task::Copy;           // dataset probed by the vaa-probe task
};

struct NetworkConfig {
  rnn::CellKind cell = rnn::CellKind::GRU;
  std::optional<unsigned> chrono_tmax;
  std::vector<std::size_t> layers{128};
  std::optional<double> warmed_fraction;  // double layers
};

struct ProbeTaskConfig {
  std::size_t states = 100;
  vaa::VaaConfig vaa{2000, 1e-4, 10};
};

struct ExperimentConfig {
  Task task = Task::Copy;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output = "runs/out";
  double scale = 1.0;
  DataConfig data;
  NetworkConfig network;
  WarmupMode warmup_mode = WarmupMode::None;
  warmup::WarmupConfig warmup;
  train::TrainConfig train;
  tmaze::Config maze{20, 0.98};
  drqn::DrqnConfig rl;
  ProbeTaskConfig probe;
};

// Parses and validates; ValidationError names the offending key path.
ExperimentConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

// "a.b.c=value": value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, std::string_view assignment);

// Multiplies sample counts, layer widths, epochs and episodes by `factor`
// (rounded, at least 1).
void apply_scale(ExperimentConfig& c, double factor);

// from_json followed by apply_scale with the config's own "scale" value.
ExperimentConfig resolve(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);

// Dataset of a supervised task, generated or loaded per seed.
struct TaskData {
  data::Dataset train;
  data::Dataset test;
};
TaskData build_task_data(const ExperimentConfig& c, Task task, std::uint64_t seed);
rnn::NetworkSpec network_spec(const ExperimentConfig& c, std::size_t input_dim, std::size_t output_dim);

// ---- metrics --------------------------------------------------------------

// Header plus rows, comma separated, newline terminated. Throws
// ContractViolation on an empty table (no file is created) and IoError when
// the file cannot be written.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

std::vector<std::vector<std::string>> train_rows(const std::vector<train::TraceRow>& trace);
std::vector<std::vector<std::string>> rl_rows(const std::vector<drqn::EpisodeRow>& trace);
// One row per (step, warmed layer).
std::vector<std::vector<std::string>> warmup_rows(const std::vector<warmup::TraceRow>& trace,
                                                 const std::vector<std::size_t>& layers);
extern const std::vector<std::string> kTrainHeader;
extern const std::vector<std::string> kRlHeader;
extern const std::vector<std::string> kWarmupHeader;
extern const std::vector<std::string> kProbeHeader;

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};
MetricStats summarize(const std::vector<double>& values);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | diverged
  std::map<std::string, double> metrics;
};

struct RunSummary {
  Command command = Command::Train;
  std::vector<SeedOutcome> seeds;
  std::map<std::string, MetricStats> metrics;
  nlohmann::json to_json(const ExperimentConfig& config) const;
};

// ---- runners --------------------------------------------------------------

struct GradcheckRow {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  double max_abs_gradient = 0.0;
  bool passed = false;
};
inline constexpr double kGradcheckTolerance = 1e-4;
// Gradient checks of every cell kind (width 4, length 6) and of VAA* (M = 8,
// three states) against central differences.
std::vector<GradcheckRow> run_gradchecks(std::uint64_t seed);

// Runs `command` for every seed and writes artifacts under config.output.
RunSummary run(const ExperimentConfig& config, Command command);

// Human-readable table of a summary JSON file.
std::string report(const std::filesystem::path& summary_path);

}  // namespace warmrnn::experiment
