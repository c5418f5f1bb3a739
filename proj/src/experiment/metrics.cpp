#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "warmrnn/errors.hpp"
#include "warmrnn/experiment.hpp"

namespace warmrnn::experiment {

const std::vector<std::string> kTrainHeader{"epoch", "split", "loss", "accuracy", "vaa", "wall_time_s"};
const std::vector<std::string> kRlHeader{"episode", "return", "smoothed_return", "eval_return",
                                         "vaa",     "epsilon", "buffer_size"};
const std::vector<std::string> kWarmupHeader{"step", "sampled_m", "layer", "vaa_star", "loss"};
const std::vector<std::string> kProbeHeader{"step", "layer", "vaa", "vaa_star", "states", "m", "epsilon"};

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) throw ContractViolation("refusing to write an empty metric trace to " + path.string());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    if (cells.size() != header.size()) throw ContractViolation("CSV row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << out.str();
  if (!f) throw IoError("failed while writing " + path.string());
}

std::vector<std::vector<std::string>> train_rows(const std::vector<train::TraceRow>& trace) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : trace) {
    rows.push_back({std::to_string(r.epoch), r.split, format_number(r.loss), format_optional(r.accuracy),
                    format_optional(r.vaa), format_number(r.wall_time_s)});
  }
  return rows;
}

std::vector<std::vector<std::string>> rl_rows(const std::vector<drqn::EpisodeRow>& trace) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : trace) {
    rows.push_back({std::to_string(r.episode), format_number(r.episode_return), format_number(r.smoothed_return),
                    format_optional(r.eval_return), format_optional(r.vaa), format_number(r.epsilon),
                    std::to_string(r.buffer_size)});
  }
  return rows;
}

std::vector<std::vector<std::string>> warmup_rows(const std::vector<warmup::TraceRow>& trace,
                                                 const std::vector<std::size_t>& layers) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : trace) {
    if (r.vaa_star.size() != layers.size()) throw ContractViolation("warmup trace row does not match the layer list");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      rows.push_back({std::to_string(r.step), std::to_string(r.sampled_stabilization), std::to_string(layers[i]),
                      format_number(r.vaa_star[i]), format_number(r.loss)});
    }
  }
  return rows;
}

MetricStats summarize(const std::vector<double>& values) {
  MetricStats s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

nlohmann::json RunSummary::to_json(const ExperimentConfig& config) const {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : seeds) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : s.metrics)
      if (std::isfinite(v)) m[k] = v;
    runs.push_back({{"seed", s.seed}, {"status", s.status}, {"metrics", m}});
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [k, st] : metrics) agg[k] = {{"mean", st.mean}, {"std", st.std}, {"count", st.count}};
  return {
      {"schema_version", kSummarySchemaVersion},
      {"command", std::string(experiment::to_string(command))},
      {"task", std::string(experiment::to_string(config.task))},
      {"scale", config.scale},
      {"complete", seeds.size() == config.seeds.size()},
      {"config", experiment::to_json(config)},
      {"runs", runs},
      {"metrics", agg},
  };
}

std::string report(const std::filesystem::path& summary_path) {
  const nlohmann::json j = load_json_file(summary_path);
  if (!j.contains("schema_version") || j["schema_version"] != kSummarySchemaVersion) {
    throw ParseError(summary_path.string() + ": unsupported summary schema");
  }
  std::ostringstream os;
  os << j.at("command").get<std::string>() << " on " << j.at("task").get<std::string>() << " (scale "
     << j.at("scale").get<double>() << ", " << j.at("runs").size() << " seed(s)"
     << (j.at("complete").get<bool>() ? "" : ", incomplete") << ")\n";
  std::size_t width = 6;
  for (const auto& [k, v] : j.at("metrics").items()) width = std::max(width, k.size());
  for (const auto& [k, v] : j.at("metrics").items()) {
    os << "  " << std::left << std::setw(static_cast<int>(width)) << k << "  " << std::setprecision(6)
       << v.at("mean").get<double>() << " +- " << v.at("std").get<double>() << "  (n=" << v.at("count").get<std::size_t>()
       << ")\n";
  }
  for (const auto& r : j.at("runs")) {
    os << "  seed " << r.at("seed").get<std::uint64_t>() << ": " << r.at("status").get<std::string>() << "\n";
  }
  return os.str();
}

}  // namespace warmrnn::experiment
