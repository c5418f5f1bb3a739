#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "warmrnn/errors.hpp"
#include "warmrnn/experiment.hpp"

namespace warmrnn::experiment {

using nlohmann::json;

namespace {

constexpr std::pair<Task, std::string_view> kTasks[] = {
    {Task::Copy, "copy"},     {Task::Denoise, "denoise"},      {Task::PMnist, "pmnist"},       {Task::PLMnist, "plmnist"},
    {Task::TMaze, "tmaze"},   {Task::VaaProbe, "vaa-probe"},   {Task::GradCheck, "gradcheck"},
};
constexpr std::pair<WarmupMode, std::string_view> kModes[] = {
    {WarmupMode::None, "none"}, {WarmupMode::Full, "full"}, {WarmupMode::Double, "double"}};
constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::Warmup, "warmup"},      {Command::Train, "train"},         {Command::Rl, "rl"},
    {Command::VaaProbe, "vaa-probe"}, {Command::GradCheck, "gradcheck"},
};

template <class E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E v) {
  for (const auto& [e, n] : table)
    if (e == v) return n;
  return "?";
}

template <class E, std::size_t N>
std::optional<E> value_of(const std::pair<E, std::string_view> (&table)[N], std::string_view name) {
  for (const auto& [e, n] : table)
    if (n == name) return e;
  return std::nullopt;
}

// Walks one JSON object, remembering which keys were read so that unknown
// keys can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }
  ~Section() = default;

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }
  const json& at(const std::string& k) { return j_.at(k); }

  void read(const std::string& k, std::size_t& out, std::size_t min = 0) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(key(k), "expected a non-negative integer");
    out = v.get<std::size_t>();
    if (out < min) throw ValidationError(key(k), "must be >= " + std::to_string(min));
  }
  void read(const std::string& k, int& out, int min) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) throw ValidationError(key(k), "expected an integer");
    out = v.get<int>();
    if (out < min) throw ValidationError(key(k), "must be >= " + std::to_string(min));
  }
  void read(const std::string& k, double& out, double lo, double hi, bool lo_open = false) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number()) throw ValidationError(key(k), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out) || out < lo || out > hi || (lo_open && out == lo)) {
      std::ostringstream os;
      os << "must lie in " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      throw ValidationError(key(k), os.str());
    }
  }
  void read(const std::string& k, bool& out) {
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) throw ValidationError(key(k), "expected true or false");
    out = j_.at(k).get<bool>();
  }
  void read(const std::string& k, std::string& out) {
    if (!has(k)) return;
    if (!j_.at(k).is_string()) throw ValidationError(key(k), "expected a string");
    out = j_.at(k).get<std::string>();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError(key(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr double kInf = 1e300;

void read_vaa(Section& s, vaa::VaaConfig& v) {
  s.read("stabilization", v.stabilization, 1);
  s.read("epsilon", v.epsilon, 0.0, kInf, true);
  s.read("iterations", v.iterations, 1);
}

json probe_json(std::optional<std::size_t> period, std::size_t states, const vaa::VaaConfig& v) {
  json j = {{"states", states}, {"stabilization", v.stabilization}, {"epsilon", v.epsilon}, {"iterations", v.iterations}};
  if (period) j["period"] = *period;
  return j;
}

void read_adam_lr(Section& s, train::AdamConfig& a) { s.read("learning_rate", a.learning_rate, 0.0, kInf, true); }

std::size_t scaled(std::size_t v, double f) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(v) * f)));
}

}  // namespace

std::string_view to_string(Task t) { return name_of(kTasks, t); }
std::string_view to_string(WarmupMode m) { return name_of(kModes, m); }
std::string_view to_string(Command c) { return name_of(kCommands, c); }
std::optional<Command> parse_command(std::string_view name) { return value_of(kCommands, name); }

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  if (!root.has("task")) throw ValidationError("task", "missing");
  {
    const json& t = root.at("task");
    const auto task = t.is_string() ? value_of(kTasks, t.get<std::string>()) : std::nullopt;
    if (!task) throw ValidationError("task", "unknown task id " + t.dump());
    c.task = *task;
  }
  if (root.has("seeds")) {
    const json& s = root.at("seeds");
    if (!s.is_array() || s.empty()) throw ValidationError("seeds", "expected a non-empty list of integers");
    c.seeds.clear();
    for (const json& v : s) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError("seeds", "seeds must be non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  {
    std::string out = c.output.string();
    root.read("output", out);
    if (out.empty()) throw ValidationError("output", "must not be empty");
    c.output = out;
  }
  root.read("scale", c.scale, 0.0, kInf, true);

  if (root.has("data")) {
    Section s(root.at("data"), "data");
    DataConfig& d = c.data;
    s.read("length", d.length, 1);
    s.read("forgetting", d.forgetting);
    s.read("train_samples", d.train_samples, 1);
    s.read("test_samples", d.test_samples, 1);
    s.read("black_lines", d.black_lines);
    s.read("permutation_seed", d.permutation_seed);
    s.read("train_limit", d.train_limit);
    s.read("test_limit", d.test_limit);
    s.read("directory", d.directory);
    if (s.has("source")) {
      const json& v = s.at("source");
      const auto t = v.is_string() ? value_of(kTasks, v.get<std::string>()) : std::nullopt;
      if (!t || *t == Task::VaaProbe || *t == Task::GradCheck) {
        throw ValidationError("data.source", "expected copy, denoise, pmnist, plmnist or tmaze");
      }
      d.source = *t;
    }
    s.finish();
  }

  if (root.has("network")) {
    Section s(root.at("network"), "network");
    NetworkConfig& n = c.network;
    if (s.has("cell")) {
      const json& v = s.at("cell");
      if (!v.is_string()) throw ValidationError("network.cell", "expected a string");
      try {
        n.cell = rnn::parse_cell_kind(v.get<std::string>());
      } catch (const ContractViolation& e) {
        throw ValidationError("network.cell", e.what());
      }
    }
    if (s.has("chrono_tmax")) {
      int t = 0;
      s.read("chrono_tmax", t, 2);
      n.chrono_tmax = static_cast<unsigned>(t);
    }
    if (s.has("layers")) {
      const json& v = s.at("layers");
      if (!v.is_array() || v.empty()) throw ValidationError("network.layers", "expected a non-empty list of widths");
      n.layers.clear();
      for (const json& w : v) {
        if (!w.is_number_integer() || w.get<long long>() < 1) throw ValidationError("network.layers", "widths must be positive integers");
        n.layers.push_back(w.get<std::size_t>());
      }
    }
    if (s.has("warmed_fraction")) {
      double f = 0.5;
      s.read("warmed_fraction", f, 0.0, 1.0, true);
      if (f >= 1.0) throw ValidationError("network.warmed_fraction", "must lie in (0, 1)");
      n.warmed_fraction = f;
    }
    s.finish();
    if (n.chrono_tmax && n.cell != rnn::CellKind::LSTM) {
      throw ValidationError("network.chrono_tmax", "chrono initialisation applies to LSTM cells only");
    }
  }

  if (root.has("warmup")) {
    Section s(root.at("warmup"), "warmup");
    warmup::WarmupConfig& w = c.warmup;
    if (s.has("mode")) {
      const json& v = s.at("mode");
      const auto m = v.is_string() ? value_of(kModes, v.get<std::string>()) : std::nullopt;
      if (!m) throw ValidationError("warmup.mode", "expected none, full or double");
      c.warmup_mode = *m;
    }
    s.read("steps", w.steps);
    s.read("batch_size", w.batch_size, 1);
    s.read("learning_rate", w.learning_rate, 0.0, kInf, true);
    s.read("target", w.target, 0.0, 1.0);
    s.read("max_stabilization", w.max_stabilization, 1);
    s.read("increment", w.increment);
    s.read("epsilon", w.epsilon, 0.0, kInf, true);
    s.read("grow_max_stabilization", w.grow_max_stabilization);
    s.read("bptt_window", w.bptt_window);
    if (s.has("optimizer")) {
      const json& v = s.at("optimizer");
      const std::string name = v.is_string() ? v.get<std::string>() : "";
      if (name == "sgd") {
        w.optimizer = warmup::WarmupOptimizer::Sgd;
      } else if (name == "adam") {
        w.optimizer = warmup::WarmupOptimizer::Adam;
      } else {
        throw ValidationError("warmup.optimizer", "expected sgd or adam");
      }
    }
    s.finish();
  }
  if (c.warmup_mode == WarmupMode::Double && !c.network.warmed_fraction) {
    throw ValidationError("warmup.mode", "double warmup requires a double-layer network (network.warmed_fraction)");
  }
  if (c.warmup_mode == WarmupMode::Full && c.network.warmed_fraction) {
    throw ValidationError("warmup.mode", "full warmup expects ordinary layers; use mode double with network.warmed_fraction");
  }

  if (root.has("train")) {
    Section s(root.at("train"), "train");
    train::TrainConfig& t = c.train;
    s.read("epochs", t.epochs);
    s.read("batch_size", t.batch_size, 1);
    read_adam_lr(s, t.adam);
    s.read("validation_fraction", t.validation_fraction, 0.0, 0.99);
    s.read("clip_norm", t.clip_norm, 0.0, kInf);
    s.read("record_wall_time", t.record_wall_time);
    if (s.has("probe")) {
      Section p(s.at("probe"), "train.probe");
      p.read("period", t.probe.period);
      p.read("states", t.probe.states, 1);
      read_vaa(p, t.probe.vaa);
      p.finish();
    }
    s.finish();
  }

  if (root.has("maze")) {
    Section s(root.at("maze"), "maze");
    s.read("length", c.maze.length, 1);
    s.read("discount", c.maze.discount, 0.0, 1.0);
    s.finish();
  }

  if (root.has("rl")) {
    Section s(root.at("rl"), "rl");
    drqn::DrqnConfig& r = c.rl;
    s.read("buffer_capacity", r.buffer_capacity, 1);
    s.read("target_period", r.target_period, 1);
    s.read("episodes", r.episodes);
    s.read("horizon", r.horizon);
    s.read("updates_per_episode", r.updates_per_episode, 1);
    s.read("epsilon", r.epsilon, 0.0, 1.0);
    read_adam_lr(s, r.adam);
    s.read("batch_size", r.batch_size, 1);
    s.read("prefill_fraction", r.prefill_fraction, 0.0, 1.0, true);
    s.read("eval_period", r.eval_period);
    s.read("smoothing_window", r.smoothing_window, 1);
    s.read("optimal_streak", r.optimal_streak, 1);
    s.read("stop_when_optimal", r.stop_when_optimal);
    if (s.has("probe")) {
      Section p(s.at("probe"), "rl.probe");
      p.read("period", r.probe.period);
      p.read("states", r.probe.states, 1);
      read_vaa(p, r.probe.vaa);
      p.finish();
    }
    s.finish();
  }

  if (root.has("probe")) {
    Section s(root.at("probe"), "probe");
    s.read("states", c.probe.states, 1);
    read_vaa(s, c.probe.vaa);
    s.finish();
  }
  root.finish();

  const Task data_task = c.task == Task::VaaProbe ? c.data.source : c.task;
  if (data_task == Task::Denoise && (c.data.forgetting < 5 || c.data.length < c.data.forgetting + 5)) {
    throw ValidationError("data.forgetting", "denoising needs N >= 5 and T - N >= 5");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json seeds = json::array();
  for (auto s : c.seeds) seeds.push_back(s);
  json net = {{"cell", std::string(rnn::to_string(c.network.cell))}, {"layers", c.network.layers}};
  if (c.network.chrono_tmax) net["chrono_tmax"] = *c.network.chrono_tmax;
  if (c.network.warmed_fraction) net["warmed_fraction"] = *c.network.warmed_fraction;
  const auto& w = c.warmup;
  const auto& t = c.train;
  const auto& r = c.rl;
  return {
      {"task", std::string(to_string(c.task))},
      {"seeds", seeds},
      {"output", c.output.string()},
      {"scale", c.scale},
      {"data",
       {{"length", c.data.length},
        {"forgetting", c.data.forgetting},
        {"train_samples", c.data.train_samples},
        {"test_samples", c.data.test_samples},
        {"black_lines", c.data.black_lines},
        {"permutation_seed", c.data.permutation_seed},
        {"train_limit", c.data.train_limit},
        {"test_limit", c.data.test_limit},
        {"directory", c.data.directory},
        {"source", std::string(to_string(c.data.source))}}},
      {"network", net},
      {"warmup",
       {{"mode", std::string(to_string(c.warmup_mode))},
        {"steps", w.steps},
        {"batch_size", w.batch_size},
        {"learning_rate", w.learning_rate},
        {"target", w.target},
        {"max_stabilization", w.max_stabilization},
        {"increment", w.increment},
        {"epsilon", w.epsilon},
        {"grow_max_stabilization", w.grow_max_stabilization},
        {"bptt_window", w.bptt_window},
        {"optimizer", std::string(warmup::to_string(w.optimizer))}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.adam.learning_rate},
        {"validation_fraction", t.validation_fraction},
        {"clip_norm", t.clip_norm},
        {"record_wall_time", t.record_wall_time},
        {"probe", probe_json(t.probe.period, t.probe.states, t.probe.vaa)}}},
      {"maze", {{"length", c.maze.length}, {"discount", c.maze.discount}}},
      {"rl",
       {{"buffer_capacity", r.buffer_capacity},
        {"target_period", r.target_period},
        {"episodes", r.episodes},
        {"horizon", r.horizon},
        {"updates_per_episode", r.updates_per_episode},
        {"epsilon", r.epsilon},
        {"learning_rate", r.adam.learning_rate},
        {"batch_size", r.batch_size},
        {"prefill_fraction", r.prefill_fraction},
        {"eval_period", r.eval_period},
        {"smoothing_window", r.smoothing_window},
        {"optimal_streak", r.optimal_streak},
        {"stop_when_optimal", r.stop_when_optimal},
        {"probe", probe_json(r.probe.period, r.probe.states, r.probe.vaa)}}},
      {"probe", probe_json(std::nullopt, c.probe.states, c.probe.vaa)},
  };
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError(std::string(assignment), "override must look like key.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError(path, "empty key in override path");
    if (!node->is_object()) throw ValidationError(path, "override descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void apply_scale(ExperimentConfig& c, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("scale", "must be a positive number");
  c.scale *= factor;
  if (factor == 1.0) return;
  c.data.train_samples = scaled(c.data.train_samples, factor);
  c.data.test_samples = scaled(c.data.test_samples, factor);
  if (c.data.train_limit) c.data.train_limit = scaled(c.data.train_limit, factor);
  if (c.data.test_limit) c.data.test_limit = scaled(c.data.test_limit, factor);
  for (auto& w : c.network.layers) w = scaled(w, factor);
  c.train.epochs = scaled(c.train.epochs, factor);
  c.rl.episodes = scaled(c.rl.episodes, factor);
}

ExperimentConfig resolve(const json& j) {
  ExperimentConfig c = from_json(j);
  const double factor = c.scale;
  c.scale = 1.0;
  apply_scale(c, factor);
  return c;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace warmrnn::experiment
