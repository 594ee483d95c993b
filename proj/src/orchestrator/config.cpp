#include "d2k/orchestrator/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/dynamics/model_io.hpp"

namespace d2k::orchestrator {
namespace fs = std::filesystem;
using learner::Json;

namespace {

std::string at_line(const YAML::Node& n) { return "line " + std::to_string(n.Mark().line + 1) + ": "; }

// Strict mapping reader: every key must be consumed or it is reported.
class Map {
 public:
  Map(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) throw ValidationError(path_.empty() ? "config" : path_, at_line(node_) + "expected a mapping");
    for (auto it = node_.begin(); it != node_.end(); ++it) keys_.insert(it->first.as<std::string>());
  }

  ~Map() noexcept(false) {
    if (std::uncaught_exceptions() == 0 && !keys_.empty()) {
      const auto key = *keys_.begin();
      throw ValidationError(field(key), at_line(node_[key]) + "unknown field");
    }
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node take(const std::string& key) {
    keys_.erase(key);
    return node_[key];
  }

  template <class T>
  void read(const std::string& key, T& out) {
    YAML::Node n = take(key);
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError(field(key), at_line(n) + "wrong type");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> keys_;
};

Json to_json_value(const YAML::Node& n) {
  if (!n || n.IsNull()) return nullptr;
  if (n.IsSequence()) {
    Json a = Json::array();
    for (const auto& e : n) a.push_back(to_json_value(e));
    return a;
  }
  if (n.IsMap()) {
    Json o = Json::object();
    for (auto it = n.begin(); it != n.end(); ++it) o[it->first.as<std::string>()] = to_json_value(it->second);
    return o;
  }
  const auto s = n.Scalar();
  if (n.Tag() != "!") {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (...) {
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (...) {
    }
    if (s == "true") return true;
    if (s == "false") return false;
  }
  return s;
}

learner::HyperParams read_hyperparams(const YAML::Node& n, const std::string& path) {
  Json j = learner::to_json(learner::HyperParams{});
  const Json over = to_json_value(n);
  if (!over.is_object()) throw ValidationError(path, at_line(n) + "expected a mapping");
  for (const auto& [k, v] : over.items()) {
    if (!j.contains(k)) throw ValidationError(path + "." + k, at_line(n) + "unknown field");
    j[k] = v;
  }
  try {
    return learner::hyperparams_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path + "." + e.field(), at_line(n) + e.what());
  }
}

sweep::SearchSpace read_space(const YAML::Node& n, const std::string& path) {
  try {
    return sweep::search_space_from_json(to_json_value(n));
  } catch (const ValidationError& e) {
    throw ValidationError(path + "." + e.field(), at_line(n) + e.what());
  }
}

Eigen::Vector3d read_vec3(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence() || n.size() != 3) throw ValidationError(path, at_line(n) + "expected 3 numbers");
  return {n[0].as<double>(), n[1].as<double>(), n[2].as<double>()};
}

SiteConfig read_site(const YAML::Node& node, const std::string& path, std::size_t n_joints) {
  SiteConfig s;
  Map m(node, path);
  m.read("name", s.name);
  m.read("instance_id", s.instance_id);
  if (s.instance_id.empty()) s.instance_id = s.name;
  s.perturbation.instance_id = s.instance_id;
  if (auto p = m.take("perturbation")) {
    Map pm(p, path + ".perturbation");
    pm.read("mass_scales", s.perturbation.mass_scales);
    pm.read("payload_mass", s.perturbation.payload_mass);
    if (auto off = pm.take("payload_offset")) s.perturbation.payload_offset = read_vec3(off, path + ".payload_offset");
    pm.read("friction_scale", s.perturbation.friction_scale);
  }
  if (auto c = m.take("counts")) {
    Map cm(c, path + ".counts");
    cm.read("train", s.train);
    cm.read("validation", s.validation);
    cm.read("evaluation", s.evaluation);
  }
  m.read("velocity_scaling", s.velocity_scaling);
  m.read("acceleration_scaling", s.acceleration_scaling);
  m.read("n_waypoints", s.n_waypoints);
  m.read("sample_dt", s.sample_dt);
  m.read("noise_sigma", s.noise_sigma);
  m.read("seed", s.seed);
  if (auto w = m.take("workspace")) {
    if (!w.IsSequence() || w.size() != n_joints) {
      throw ValidationError(path + ".workspace", at_line(w) + "expected one entry per joint");
    }
    for (std::size_t j = 0; j < n_joints; ++j) {
      if (w[j].IsNull()) {
        s.workspace.per_joint.emplace_back(std::nullopt);
        continue;
      }
      if (!w[j].IsSequence() || w[j].size() != 2) {
        throw ValidationError(path + ".workspace[" + std::to_string(j) + "]", at_line(w[j]) + "expected [lo, hi] or ~");
      }
      s.workspace.per_joint.emplace_back(std::make_pair(w[j][0].as<double>(), w[j][1].as<double>()));
    }
  }
  return s;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint e;
  if (text.rfind("dir:", 0) == 0) {
    e.kind = Kind::dir;
    e.path = text.substr(4);
  } else if (text.rfind("unix:", 0) == 0) {
    e.kind = Kind::unix_socket;
    e.path = text.substr(5);
  } else {
    throw ValidationError("endpoint", "expected dir:<path> or unix:<socket>, got '" + text + "'");
  }
  if (e.path.empty()) throw ValidationError("endpoint", "empty path in '" + text + "'");
  return e;
}

std::string Endpoint::str() const { return (kind == Kind::dir ? "dir:" : "unix:") + path.string(); }

void PipelineConfig::validate() const {
  if (sites.empty()) throw ValidationError("sites", "at least one site is required");
  std::set<std::string> names;
  const auto n = static_cast<std::size_t>(robot.n_joints());
  for (const auto& s : sites) {
    const auto where = "sites." + s.name;
    if (s.name.empty()) throw ValidationError("sites.name", "must not be empty");
    if (!names.insert(s.name).second) throw ValidationError(where, "duplicate site name");
    if (s.train < 0 || s.validation < 0 || s.evaluation < 0) throw ValidationError(where + ".counts", "must be >= 0");
    if (!s.perturbation.mass_scales.empty() && s.perturbation.mass_scales.size() != n) {
      throw ValidationError(where + ".perturbation.mass_scales", "expected one factor per link");
    }
    if (!s.workspace.per_joint.empty()) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto& b = s.workspace.per_joint[j];
        if (b && !(b->first < b->second && b->first >= robot.q_min[static_cast<Eigen::Index>(j)] &&
                   b->second <= robot.q_max[static_cast<Eigen::Index>(j)])) {
          throw ValidationError(where + ".workspace[" + std::to_string(j) + "]", "must be an interval inside the joint limits");
        }
      }
    }
    trajectory::ProfileParams p;
    p.velocity_scaling = s.velocity_scaling;
    p.acceleration_scaling = s.acceleration_scaling;
    p.n_waypoints = s.n_waypoints;
    p.sample_dt = s.sample_dt;
    p.validate();
    if (!(s.noise_sigma >= 0.0)) throw ValidationError(where + ".noise_sigma", "must be >= 0");
  }
  if (training.folds < 2) throw ValidationError("training.folds", "must be >= 2");
  if (training.configs_per_round < 1) throw ValidationError("training.configs_per_round", "must be >= 1");
  if (training.agents < 1) throw ValidationError("training.agents", "must be >= 1");
  if (benchmark.configs_per_round < 1) throw ValidationError("benchmark.configs_per_round", "must be >= 1");
  if (benchmark.epochs < 1 || benchmark.foundation_epochs < 1) throw ValidationError("benchmark.epochs", "must be >= 1");
  if (k2d.n_bins < 1) throw ValidationError("k2d.n_bins", "must be >= 1");
  for (auto j : k2d.joints) {
    if (j >= n) throw ValidationError("k2d.joints", "joint index out of range");
  }
  DailySchedule::parse(schedule);
}

const SiteConfig& PipelineConfig::site(const std::string& name) const {
  for (const auto& s : sites) {
    if (s.name == name) return s;
  }
  throw NotFoundError("no site named '" + name + "'");
}

const SiteConfig& PipelineConfig::site_for_instance(const std::string& instance_id) const {
  for (const auto& s : sites) {
    if (s.instance_id == instance_id) return s;
  }
  throw NotFoundError("no site for instance '" + instance_id + "'");
}

PipelineConfig parse_pipeline_config(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ValidationError("config", e.what());
  }
  PipelineConfig c;
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base_dir / p; };
  {
    Map m(root, "");
    std::string store = "dir:store", sweep = "dir:sweep", model, report = "reports";
    m.read("store", store);
    m.read("sweep", sweep);
    m.read("robot_model", model);
    m.read("robot_type", c.robot_type);
    m.read("schedule", c.schedule);
    m.read("report_dir", report);
    m.read("seed", c.seed);
    m.read("sensor_floor", c.sensor_floor);
    c.store = Endpoint::parse(store);
    c.sweep = Endpoint::parse(sweep);
    c.store.path = resolve(c.store.path);
    c.sweep.path = resolve(c.sweep.path);
    c.report_dir = resolve(report);
    if (model.empty() || model == "builtin") {
      c.robot = dynamics::default_robot_model();
    } else {
      c.robot_model_file = resolve(model);
      c.robot = dynamics::load_robot_model(c.robot_model_file);
    }
    if (c.robot_type.empty()) c.robot_type = c.robot.name;
    const auto n = static_cast<std::size_t>(c.robot.n_joints());

    if (auto iso = m.take("iso")) {
      Map im(iso, "iso");
      if (auto v = im.take("center")) c.iso.figure.center = read_vec3(v, "iso.center");
      if (auto v = im.take("u_axis")) c.iso.figure.u_axis = read_vec3(v, "iso.u_axis");
      if (auto v = im.take("v_axis")) c.iso.figure.v_axis = read_vec3(v, "iso.v_axis");
      im.read("width", c.iso.figure.width);
      im.read("height", c.iso.figure.height);
      im.read("max_cartesian_speed", c.iso.max_cartesian_speed);
      im.read("max_cartesian_accel", c.iso.max_cartesian_accel);
    }
    if (auto sites = m.take("sites")) {
      if (!sites.IsSequence()) throw ValidationError("sites", at_line(sites) + "expected a list");
      for (std::size_t i = 0; i < sites.size(); ++i) {
        c.sites.push_back(read_site(sites[i], "sites[" + std::to_string(i) + "]", n));
      }
    }
    if (auto t = m.take("training")) {
      Map tm(t, "training");
      tm.read("folds", c.training.folds);
      tm.read("max_windows", c.training.max_windows);
      tm.read("configs_per_round", c.training.configs_per_round);
      tm.read("agents", c.training.agents);
      tm.read("reuse_history", c.training.reuse_history);
      tm.read("expiry_seconds", c.training.expiry_seconds);
      if (auto s = tm.take("search_space")) c.training.search_space = read_space(s, "training.search_space");
    }
    if (auto b = m.take("benchmark")) {
      Map bm(b, "benchmark");
      bm.read("foundation_instances", c.benchmark.foundation_instances);
      bm.read("target_instance", c.benchmark.target_instance);
      bm.read("configs_per_round", c.benchmark.configs_per_round);
      bm.read("epochs", c.benchmark.epochs);
      bm.read("foundation_epochs", c.benchmark.foundation_epochs);
      bm.read("instance_unfrozen_layers", c.benchmark.instance_unfrozen_layers);
      if (auto h = bm.take("foundation_params")) c.benchmark.foundation_params = read_hyperparams(h, "benchmark.foundation_params");
      if (auto s = bm.take("search_space")) c.benchmark.search_space = read_space(s, "benchmark.search_space");
    }
    if (auto k = m.take("k2d")) {
      Map km(k, "k2d");
      km.read("n_bins", c.k2d.n_bins);
      km.read("threshold", c.k2d.threshold);
      km.read("trajectories_per_directive", c.k2d.trajectories_per_directive);
      km.read("joints", c.k2d.joints);
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError("config file " + path.string() + " does not exist");
  auto c = parse_pipeline_config(read_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
  c.source = path;
  return c;
}

fs::path resolve_config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("D2K_CONFIG"); env && *env) return env;
  throw ValidationError("config", "pass --config or set D2K_CONFIG");
}

DailySchedule DailySchedule::parse(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> f;
  for (std::string part; in >> part;) f.push_back(part);
  auto number = [&](const std::string& s, int lo, int hi) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used == s.size() && v >= lo && v <= hi) return v;
    } catch (...) {
    }
    throw ValidationError("schedule", "unsupported field '" + s + "' in '" + text + "'");
  };
  if (f.size() != 5 || f[2] != "*" || f[3] != "*" || f[4] != "*") {
    throw ValidationError("schedule", "expected 'minute hour * * *', got '" + text + "'");
  }
  return {number(f[0], 0, 59), number(f[1], 0, 23)};
}

double DailySchedule::seconds_until_next(std::chrono::system_clock::time_point now) const {
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const int now_s = tm.tm_hour * 3600 + tm.tm_min * 60 + tm.tm_sec;
  int wait = hour * 3600 + minute * 60 - now_s;
  if (wait <= 0) wait += 24 * 3600;
  return static_cast<double>(wait);
}

}  // namespace d2k::orchestrator
