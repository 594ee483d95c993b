#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "d2k/dynamics/robot_model.hpp"
#include "d2k/learner/model.hpp"
#include "d2k/sweep/search_space.hpp"
#include "d2k/trajectory/iso_path.hpp"
#include "d2k/trajectory/trajectory.hpp"

namespace d2k::orchestrator {

/// Where a service lives: "dir:<path>" (opened in-process) or
/// "unix:<socket>" (a running server).
struct Endpoint {
  enum class Kind { dir, unix_socket } kind = Kind::dir;
  std::filesystem::path path;

  static Endpoint parse(const std::string& text);
  std::string str() const;
};

struct SiteConfig {
  std::string name;
  std::string instance_id;
  dynamics::InstancePerturbation perturbation;
  int train = 0;
  int validation = 0;
  int evaluation = 0;
  double velocity_scaling = 0.5;
  double acceleration_scaling = 0.5;
  int n_waypoints = 4;
  double sample_dt = 0.01;
  /// Per-joint [lo, hi] waypoint restriction for train/validation motions.
  trajectory::WaypointBounds workspace;
  double noise_sigma = 0.05;  ///< [N m]
  std::uint64_t seed = 0;
};

struct TrainingConfig {
  int folds = 3;
  std::size_t max_windows = 64;
  int configs_per_round = 10;
  int agents = 1;
  bool reuse_history = true;
  double expiry_seconds = 0.0;
  sweep::SearchSpace search_space;
};

struct BenchmarkConfig {
  std::vector<std::string> foundation_instances;
  std::string target_instance;
  int configs_per_round = 10;
  int epochs = 50;  ///< per-run budget, equal for every setup
  /// Used to build the foundation and the instance model when absent.
  learner::HyperParams foundation_params;
  int instance_unfrozen_layers = 2;
  int foundation_epochs = 50;
  sweep::SearchSpace search_space;  ///< learning rate / window / batch ranges
};

struct K2dConfig {
  std::size_t n_bins = 10;
  double threshold = 0.5;
  int trajectories_per_directive = 4;
  std::vector<std::size_t> joints;  ///< empty: every joint
};

struct PipelineConfig {
  std::filesystem::path source;  ///< file the config was read from, if any
  Endpoint store;
  Endpoint sweep;
  std::filesystem::path robot_model_file;  ///< empty: built-in model
  dynamics::RobotModel robot;
  std::string robot_type;
  std::string schedule = "0 2 * * *";
  std::filesystem::path report_dir = "reports";
  std::uint64_t seed = 0;
  double sensor_floor = 0.15;
  trajectory::IsoPathConfig iso;
  std::vector<SiteConfig> sites;
  TrainingConfig training;
  BenchmarkConfig benchmark;
  K2dConfig k2d;

  void validate() const;
  const SiteConfig& site(const std::string& name) const;
  const SiteConfig& site_for_instance(const std::string& instance_id) const;
};

/// Relative paths resolve against `base_dir`.
PipelineConfig parse_pipeline_config(const std::string& yaml_text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Explicit path, else $D2K_CONFIG; throws ValidationError("config") if neither.
std::filesystem::path resolve_config_path(const std::string& flag);

/// Cron-like "minute hour * * *" schedule; only fixed minute/hour fields
/// are supported.
struct DailySchedule {
  int minute = 0;
  int hour = 2;
  static DailySchedule parse(const std::string& text);
  /// Seconds from `now` (UTC) until the next firing.
  double seconds_until_next(std::chrono::system_clock::time_point now) const;
};

}  // namespace d2k::orchestrator
