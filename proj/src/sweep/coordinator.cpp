#include "d2k/sweep/coordinator.hpp"

#include <chrono>
#include <cstdio>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::sweep {
namespace fs = std::filesystem;

namespace {

const char* kSetupNames[] = {"end_to_end", "finetune_foundation", "finetune_instance_known_hp",
                             "finetune_instance_unknown_hp"};
const char* kStatusNames[] = {"issued", "reported", "expired"};

double system_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string round_name(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%04llu", static_cast<unsigned long long>(n));
  return buf;
}

std::string config_name(const std::string& round_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-c%02zu", index);
  return round_id + buf;
}

ConfigStatus parse_status(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kStatusNames[i]) return static_cast<ConfigStatus>(i);
  }
  throw ValidationError("status", "unknown config status '" + s + "'");
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <class F>
auto parse_guard(const char* what, F f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(what, e.what());
  }
}

}  // namespace

std::string to_string(Setup s) { return kSetupNames[static_cast<int>(s)]; }

Setup parse_setup(const std::string& s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kSetupNames[i]) return static_cast<Setup>(i);
  }
  throw ValidationError("setup", "unknown setup '" + s + "'");
}

std::string Target::key() const { return is_foundation() ? "foundation" : "instance:" + instance_id; }

Target Target::parse(const std::string& key) {
  if (key == "foundation") return foundation();
  if (key.rfind("instance:", 0) == 0 && key.size() > 9) return instance(key.substr(9));
  throw ValidationError("target", "expected 'foundation' or 'instance:<id>', got '" + key + "'");
}

void RoundSpec::validate() const {
  if (configs_per_round < 1) throw ValidationError("configs_per_round", "must be >= 1");
  if (!(expiry_seconds >= 0.0)) throw ValidationError("expiry_seconds", "must be >= 0");
  space.validate();
  if (fixed_params) fixed_params->validate();
  const bool finetune = setup != Setup::end_to_end;
  if (setup == Setup::finetune_instance_known_hp && !fixed_params) {
    throw ValidationError("fixed_params", "known-hyperparameter rounds need the stored hyperparameters");
  }
  if (finetune && !fixed_params && space.unfrozen_layers.lo < 1) {
    throw ValidationError("unfrozen_layers", "fine-tuning rounds must unfreeze at least one group");
  }
}

// ---- JSON -----------------------------------------------------------------

Json to_json(const RoundSpec& s) {
  Json j;
  j["target"] = s.target.key();
  j["setup"] = to_string(s.setup);
  j["search_space"] = to_json(s.space);
  j["configs_per_round"] = s.configs_per_round;
  j["seed"] = s.seed;
  j["expiry_seconds"] = s.expiry_seconds;
  j["reuse_history"] = s.reuse_history;
  j["fixed_params"] = s.fixed_params ? learner::to_json(*s.fixed_params) : Json(nullptr);
  return j;
}

RoundSpec round_spec_from_json(const Json& j) {
  RoundSpec s = parse_guard("round_spec", [&] {
    RoundSpec s;
    s.target = Target::parse(j.at("target").get<std::string>());
    s.setup = parse_setup(j.value("setup", std::string("end_to_end")));
    if (j.contains("search_space")) s.space = search_space_from_json(j.at("search_space"));
    s.configs_per_round = j.value("configs_per_round", 10);
    s.seed = j.value("seed", std::uint64_t{0});
    s.expiry_seconds = j.value("expiry_seconds", 0.0);
    s.reuse_history = j.value("reuse_history", true);
    if (j.contains("fixed_params") && !j.at("fixed_params").is_null()) {
      s.fixed_params = learner::hyperparams_from_json(j.at("fixed_params"));
    }
    return s;
  });
  s.validate();
  return s;
}

Json to_json(const IssuedConfig& c) {
  Json j;
  j["config_id"] = c.config_id;
  j["agent_id"] = c.agent_id;
  j["params"] = learner::to_json(c.params);
  j["issued_utc"] = c.issued_utc;
  j["issued_at"] = c.issued_at;
  j["status"] = kStatusNames[static_cast<int>(c.status)];
  j["loss"] = optional_json(c.loss);
  j["accepted"] = optional_json(c.accepted);
  return j;
}

IssuedConfig issued_config_from_json(const Json& j) {
  return parse_guard("config", [&] {
    IssuedConfig c;
    c.config_id = j.at("config_id").get<std::string>();
    c.agent_id = j.at("agent_id").get<std::string>();
    c.params = learner::hyperparams_from_json(j.at("params"));
    c.issued_utc = j.value("issued_utc", std::string());
    c.issued_at = j.value("issued_at", 0.0);
    c.status = parse_status(j.value("status", std::string("issued")));
    c.loss = optional_from<double>(j, "loss");
    c.accepted = optional_from<bool>(j, "accepted");
    return c;
  });
}

Json to_json(const RoundStatus& s) {
  Json j;
  j["round_id"] = s.round_id;
  j["target"] = s.target.key();
  j["setup"] = to_string(s.setup);
  j["configs_per_round"] = s.configs_per_round;
  j["issued"] = s.issued;
  j["reported"] = s.reported;
  j["expired"] = s.expired;
  j["open"] = s.open;
  return j;
}

RoundStatus round_status_from_json(const Json& j) {
  return parse_guard("status", [&] {
    RoundStatus s;
    s.round_id = j.at("round_id").get<std::string>();
    s.target = Target::parse(j.at("target").get<std::string>());
    s.setup = parse_setup(j.at("setup").get<std::string>());
    s.configs_per_round = j.at("configs_per_round").get<int>();
    s.issued = j.at("issued").get<int>();
    s.reported = j.at("reported").get<int>();
    s.expired = j.at("expired").get<int>();
    s.open = j.at("open").get<bool>();
    return s;
  });
}

Json to_json(const HistoryEntry& h) {
  Json j;
  j["round_id"] = h.round_id;
  j["config_id"] = h.config_id;
  j["params"] = learner::to_json(h.params);
  j["loss"] = h.loss;
  j["accepted"] = h.accepted;
  j["checkpoint_id"] = h.checkpoint_id;
  j["reported_utc"] = h.reported_utc;
  return j;
}

HistoryEntry history_entry_from_json(const Json& j) {
  return parse_guard("history", [&] {
    HistoryEntry h;
    h.round_id = j.at("round_id").get<std::string>();
    h.config_id = j.at("config_id").get<std::string>();
    h.params = learner::hyperparams_from_json(j.at("params"));
    h.loss = j.at("loss").get<double>();
    h.accepted = j.at("accepted").get<bool>();
    h.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    h.reported_utc = j.value("reported_utc", std::string());
    return h;
  });
}

Json to_json(const BestModel& b) {
  Json j;
  j["checkpoint_id"] = b.checkpoint_id;
  j["loss"] = b.loss;
  j["params"] = learner::to_json(b.params);
  j["round_id"] = b.round_id;
  j["config_id"] = b.config_id;
  return j;
}

BestModel best_model_from_json(const Json& j) {
  return parse_guard("best", [&] {
    BestModel b;
    b.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    b.loss = j.at("loss").get<double>();
    b.params = learner::hyperparams_from_json(j.at("params"));
    b.round_id = j.at("round_id").get<std::string>();
    b.config_id = j.at("config_id").get<std::string>();
    return b;
  });
}

// ---- Coordinator ----------------------------------------------------------

Coordinator::Coordinator() : clock_(system_seconds) {}

Coordinator::Coordinator(fs::path dir, Clock clock) : dir_(std::move(dir)), clock_(clock ? clock : system_seconds) {
  fs::create_directories(*dir_ / "checkpoints");
  fs::create_directories(*dir_ / "evals");
  load();
}

void Coordinator::set_post_accept_hook(PostAcceptHook hook) {
  std::lock_guard lock(mu_);
  hook_ = std::move(hook);
}

Coordinator::Round& Coordinator::round_locked(const std::string& round_id) {
  auto it = rounds_.find(round_id);
  if (it == rounds_.end()) throw NotFoundError("unknown round '" + round_id + "'");
  return it->second;
}

void Coordinator::expire_locked(Round& r) {
  if (!r.open || r.spec.expiry_seconds <= 0.0) return;
  const double now = clock_();
  for (auto& c : r.issued) {
    if (c.status == ConfigStatus::issued && now - c.issued_at > r.spec.expiry_seconds) c.status = ConfigStatus::expired;
  }
}

void Coordinator::maybe_close_locked(Round& r) {
  if (!r.open || static_cast<int>(r.issued.size()) < r.spec.configs_per_round) return;
  for (const auto& c : r.issued) {
    if (c.status == ConfigStatus::issued) return;
  }
  r.open = false;
}

RoundStatus Coordinator::status_locked(const Round& r) const {
  RoundStatus s;
  s.round_id = r.round_id;
  s.target = r.spec.target;
  s.setup = r.spec.setup;
  s.configs_per_round = r.spec.configs_per_round;
  s.issued = static_cast<int>(r.issued.size());
  for (const auto& c : r.issued) {
    if (c.status == ConfigStatus::reported) ++s.reported;
    if (c.status == ConfigStatus::expired) ++s.expired;
  }
  s.open = r.open;
  return s;
}

std::string Coordinator::open_round(const RoundSpec& spec) {
  spec.validate();
  std::lock_guard lock(mu_);
  for (auto& [id, r] : rounds_) {
    expire_locked(r);
    maybe_close_locked(r);
    if (r.open && r.spec.target == spec.target) {
      throw ConflictError("round " + id + " is still open for target " + spec.target.key());
    }
  }
  Round r;
  r.round_id = round_name(next_round_++);
  r.spec = spec;
  const auto id = r.round_id;
  rounds_.emplace(id, std::move(r));
  persist_locked();
  return id;
}

std::optional<IssuedConfig> Coordinator::request_config(const std::string& round_id, const std::string& agent_id) {
  std::lock_guard lock(mu_);
  auto& r = round_locked(round_id);
  expire_locked(r);
  if (!r.open || static_cast<int>(r.issued.size()) >= r.spec.configs_per_round) {
    maybe_close_locked(r);
    persist_locked();
    return std::nullopt;
  }
  const auto index = r.issued.size();
  IssuedConfig c;
  c.config_id = config_name(round_id, index);
  c.agent_id = agent_id;
  if (r.spec.fixed_params) {
    c.params = *r.spec.fixed_params;
    c.params.rng_seed = mix_seed(r.spec.seed, index);
  } else {
    c.params = r.spec.space.sample(r.spec.seed, index);
  }
  c.issued_utc = utc_now();
  c.issued_at = clock_();
  r.issued.push_back(c);
  persist_locked();
  return c;
}

bool Coordinator::report_result(const std::string& round_id, const std::string& config_id,
                                const ModelCheckpoint& ckpt, double loss) {
  if (!std::isfinite(loss) || loss < 0.0) throw ValidationError("cross_validation_loss", "must be finite and >= 0");
  ckpt.validate();
  PostAcceptHook hook;
  Target target;
  bool accepted = false;
  {
    std::lock_guard lock(mu_);
    auto& r = round_locked(round_id);
    expire_locked(r);
    IssuedConfig* cfg = nullptr;
    for (auto& c : r.issued) {
      if (c.config_id == config_id) cfg = &c;
    }
    if (!cfg) throw NotFoundError("config '" + config_id + "' was not issued in round " + round_id);
    if (cfg->status == ConfigStatus::reported) throw ConflictError("config '" + config_id + "' already reported");
    if (cfg->status == ConfigStatus::expired) throw ConflictError("config '" + config_id + "' expired");

    auto& repo = repos_[r.spec.target.key()];
    if (r.spec.reuse_history) {
      accepted = !repo.best || loss < repo.best->loss;
    } else {
      accepted = !r.round_best || loss < *r.round_best;
    }
    cfg->status = ConfigStatus::reported;
    cfg->loss = loss;
    cfg->accepted = accepted;
    HistoryEntry h{round_id, config_id, cfg->params, loss, accepted, ckpt.id, utc_now()};
    repo.history.push_back(h);
    if (accepted) {
      r.round_best = loss;
      repo.best = BestModel{ckpt.id, loss, cfg->params, round_id, config_id};
      if (dir_) {
        learner::save_checkpoint(ckpt, *dir_ / "checkpoints" / (ckpt.id + ".json"));
      } else {
        memory_checkpoints_[ckpt.id] = ckpt;
      }
    }
    maybe_close_locked(r);
    persist_locked();
    hook = hook_;
    target = r.spec.target;
  }
  if (accepted && hook) {
    if (auto report = hook(target, ckpt)) {
      std::lock_guard lock(mu_);
      if (dir_) {
        write_file_atomic(*dir_ / "evals" / (ckpt.id + ".json"), learner::to_json(*report).dump(2) + "\n");
      } else {
        memory_evals_[ckpt.id] = *report;
      }
    }
  }
  return accepted;
}

BestModel Coordinator::best(const Target& target) {
  std::lock_guard lock(mu_);
  auto it = repos_.find(target.key());
  if (it == repos_.end() || !it->second.best) throw NotFoundError("no model for target " + target.key());
  return *it->second.best;
}

ModelCheckpoint Coordinator::checkpoint(const std::string& checkpoint_id) {
  std::lock_guard lock(mu_);
  if (dir_) {
    const auto path = *dir_ / "checkpoints" / (checkpoint_id + ".json");
    if (checkpoint_id.find('/') != std::string::npos || !fs::exists(path)) {
      throw NotFoundError("no stored checkpoint '" + checkpoint_id + "'");
    }
    return learner::load_checkpoint(path);
  }
  auto it = memory_checkpoints_.find(checkpoint_id);
  if (it == memory_checkpoints_.end()) throw NotFoundError("no stored checkpoint '" + checkpoint_id + "'");
  return it->second;
}

std::optional<learner::EvalReport> Coordinator::evaluation(const std::string& checkpoint_id) {
  std::lock_guard lock(mu_);
  if (dir_) {
    const auto path = *dir_ / "evals" / (checkpoint_id + ".json");
    if (checkpoint_id.find('/') != std::string::npos || !fs::exists(path)) return std::nullopt;
    return learner::eval_report_from_json(Json::parse(read_file(path)));
  }
  auto it = memory_evals_.find(checkpoint_id);
  if (it == memory_evals_.end()) return std::nullopt;
  return it->second;
}

RoundStatus Coordinator::status(const std::string& round_id) {
  std::lock_guard lock(mu_);
  auto& r = round_locked(round_id);
  expire_locked(r);
  maybe_close_locked(r);
  return status_locked(r);
}

RoundStatus Coordinator::close_round(const std::string& round_id) {
  std::lock_guard lock(mu_);
  auto& r = round_locked(round_id);
  for (auto& c : r.issued) {
    if (c.status == ConfigStatus::issued) c.status = ConfigStatus::expired;
  }
  r.open = false;
  persist_locked();
  return status_locked(r);
}

std::vector<HistoryEntry> Coordinator::history(const Target& target) {
  std::lock_guard lock(mu_);
  auto it = repos_.find(target.key());
  return it == repos_.end() ? std::vector<HistoryEntry>{} : it->second.history;
}

std::vector<IssuedConfig> Coordinator::ledger(const std::string& round_id) {
  std::lock_guard lock(mu_);
  return round_locked(round_id).issued;
}

Json Coordinator::state_json() {
  std::lock_guard lock(mu_);
  return state_locked();
}

Json Coordinator::state_locked() const {
  Json j;
  j["format_version"] = 1;
  j["next_round"] = next_round_;
  Json rounds = Json::array();
  for (const auto& [id, r] : rounds_) {
    Json rj;
    rj["round_id"] = id;
    rj["spec"] = to_json(r.spec);
    rj["open"] = r.open;
    rj["round_best"] = optional_json(r.round_best);
    Json issued = Json::array();
    for (const auto& c : r.issued) issued.push_back(to_json(c));
    rj["issued"] = std::move(issued);
    rounds.push_back(std::move(rj));
  }
  j["rounds"] = std::move(rounds);
  Json repos = Json::object();
  for (const auto& [key, repo] : repos_) {
    Json rj;
    rj["best"] = repo.best ? to_json(*repo.best) : Json(nullptr);
    Json hist = Json::array();
    for (const auto& h : repo.history) hist.push_back(to_json(h));
    rj["history"] = std::move(hist);
    repos[key] = std::move(rj);
  }
  j["repository"] = std::move(repos);
  return j;
}

void Coordinator::persist_locked() {
  if (!dir_) return;
  write_file_atomic(*dir_ / "state.json", state_locked().dump() + "\n");
}

void Coordinator::load() {
  const auto path = *dir_ / "state.json";
  if (!fs::exists(path)) return;
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("state", std::string("corrupt sweep state: ") + e.what());
  }
  parse_guard("state", [&] {
    next_round_ = j.at("next_round").get<std::uint64_t>();
    for (const auto& rj : j.at("rounds")) {
      Round r;
      r.round_id = rj.at("round_id").get<std::string>();
      r.spec = round_spec_from_json(rj.at("spec"));
      r.open = rj.at("open").get<bool>();
      r.round_best = optional_from<double>(rj, "round_best");
      for (const auto& c : rj.at("issued")) r.issued.push_back(issued_config_from_json(c));
      rounds_.emplace(r.round_id, std::move(r));
    }
    for (const auto& [key, rj] : j.at("repository").items()) {
      Repo repo;
      if (!rj.at("best").is_null()) repo.best = best_model_from_json(rj.at("best"));
      for (const auto& h : rj.at("history")) repo.history.push_back(history_entry_from_json(h));
      repos_.emplace(key, std::move(repo));
    }
    return 0;
  });
}

}  // namespace d2k::sweep
