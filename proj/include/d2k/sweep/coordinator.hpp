#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "d2k/learner/evaluate.hpp"
#include "d2k/learner/model.hpp"
#include "d2k/sweep/search_space.hpp"

namespace d2k::sweep {

using learner::ModelCheckpoint;

enum class Setup { end_to_end, finetune_foundation, finetune_instance_known_hp, finetune_instance_unknown_hp };
std::string to_string(Setup s);
Setup parse_setup(const std::string& s);

/// Either the shared foundation model or one robot instance's model.
struct Target {
  std::string instance_id;  ///< empty for the foundation

  static Target foundation() { return {}; }
  static Target instance(std::string id) { return {std::move(id)}; }
  bool is_foundation() const { return instance_id.empty(); }
  /// "foundation" or "instance:<id>"
  std::string key() const;
  static Target parse(const std::string& key);
  bool operator==(const Target&) const = default;
};

struct RoundSpec {
  Target target;
  Setup setup = Setup::end_to_end;
  SearchSpace space;
  int configs_per_round = 10;
  std::uint64_t seed = 0;
  /// Issued configs not reported within this many seconds are expired.
  /// 0 disables expiry.
  double expiry_seconds = 0.0;
  /// Gate against the target's standing best (true) or only against
  /// results of this round (false).
  bool reuse_history = true;
  /// Issue exactly these hyperparameters instead of sampling the space.
  std::optional<HyperParams> fixed_params;

  void validate() const;
};

enum class ConfigStatus { issued, reported, expired };

struct IssuedConfig {
  std::string config_id;
  std::string agent_id;
  HyperParams params;
  std::string issued_utc;
  double issued_at = 0.0;  ///< clock seconds
  ConfigStatus status = ConfigStatus::issued;
  std::optional<double> loss;
  std::optional<bool> accepted;
};

struct RoundStatus {
  std::string round_id;
  Target target;
  Setup setup = Setup::end_to_end;
  int configs_per_round = 0;
  int issued = 0;
  int reported = 0;
  int expired = 0;
  bool open = true;
};

struct HistoryEntry {
  std::string round_id;
  std::string config_id;
  HyperParams params;
  double loss = 0.0;
  bool accepted = false;
  std::string checkpoint_id;
  std::string reported_utc;
};

struct BestModel {
  std::string checkpoint_id;
  double loss = 0.0;
  HyperParams params;
  std::string round_id;
  std::string config_id;
};

/// Operations shared by the in-process coordinator and its socket client.
class SweepApi {
 public:
  virtual ~SweepApi() = default;
  virtual std::string open_round(const RoundSpec& spec) = 0;
  /// nullopt once configs_per_round configs have been issued.
  virtual std::optional<IssuedConfig> request_config(const std::string& round_id, const std::string& agent_id) = 0;
  /// True iff `loss` is strictly below the current best.
  virtual bool report_result(const std::string& round_id, const std::string& config_id, const ModelCheckpoint& ckpt,
                             double loss) = 0;
  /// Throws NotFoundError("no model ...") before the first acceptance.
  virtual BestModel best(const Target& target) = 0;
  virtual ModelCheckpoint checkpoint(const std::string& checkpoint_id) = 0;
  virtual std::optional<learner::EvalReport> evaluation(const std::string& checkpoint_id) = 0;
  virtual RoundStatus status(const std::string& round_id) = 0;
  /// Expires every config still outstanding and closes the round.
  virtual RoundStatus close_round(const std::string& round_id) = 0;
  virtual std::vector<HistoryEntry> history(const Target& target) = 0;
};

/**
 * Sweep server and gated model repository. Every verb is serialized by one
 * mutex, so gate decisions are linearizable. With a directory, every state
 * change is written (atomically) before the call returns; accepted
 * checkpoints are stored under checkpoints/, post-accept evaluations under
 * evals/.
 */
class Coordinator : public SweepApi {
 public:
  using Clock = std::function<double()>;
  using PostAcceptHook = std::function<std::optional<learner::EvalReport>(const Target&, const ModelCheckpoint&)>;

  Coordinator();
  explicit Coordinator(std::filesystem::path dir, Clock clock = {});

  void set_post_accept_hook(PostAcceptHook hook);

  std::string open_round(const RoundSpec& spec) override;
  std::optional<IssuedConfig> request_config(const std::string& round_id, const std::string& agent_id) override;
  bool report_result(const std::string& round_id, const std::string& config_id, const ModelCheckpoint& ckpt,
                     double loss) override;
  BestModel best(const Target& target) override;
  ModelCheckpoint checkpoint(const std::string& checkpoint_id) override;
  std::optional<learner::EvalReport> evaluation(const std::string& checkpoint_id) override;
  RoundStatus status(const std::string& round_id) override;
  RoundStatus close_round(const std::string& round_id) override;
  std::vector<HistoryEntry> history(const Target& target) override;

  std::vector<IssuedConfig> ledger(const std::string& round_id);
  /// Whole persisted state, for comparisons across restarts.
  Json state_json();

 private:
  struct Round {
    std::string round_id;
    RoundSpec spec;
    std::vector<IssuedConfig> issued;
    bool open = true;
    std::optional<double> round_best;
  };
  struct Repo {
    std::optional<BestModel> best;
    std::vector<HistoryEntry> history;
  };

  Round& round_locked(const std::string& round_id);
  void expire_locked(Round& r);
  void maybe_close_locked(Round& r);
  RoundStatus status_locked(const Round& r) const;
  Json state_locked() const;
  void load();
  void persist_locked();

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  PostAcceptHook hook_;
  std::mutex mu_;
  std::uint64_t next_round_ = 1;
  std::map<std::string, Round> rounds_;
  std::map<std::string, Repo> repos_;  // by Target::key()
  std::map<std::string, ModelCheckpoint> memory_checkpoints_;
  std::map<std::string, learner::EvalReport> memory_evals_;
};

Json to_json(const RoundSpec& s);
RoundSpec round_spec_from_json(const Json& j);
Json to_json(const IssuedConfig& c);
IssuedConfig issued_config_from_json(const Json& j);
Json to_json(const RoundStatus& s);
RoundStatus round_status_from_json(const Json& j);
Json to_json(const HistoryEntry& h);
HistoryEntry history_entry_from_json(const Json& j);
Json to_json(const BestModel& b);
BestModel best_model_from_json(const Json& j);

}  // namespace d2k::sweep
