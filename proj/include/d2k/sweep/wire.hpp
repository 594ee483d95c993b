#pragma once

#include <filesystem>
#include <mutex>

#include "d2k/common/framing.hpp"
#include "d2k/sweep/coordinator.hpp"

namespace d2k::sweep {

/**
 * One SweepMessage in, one out. Agent types: request_config -> config |
 * round_done, report -> ack. Management types: open_round, status,
 * close_round, best, history, get_checkpoint, get_evaluation. Failures and
 * unknown types reply {type: "error", error: {code, message}}.
 */
Json handle_message(SweepApi& api, const Json& message);

class SweepServer {
 public:
  SweepServer(SweepApi& api, std::filesystem::path socket_path);
  void start() { server_.start(); }
  void stop() { server_.stop(); }

 private:
  SweepApi& api_;
  net::UnixServer server_;
};

/// Client side; error replies are rethrown as the matching exception. One
/// request is in flight at a time, so threads may share an instance.
class RemoteSweep : public SweepApi {
 public:
  RemoteSweep(const std::filesystem::path& socket_path, std::string agent_id = "client");

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

 private:
  Json call(Json message);
  std::mutex mu_;
  net::UnixClient client_;
  std::string agent_id_;
};

}  // namespace d2k::sweep
