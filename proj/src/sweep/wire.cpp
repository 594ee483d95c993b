#include "d2k/sweep/wire.hpp"

#include "d2k/common/error.hpp"
#include "d2k/store/service.hpp"

namespace d2k::sweep {
namespace {

Json error_message(const std::string& code, const std::string& message, const std::string& field = {}) {
  Json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return Json{{"type", "error"}, {"error", std::move(err)}};
}

std::string text(const Json& m, const char* key) {
  const auto it = m.find(key);
  if (it == m.end() || !it->is_string()) throw ValidationError(key, "missing or not a string");
  return it->get<std::string>();
}

Json dispatch(SweepApi& api, const Json& m) {
  if (!m.is_object()) throw ValidationError("message", "must be a JSON object");
  const auto type = text(m, "type");
  if (type == "request_config") {
    const auto round_id = text(m, "round_id");
    const auto agent_id = text(m, "agent_id");
    const auto cfg = api.request_config(round_id, agent_id);
    if (!cfg) return Json{{"type", "round_done"}, {"round_id", round_id}, {"agent_id", agent_id}};
    return Json{{"type", "config"},     {"round_id", round_id},
                {"agent_id", agent_id}, {"config_id", cfg->config_id},
                {"params", learner::to_json(cfg->params)}};
  }
  if (type == "report") {
    const auto round_id = text(m, "round_id");
    const auto config_id = text(m, "config_id");
    const auto it = m.find("cross_validation_loss");
    if (it == m.end() || !it->is_number()) throw ValidationError("cross_validation_loss", "missing or not a number");
    if (!m.contains("checkpoint")) throw ValidationError("checkpoint", "missing");
    const auto ckpt = learner::checkpoint_from_json(m.at("checkpoint"));
    const bool accepted = api.report_result(round_id, config_id, ckpt, it->get<double>());
    return Json{{"type", "ack"},
                {"round_id", round_id},
                {"agent_id", m.value("agent_id", std::string())},
                {"config_id", config_id},
                {"accepted", accepted}};
  }
  if (type == "open_round") {
    if (!m.contains("spec")) throw ValidationError("spec", "missing");
    return Json{{"type", "round_opened"}, {"round_id", api.open_round(round_spec_from_json(m.at("spec")))}};
  }
  if (type == "status") return Json{{"type", "status"}, {"status", to_json(api.status(text(m, "round_id")))}};
  if (type == "close_round") {
    return Json{{"type", "status"}, {"status", to_json(api.close_round(text(m, "round_id")))}};
  }
  if (type == "best") return Json{{"type", "best"}, {"best", to_json(api.best(Target::parse(text(m, "target"))))}};
  if (type == "history") {
    Json entries = Json::array();
    for (const auto& h : api.history(Target::parse(text(m, "target")))) entries.push_back(to_json(h));
    return Json{{"type", "history"}, {"entries", std::move(entries)}};
  }
  if (type == "get_checkpoint") {
    return Json{{"type", "checkpoint"}, {"checkpoint", learner::to_json(api.checkpoint(text(m, "checkpoint_id")))}};
  }
  if (type == "get_evaluation") {
    const auto r = api.evaluation(text(m, "checkpoint_id"));
    return Json{{"type", "evaluation"}, {"report", r ? learner::to_json(*r) : Json(nullptr)}};
  }
  return error_message("unknown_type", "unknown message type '" + type + "'");
}

}  // namespace

Json handle_message(SweepApi& api, const Json& message) {
  try {
    return dispatch(api, message);
  } catch (const ValidationError& e) {
    return error_message(e.code(), e.what(), e.field());
  } catch (const Error& e) {
    return error_message(e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_message("bad_request", e.what());
  } catch (const std::exception& e) {
    return error_message("internal", e.what());
  }
}

SweepServer::SweepServer(SweepApi& api, std::filesystem::path socket_path)
    : api_(api), server_(std::move(socket_path), [this](const Json& m) { return handle_message(api_, m); }) {}

RemoteSweep::RemoteSweep(const std::filesystem::path& socket_path, std::string agent_id)
    : client_(socket_path), agent_id_(std::move(agent_id)) {}

Json RemoteSweep::call(Json message) {
  Json reply;
  {
    std::lock_guard lock(mu_);
    reply = client_.call(message);
  }
  if (reply.value("type", std::string()) == "error" || reply.contains("ok")) store::rethrow_error_reply(reply);
  return reply;
}

std::string RemoteSweep::open_round(const RoundSpec& spec) {
  return call({{"type", "open_round"}, {"spec", to_json(spec)}}).at("round_id").get<std::string>();
}

std::optional<IssuedConfig> RemoteSweep::request_config(const std::string& round_id, const std::string& agent_id) {
  const auto reply = call({{"type", "request_config"}, {"round_id", round_id}, {"agent_id", agent_id}});
  if (reply.at("type") == "round_done") return std::nullopt;
  IssuedConfig c;
  c.config_id = reply.at("config_id").get<std::string>();
  c.agent_id = agent_id;
  c.params = learner::hyperparams_from_json(reply.at("params"));
  return c;
}

bool RemoteSweep::report_result(const std::string& round_id, const std::string& config_id,
                                const ModelCheckpoint& ckpt, double loss) {
  return call({{"type", "report"},
               {"round_id", round_id},
               {"agent_id", agent_id_},
               {"config_id", config_id},
               {"cross_validation_loss", loss},
               {"checkpoint", learner::to_json(ckpt)}})
      .at("accepted")
      .get<bool>();
}

BestModel RemoteSweep::best(const Target& target) {
  return best_model_from_json(call({{"type", "best"}, {"target", target.key()}}).at("best"));
}

ModelCheckpoint RemoteSweep::checkpoint(const std::string& checkpoint_id) {
  return learner::checkpoint_from_json(
      call({{"type", "get_checkpoint"}, {"checkpoint_id", checkpoint_id}}).at("checkpoint"));
}

std::optional<learner::EvalReport> RemoteSweep::evaluation(const std::string& checkpoint_id) {
  const auto reply = call({{"type", "get_evaluation"}, {"checkpoint_id", checkpoint_id}});
  if (reply.at("report").is_null()) return std::nullopt;
  return learner::eval_report_from_json(reply.at("report"));
}

RoundStatus RemoteSweep::status(const std::string& round_id) {
  return round_status_from_json(call({{"type", "status"}, {"round_id", round_id}}).at("status"));
}

RoundStatus RemoteSweep::close_round(const std::string& round_id) {
  return round_status_from_json(call({{"type", "close_round"}, {"round_id", round_id}}).at("status"));
}

std::vector<HistoryEntry> RemoteSweep::history(const Target& target) {
  std::vector<HistoryEntry> out;
  const auto reply = call({{"type", "history"}, {"target", target.key()}});
  for (const auto& h : reply.at("entries")) out.push_back(history_entry_from_json(h));
  return out;
}

}  // namespace d2k::sweep
