#include "d2k/store/service.hpp"

#include "d2k/common/error.hpp"

namespace d2k::store {
namespace {

Json ok() { return Json{{"ok", true}}; }

Json error_reply(const std::string& code, const std::string& message, const std::string& field = {}) {
  Json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return Json{{"ok", false}, {"error", std::move(err)}};
}

const Json& arg(const Json& req, const char* name) {
  const auto it = req.find(name);
  if (it == req.end()) throw ValidationError(name, "missing from request");
  return *it;
}

std::size_t index_arg(const Json& req, const char* name) {
  const auto& v = arg(req, name);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(name, "must be a non-negative integer");
  return v.get<std::size_t>();
}

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json dispatch(StoreApi& store, const Json& req) {
  if (!req.is_object()) throw ValidationError("request", "must be an object");
  const auto& verb_json = arg(req, "verb");
  if (!verb_json.is_string()) throw ValidationError("verb", "must be a string");
  const auto verb = verb_json.get<std::string>();
  const Json no_query = Json::object();
  const auto query_arg = [&] { return query_from_json(req.contains("query") ? req.at("query") : no_query); };

  auto reply = ok();
  if (verb == "ingest") {
    reply["record_id"] = store.ingest(record_from_json(arg(req, "record")));
  } else if (verb == "query") {
    Json records = Json::array();
    for (const auto& r : store.query(query_arg())) records.push_back(to_json(*r));
    reply["records"] = std::move(records);
  } else if (verb == "stats") {
    const bool persist = req.contains("persist") && req.at("persist").get<bool>();
    reply["stats"] = to_json(store.stats(query_arg(), persist));
  } else if (verb == "histogram") {
    reply["histogram"] = to_json(store.histogram(query_arg(), index_arg(req, "joint_index"), index_arg(req, "n_bins")));
  } else if (verb == "create_view") {
    reply["view_id"] = store.create_view(view_from_json(arg(req, "view")));
  } else if (verb == "resolve_view") {
    const auto id = arg(req, "view_id").get<std::string>();
    reply["records"] = store.resolve_view(id);
  } else if (verb == "get_view") {
    reply["view"] = to_json(store.get_view(arg(req, "view_id").get<std::string>()));
  } else if (verb == "register_robot_type") {
    store.register_robot_type(arg(req, "robot_type").get<std::string>(),
                              {vec_from(arg(req, "q_min")), vec_from(arg(req, "q_max"))});
  } else {
    return error_reply("unknown_verb", "unknown verb '" + verb + "'");
  }
  return reply;
}

}  // namespace

Json handle_request(StoreApi& store, const Json& request) {
  try {
    return dispatch(store, request);
  } catch (const ValidationError& e) {
    return error_reply(e.code(), e.what(), e.field());
  } catch (const Error& e) {
    return error_reply(e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_reply("bad_request", e.what());
  } catch (const std::exception& e) {
    return error_reply("internal", e.what());
  }
}

StoreServer::StoreServer(StoreApi& store, std::filesystem::path socket_path)
    : store_(store), server_(std::move(socket_path), [this](const Json& req) { return handle_request(store_, req); }) {}

void rethrow_error_reply(const Json& reply) {
  const auto& err = reply.at("error");
  const auto code = err.value("code", std::string("internal"));
  const auto message = err.value("message", std::string());
  if (code == "schema_violation") {
    const auto field = err.value("field", std::string("request"));
    const auto prefix = field + ": ";
    throw ValidationError(field, message.rfind(prefix, 0) == 0 ? message.substr(prefix.size()) : message);
  }
  if (code == "conflict") throw ConflictError(message);
  if (code == "not_found") throw NotFoundError(message);
  throw Error(code, message);
}

RemoteStore::RemoteStore(const std::filesystem::path& socket_path) : client_(socket_path) {}

Json RemoteStore::call(const Json& request) const {
  auto reply = client_.call(request);
  if (!reply.value("ok", false)) rethrow_error_reply(reply);
  return reply;
}

std::string RemoteStore::ingest(TrajectoryRecord record) {
  return call({{"verb", "ingest"}, {"record", to_json(record)}}).at("record_id").get<std::string>();
}

std::vector<RecordPtr> RemoteStore::query(const DatasetQuery& q) const {
  std::vector<RecordPtr> out;
  const auto reply = call({{"verb", "query"}, {"query", to_json(q)}});
  for (const auto& r : reply.at("records")) {
    out.push_back(std::make_shared<const TrajectoryRecord>(record_from_json(r)));
  }
  return out;
}

DatasetStats RemoteStore::stats(const DatasetQuery& q, bool persist) {
  return stats_from_json(call({{"verb", "stats"}, {"query", to_json(q)}, {"persist", persist}}).at("stats"));
}

Histogram RemoteStore::histogram(const DatasetQuery& q, std::size_t joint_index, std::size_t n_bins) const {
  const auto h = call({{"verb", "histogram"}, {"query", to_json(q)}, {"joint_index", joint_index}, {"n_bins", n_bins}})
                     .at("histogram");
  return {h.at("edges").get<std::vector<double>>(), h.at("counts").get<std::vector<std::size_t>>()};
}

std::string RemoteStore::create_view(ShadowView view) {
  return call({{"verb", "create_view"}, {"view", to_json(view)}}).at("view_id").get<std::string>();
}

ShadowView RemoteStore::get_view(const std::string& view_id) const {
  return view_from_json(call({{"verb", "get_view"}, {"view_id", view_id}}).at("view"));
}

std::vector<Json> RemoteStore::resolve_view(const std::string& view_id) const {
  const auto records = call({{"verb", "resolve_view"}, {"view_id", view_id}}).at("records");
  return {records.begin(), records.end()};
}

void RemoteStore::register_robot_type(const std::string& name, const RobotTypeInfo& info) {
  call({{"verb", "register_robot_type"}, {"robot_type", name}, {"q_min", vec_json(info.q_min)},
        {"q_max", vec_json(info.q_max)}});
}

}  // namespace d2k::store
