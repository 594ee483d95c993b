#pragma once

#include <filesystem>
#include <memory>

#include "d2k/common/framing.hpp"
#include "d2k/store/shadow_store.hpp"

namespace d2k::store {

/// Dispatch one request. Verbs: ingest, query, stats, histogram,
/// create_view, resolve_view, plus get_view and register_robot_type.
/// Never throws; failures become {ok: false, error: {code, message}}.
Json handle_request(StoreApi& store, const Json& request);

/// Serves a store over a unix socket, one thread per connection.
class StoreServer {
 public:
  StoreServer(StoreApi& store, std::filesystem::path socket_path);
  void start() { server_.start(); }
  void stop() { server_.stop(); }

 private:
  StoreApi& store_;
  net::UnixServer server_;
};

/// Client side of the store protocol. Error replies are rethrown as the
/// matching exception type (ValidationError, ConflictError, ...).
class RemoteStore : public StoreApi {
 public:
  explicit RemoteStore(const std::filesystem::path& socket_path);

  std::string ingest(TrajectoryRecord record) override;
  std::vector<RecordPtr> query(const DatasetQuery& q) const override;
  DatasetStats stats(const DatasetQuery& q, bool persist = false) override;
  Histogram histogram(const DatasetQuery& q, std::size_t joint_index, std::size_t n_bins) const override;
  std::string create_view(ShadowView view) override;
  ShadowView get_view(const std::string& view_id) const override;
  std::vector<Json> resolve_view(const std::string& view_id) const override;
  void register_robot_type(const std::string& name, const RobotTypeInfo& info) override;

 private:
  Json call(const Json& request) const;
  mutable net::UnixClient client_;
};

/// Throw the exception matching an error reply's code.
[[noreturn]] void rethrow_error_reply(const Json& reply);

}  // namespace d2k::store
