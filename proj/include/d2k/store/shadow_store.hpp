#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "d2k/store/query.hpp"

namespace d2k::store {

/// Joint-limit span of a robot type, used as the histogram range.
struct RobotTypeInfo {
  Eigen::VectorXd q_min, q_max;
};

/// Operations shared by the in-process store and the socket client.
class StoreApi {
 public:
  virtual ~StoreApi() = default;

  /// Returns the record id (generated when absent). Throws ValidationError on
  /// a schema violation and ConflictError on a duplicate id.
  virtual std::string ingest(TrajectoryRecord record) = 0;
  /// Records matching every filter, ordered by (created_utc, record_id).
  virtual std::vector<RecordPtr> query(const DatasetQuery& q) const = 0;
  /// With persist, the result is also written under stats/ in the store.
  virtual DatasetStats stats(const DatasetQuery& q, bool persist = false) = 0;
  virtual Histogram histogram(const DatasetQuery& q, std::size_t joint_index, std::size_t n_bins) const = 0;
  virtual std::string create_view(ShadowView view) = 0;
  virtual ShadowView get_view(const std::string& view_id) const = 0;
  /// Query then projection; one JSON object per record.
  virtual std::vector<Json> resolve_view(const std::string& view_id) const = 0;
  virtual void register_robot_type(const std::string& name, const RobotTypeInfo& info) = 0;
};

/**
 * Append-only trajectory store.
 *
 * On disk (when a directory is given):
 *   segments/<site>__<purpose>.jsonl   one record per line
 *   index.jsonl                        {record_id, segment, offset, length}
 *   views.json, robot_types.json       small documents, replaced atomically
 *   stats/<timestamp>-<hash>.json      persisted statistics
 *
 * A record line is fsync'ed before its index line is written, and loading
 * trusts the index only, so a crash leaves each record fully present or
 * absent. Readers share a lock; writers are serialized.
 */
class ShadowStore : public StoreApi {
 public:
  /// Purely in-memory store.
  ShadowStore();
  /// Opens (creating if needed) a durable store rooted at `dir`.
  explicit ShadowStore(std::filesystem::path dir);

  std::string ingest(TrajectoryRecord record) override;
  /// All-or-nothing: the whole batch is validated before anything is written.
  std::vector<std::string> ingest_batch(std::vector<TrajectoryRecord> records);
  std::vector<RecordPtr> query(const DatasetQuery& q) const override;
  DatasetStats stats(const DatasetQuery& q, bool persist = false) override;
  Histogram histogram(const DatasetQuery& q, std::size_t joint_index, std::size_t n_bins) const override;
  std::string create_view(ShadowView view) override;
  ShadowView get_view(const std::string& view_id) const override;
  std::vector<Json> resolve_view(const std::string& view_id) const override;
  void register_robot_type(const std::string& name, const RobotTypeInfo& info) override;

  std::size_t size() const;
  const std::optional<std::filesystem::path>& directory() const { return dir_; }
  /// Paths of persisted statistics documents, oldest first.
  std::vector<std::filesystem::path> persisted_stats() const;

 private:
  using Key = std::pair<std::string, std::string>;  // (created_utc, record_id)

  void load();
  TrajectoryRecord prepare(TrajectoryRecord r) const;
  void persist_records(const std::vector<TrajectoryRecord>& records);
  void save_views() const;
  void save_robot_types() const;

  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mu_;
  std::mutex write_mu_;
  std::map<Key, RecordPtr> records_;
  std::unordered_set<std::string> ids_;
  std::map<std::string, ShadowView> views_;
  std::map<std::string, RobotTypeInfo> robot_types_;
};

/// Store directory from an explicit flag, else $D2K_STORE_DIR, else throws.
std::filesystem::path resolve_store_dir(const std::optional<std::string>& flag);

}  // namespace d2k::store
