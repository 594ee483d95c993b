#include "d2k/store/shadow_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/dynamics/model_io.hpp"

namespace d2k::store {
namespace fs = std::filesystem;
namespace {

class AppendFile {
 public:
  explicit AppendFile(const fs::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw Error("io", "cannot open " + path.string());
    offset_ = static_cast<std::uint64_t>(::lseek(fd_, 0, SEEK_END));
  }
  ~AppendFile() {
    if (fd_ >= 0) ::close(fd_);
  }
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;

  /// Returns the offset the bytes were written at.
  std::uint64_t append(std::string_view bytes) {
    const auto at = offset_;
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto n = ::write(fd_, bytes.data() + done, bytes.size() - done);
      if (n < 0) throw Error("io", "write failed: " + path_.string());
      done += static_cast<std::size_t>(n);
    }
    offset_ += bytes.size();
    return at;
  }
  void sync() {
    if (::fsync(fd_) != 0) throw Error("io", "fsync failed: " + path_.string());
  }

 private:
  fs::path path_;
  int fd_ = -1;
  std::uint64_t offset_ = 0;
};

std::string segment_name(const TrajectoryRecord& r) { return r.site + "__" + to_string(r.purpose) + ".jsonl"; }

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ShadowStore::ShadowStore() {
  const auto model = dynamics::default_robot_model();
  robot_types_[model.name] = {model.q_min, model.q_max};
}

ShadowStore::ShadowStore(fs::path dir) : ShadowStore() {
  dir_ = std::move(dir);
  fs::create_directories(*dir_ / "segments");
  fs::create_directories(*dir_ / "stats");
  load();
}

void ShadowStore::load() {
  const auto& dir = *dir_;
  if (fs::exists(dir / "robot_types.json")) {
    const auto j = Json::parse(read_file(dir / "robot_types.json"));
    for (const auto& [name, info] : j.items()) robot_types_[name] = {vec_from(info.at("q_min")), vec_from(info.at("q_max"))};
  }
  if (fs::exists(dir / "views.json")) {
    const auto j = Json::parse(read_file(dir / "views.json"));
    for (const auto& v : j) {
      auto view = view_from_json(v);
      views_[view.view_id] = std::move(view);
    }
  }
  if (!fs::exists(dir / "index.jsonl")) return;

  std::map<std::string, std::string> segments;
  auto segment = [&](const std::string& name) -> const std::string& {
    auto it = segments.find(name);
    if (it == segments.end()) it = segments.emplace(name, read_file(dir / "segments" / name)).first;
    return it->second;
  };
  std::istringstream index(read_file(dir / "index.jsonl"));
  std::string line;
  while (std::getline(index, line)) {
    if (index.eof()) break;  // last line without newline: interrupted write
    if (line.empty()) continue;
    const auto entry = Json::parse(line);
    const auto& seg = segment(entry.at("segment").get<std::string>());
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    if (offset + length > seg.size()) throw Error("corrupt_store", "index points past end of segment");
    auto rec = std::make_shared<TrajectoryRecord>(parse_record(std::string_view(seg).substr(offset, length)));
    if (rec->record_id != entry.at("record_id").get<std::string>()) {
      throw Error("corrupt_store", "index and segment disagree on record " + rec->record_id);
    }
    ids_.insert(rec->record_id);
    Key key{rec->created_utc, rec->record_id};
    records_.emplace(std::move(key), std::move(rec));
  }
}

TrajectoryRecord ShadowStore::prepare(TrajectoryRecord r) const {
  r.validate();
  if (r.record_id.empty()) r.record_id = make_uuid();
  if (r.created_utc.empty()) r.created_utc = utc_now();
  return r;
}

void ShadowStore::persist_records(const std::vector<TrajectoryRecord>& records) {
  if (!dir_) return;
  std::map<std::string, std::unique_ptr<AppendFile>> files;
  std::string index_lines;
  for (const auto& r : records) {
    const auto name = segment_name(r);
    auto& f = files[name];
    if (!f) f = std::make_unique<AppendFile>(*dir_ / "segments" / name);
    const auto line = serialize_record(r);
    const auto offset = f->append(line + "\n");
    Json entry;
    entry["record_id"] = r.record_id;
    entry["segment"] = name;
    entry["offset"] = offset;
    entry["length"] = line.size();
    index_lines += entry.dump() + "\n";
  }
  for (auto& [name, f] : files) f->sync();
  AppendFile index(*dir_ / "index.jsonl");
  index.append(index_lines);
  index.sync();
}

std::string ShadowStore::ingest(TrajectoryRecord record) {
  std::vector<TrajectoryRecord> one;
  one.push_back(std::move(record));
  return ingest_batch(std::move(one)).front();
}

std::vector<std::string> ShadowStore::ingest_batch(std::vector<TrajectoryRecord> records) {
  std::lock_guard write_lock(write_mu_);
  std::unordered_set<std::string> batch_ids;
  for (auto& r : records) {
    r = prepare(std::move(r));
    bool taken = false;
    {
      std::shared_lock read(mu_);
      taken = ids_.count(r.record_id) > 0;
    }
    if (taken || !batch_ids.insert(r.record_id).second) {
      throw ConflictError("duplicate record_id " + r.record_id);
    }
  }
  persist_records(records);
  std::vector<std::string> out;
  std::unique_lock lock(mu_);
  for (auto& r : records) {
    out.push_back(r.record_id);
    ids_.insert(r.record_id);
    Key key{r.created_utc, r.record_id};
    records_.emplace(std::move(key), std::make_shared<const TrajectoryRecord>(std::move(r)));
  }
  return out;
}

std::vector<RecordPtr> ShadowStore::query(const DatasetQuery& q) const {
  q.validate();
  std::vector<RecordPtr> out;
  std::shared_lock lock(mu_);
  for (const auto& [key, rec] : records_) {
    if (q.limit && out.size() >= *q.limit) break;
    if (q.matches(*rec)) out.push_back(rec);
  }
  return out;
}

DatasetStats ShadowStore::stats(const DatasetQuery& q, bool persist) {
  StatsAccumulator acc;
  for (const auto& r : query(q)) acc.add(*r);
  auto s = acc.finish();
  if (persist && dir_) {
    Json doc;
    doc["created_utc"] = utc_now();
    doc["query"] = to_json(q);
    doc["stats"] = to_json(s);
    const auto text = doc.dump(2);
    // ':' is awkward in file names on some systems
    auto stamp = doc["created_utc"].get<std::string>();
    for (auto& c : stamp) {
      if (c == ':') c = '-';
    }
    write_file_atomic(*dir_ / "stats" / (stamp + "-" + content_hash(text).substr(0, 8) + ".json"), text + "\n");
  }
  return s;
}

Histogram ShadowStore::histogram(const DatasetQuery& q, std::size_t joint_index, std::size_t n_bins) const {
  const auto matches = query(q);
  std::string type;
  if (q.robot_type) {
    type = *q.robot_type;
  } else {
    for (const auto& r : matches) {
      if (type.empty()) type = r->robot_type;
      if (r->robot_type != type) {
        throw ValidationError("robot_type", "query matches several robot types; set robot_type");
      }
    }
    if (type.empty()) throw ValidationError("robot_type", "no matching records; set robot_type");
  }
  RobotTypeInfo info;
  {
    std::shared_lock lock(mu_);
    const auto it = robot_types_.find(type);
    if (it == robot_types_.end()) throw NotFoundError("unknown robot type '" + type + "'");
    info = it->second;
  }
  if (joint_index >= static_cast<std::size_t>(info.q_min.size())) {
    throw ValidationError("joint_index", std::to_string(joint_index) + " out of range for " +
                                             std::to_string(info.q_min.size()) + " joints");
  }
  const auto j = static_cast<Eigen::Index>(joint_index);
  auto h = make_histogram(info.q_min[j], info.q_max[j], n_bins);
  for (const auto& r : matches) {
    if (j >= r->q.rows()) continue;
    for (Eigen::Index k = 0; k < r->q.cols(); ++k) add_to_histogram(h, r->q(j, k));
  }
  return h;
}

std::string ShadowStore::create_view(ShadowView view) {
  view.validate();
  std::lock_guard write_lock(write_mu_);
  if (view.view_id.empty()) view.view_id = make_uuid();
  if (view.created_utc.empty()) view.created_utc = utc_now();
  {
    std::unique_lock lock(mu_);
    if (views_.count(view.view_id)) throw ConflictError("view '" + view.view_id + "' already exists");
    views_[view.view_id] = view;
  }
  save_views();
  return view.view_id;
}

ShadowView ShadowStore::get_view(const std::string& view_id) const {
  std::shared_lock lock(mu_);
  const auto it = views_.find(view_id);
  if (it == views_.end()) throw NotFoundError("unknown view_id '" + view_id + "'");
  return it->second;
}

std::vector<Json> ShadowStore::resolve_view(const std::string& view_id) const {
  const auto view = get_view(view_id);
  std::vector<Json> out;
  for (const auto& r : query(view.query)) out.push_back(project(*r, view.projection));
  return out;
}

void ShadowStore::register_robot_type(const std::string& name, const RobotTypeInfo& info) {
  if (name.empty()) throw ValidationError("robot_type", "must not be empty");
  if (info.q_min.size() == 0 || info.q_min.size() != info.q_max.size() ||
      !(info.q_min.array() < info.q_max.array()).all()) {
    throw ValidationError("q_min", "joint ranges must be non-empty with q_min < q_max");
  }
  std::lock_guard write_lock(write_mu_);
  {
    std::unique_lock lock(mu_);
    robot_types_[name] = info;
  }
  save_robot_types();
}

std::size_t ShadowStore::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

std::vector<fs::path> ShadowStore::persisted_stats() const {
  std::vector<fs::path> out;
  if (!dir_) return out;
  for (const auto& e : fs::directory_iterator(*dir_ / "stats")) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ShadowStore::save_views() const {
  if (!dir_) return;
  Json arr = Json::array();
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, v] : views_) arr.push_back(to_json(v));
  }
  write_file_atomic(*dir_ / "views.json", arr.dump(2) + "\n");
}

void ShadowStore::save_robot_types() const {
  if (!dir_) return;
  Json doc = Json::object();
  {
    std::shared_lock lock(mu_);
    for (const auto& [name, info] : robot_types_) {
      doc[name]["q_min"] = vec_json(info.q_min);
      doc[name]["q_max"] = vec_json(info.q_max);
    }
  }
  write_file_atomic(*dir_ / "robot_types.json", doc.dump(2) + "\n");
}

fs::path resolve_store_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("D2K_STORE_DIR"); env && *env) return env;
  throw ValidationError("store_dir", "pass --store-dir or set D2K_STORE_DIR");
}

}  // namespace d2k::store
