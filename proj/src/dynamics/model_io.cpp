#include "d2k/dynamics/model_io.hpp"

#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "d2k/common/util.hpp"
#include "d2k/default_robot.hpp"

namespace d2k::dynamics {
namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

class Reader {
 public:
  explicit Reader(const YAML::Node& root) : root_(root) {
    if (!root_.IsMap()) throw ModelFileError(line_of(root_), "robot model must be a mapping");
    for (auto it = root_.begin(); it != root_.end(); ++it) {
      lines_[it->first.as<std::string>()] = line_of(it->first);
    }
  }

  YAML::Node get(const std::string& key, bool required = true) const {
    YAML::Node n = root_[key];
    if (!n && required) throw ModelFileError(line_of(root_), "missing required field '" + key + "'");
    return n;
  }

  double scalar(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ModelFileError(line_of(n), what + ": expected a number");
    }
  }

  Eigen::VectorXd vec(const std::string& key, std::size_t n, bool required = true) const {
    YAML::Node node = get(key, required);
    if (!node) return {};
    if (!node.IsSequence()) throw ModelFileError(line_of(node), key + ": expected a list");
    if (node.size() != n) {
      throw ModelFileError(line_of(node), key + ": expected " + std::to_string(n) + " entries, got " +
                                              std::to_string(node.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = scalar(node[i], key);
    return v;
  }

  Eigen::Vector3d vec3(const YAML::Node& node, const std::string& what) const {
    if (!node.IsSequence() || node.size() != 3) throw ModelFileError(line_of(node), what + ": expected 3 numbers");
    return {scalar(node[0], what), scalar(node[1], what), scalar(node[2], what)};
  }

  /// Line of `field` or `field[i]` as named by ValidationError.
  int line_for(const std::string& field) const {
    const auto bracket = field.find('[');
    const std::string key = field.substr(0, bracket);
    if (bracket != std::string::npos) {
      const auto idx = std::stoul(field.substr(bracket + 1));
      YAML::Node n = root_[key];
      if (n && n.IsSequence() && idx < n.size()) return line_of(n[idx]);
    }
    const auto it = lines_.find(key);
    return it == lines_.end() ? line_of(root_) : it->second;
  }

 private:
  YAML::Node root_;
  std::map<std::string, int> lines_;
};

}  // namespace

RobotModel parse_robot_model(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ModelFileError(e.mark.line + 1, e.msg);
  }
  Reader r(root);

  RobotModel m;
  if (auto name = r.get("name", false)) m.name = name.as<std::string>();
  const YAML::Node nj = r.get("n_joints");
  long n_signed = 0;
  try {
    n_signed = nj.as<long>();
  } catch (const YAML::Exception&) {
    throw ModelFileError(line_of(nj), "n_joints: expected an integer");
  }
  if (n_signed < 1) throw ModelFileError(line_of(nj), "n_joints: must be >= 1");
  const auto n = static_cast<std::size_t>(n_signed);

  m.a = r.vec("a", n);
  m.d = r.vec("d", n);
  m.alpha = r.vec("alpha", n);
  m.theta_offset = r.vec("theta_offset", n);
  m.mass = r.vec("mass", n);
  m.q_min = r.vec("q_min", n);
  m.q_max = r.vec("q_max", n);
  m.qd_max = r.vec("qd_max", n);
  m.qdd_max = r.vec("qdd_max", n);
  m.tau_max = r.vec("tau_max", n);
  m.friction = r.vec("friction", n);

  const YAML::Node com = r.get("com");
  if (!com.IsSequence() || com.size() != n) throw ModelFileError(line_of(com), "com: expected one 3-vector per link");
  for (std::size_t i = 0; i < n; ++i) m.com.push_back(r.vec3(com[i], "com"));

  const YAML::Node inertia = r.get("inertia");
  if (!inertia.IsSequence() || inertia.size() != n) {
    throw ModelFileError(line_of(inertia), "inertia: expected one 3x3 matrix per link");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const YAML::Node rows = inertia[i];
    if (!rows.IsSequence() || rows.size() != 3) throw ModelFileError(line_of(rows), "inertia: expected 3 rows");
    Eigen::Matrix3d I;
    for (int row = 0; row < 3; ++row) I.row(row) = r.vec3(rows[row], "inertia").transpose();
    m.inertia.push_back(I);
  }

  m.gravity = r.vec3(r.get("gravity"), "gravity");
  if (auto f = r.get("flange_offset", false)) m.flange_offset = r.vec3(f, "flange_offset");
  m.home = r.vec("home", n, false);
  if (m.home.size() == 0) m.home = 0.5 * (m.q_min + m.q_max);

  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ModelFileError(r.line_for(e.field()), e.what());
  }
  return m;
}

RobotModel load_robot_model(const std::filesystem::path& path) {
  return parse_robot_model(read_file(path));
}

std::string dump_robot_model(const RobotModel& m) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto seq = [&](const char* key, const Eigen::VectorXd& v) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i];
    out << YAML::EndSeq;
  };
  auto seq3 = [&](const Eigen::Vector3d& v) { out << YAML::Flow << YAML::BeginSeq << v[0] << v[1] << v[2] << YAML::EndSeq; };

  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << m.name;
  out << YAML::Key << "n_joints" << YAML::Value << m.n_joints();
  seq("a", m.a);
  seq("d", m.d);
  seq("alpha", m.alpha);
  seq("theta_offset", m.theta_offset);
  seq("mass", m.mass);
  out << YAML::Key << "com" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : m.com) seq3(c);
  out << YAML::EndSeq;
  out << YAML::Key << "inertia" << YAML::Value << YAML::BeginSeq;
  for (const auto& I : m.inertia) {
    out << YAML::Flow << YAML::BeginSeq;
    for (int row = 0; row < 3; ++row) seq3(I.row(row).transpose());
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
  seq("q_min", m.q_min);
  seq("q_max", m.q_max);
  seq("qd_max", m.qd_max);
  seq("qdd_max", m.qdd_max);
  seq("tau_max", m.tau_max);
  out << YAML::Key << "gravity" << YAML::Value;
  seq3(m.gravity);
  seq("friction", m.friction);
  out << YAML::Key << "flange_offset" << YAML::Value;
  seq3(m.flange_offset);
  seq("home", m.home);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

RobotModel default_robot_model() {
  static const RobotModel model = parse_robot_model(detail::kDefaultRobotYaml);
  return model;
}

}  // namespace d2k::dynamics
