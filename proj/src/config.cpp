#include "vppsim/config.hpp"

#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/numfmt.hpp"

namespace vppsim {

namespace {

[[noreturn]] void fail(const toml::node& node, const std::string& msg) {
  std::ostringstream m;
  m << msg;
  if (node.source().begin.line > 0) m << " (line " << node.source().begin.line << ")";
  throw ConfigError(m.str());
}

// Strict view of one table: every key must be consumed.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }
  bool has(std::string_view key) const { return t_ && t_->contains(key); }

  const toml::node* get(std::string_view key) {
    used_.insert(std::string(key));
    return t_ ? t_->get(key) : nullptr;
  }

  double number(std::string_view key, double fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    return as_number(*n, key);
  }

  std::optional<double> optional_number(std::string_view key) {
    const toml::node* n = get(key);
    if (!n) return std::nullopt;
    return as_number(*n, key);
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback, std::int64_t min_value) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    const auto v = n->value_exact<std::int64_t>();
    if (!v) fail(*n, field(key) + ": expected an integer");
    if (*v < min_value) fail(*n, field(key) + ": must be >= " + std::to_string(min_value));
    return *v;
  }

  std::string string(std::string_view key, std::string fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    const auto v = n->value_exact<std::string>();
    if (!v) fail(*n, field(key) + ": expected a string");
    return *v;
  }

  Eigen::VectorXd vector(std::string_view key) {
    const toml::node* n = get(key);
    if (!n) throw ConfigError(field(key) + ": missing");
    return as_vector(*n, key);
  }

  Eigen::MatrixXd matrix(std::string_view key) {
    const toml::node* n = get(key);
    if (!n) throw ConfigError(field(key) + ": missing");
    const toml::array* rows = n->as_array();
    if (!rows || rows->empty()) fail(*n, field(key) + ": expected a non-empty array of rows");
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const Eigen::VectorXd row = as_vector((*rows)[i], key);
      if (i == 0) m.resize(static_cast<Eigen::Index>(rows->size()), row.size());
      if (row.size() != m.cols()) fail((*rows)[i], field(key) + ": rows have different lengths");
      m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
  }

  std::string field(std::string_view key) const { return name_ + "." + std::string(key); }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      if (!used_.count(std::string(k.str()))) fail(v, name_ + ": unknown field '" + std::string(k.str()) + "'");
    }
  }

  double as_number(const toml::node& n, std::string_view key) const {
    if (!(n.is_floating_point() || n.is_integer())) fail(n, field(key) + ": expected a number");
    return *n.value<double>();
  }

  Eigen::VectorXd as_vector(const toml::node& n, std::string_view key) const {
    if (n.is_floating_point() || n.is_integer()) return Eigen::VectorXd::Constant(1, as_number(n, key));
    const toml::array* arr = n.as_array();
    if (!arr || arr->empty()) fail(n, field(key) + ": expected a number or a non-empty array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number((*arr)[i], key);
    return v;
  }

 private:
  const toml::table* t_;
  std::string name_;
  std::set<std::string> used_;
};

const toml::table* sub_table(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  const toml::table* t = n->as_table();
  if (!t) fail(*n, std::string(name) + ": expected a table");
  return t;
}

CaseFormat case_format_from_string(const std::string& name) {
  if (name == "auto") return CaseFormat::Auto;
  if (name == "native") return CaseFormat::Native;
  if (name == "matpower") return CaseFormat::Matpower;
  throw ConfigError("case.format: unknown format '" + name + "' (expected auto, native or matpower)");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

SimConfig from_table(const toml::table& root, const std::filesystem::path& base_dir) {
  SimConfig cfg;
  std::set<std::string> known = {"preset", "case", "reference", "controller", "simulation", "powerflow",
                                 "thresholds"};
  for (const auto& [k, v] : root) {
    if (!known.count(std::string(k.str()))) fail(v, "unknown section or key '" + std::string(k.str()) + "'");
  }
  if (const toml::node* n = root.get("preset")) {
    const auto v = n->value_exact<std::string>();
    if (!v) fail(*n, "preset: expected a string");
    cfg.preset = *v;
  }

  Section cs(sub_table(root, "case"), "case");
  if (!cs.present()) throw ConfigError("case: missing section [case]");
  const std::string case_path = cs.string("path", "");
  if (case_path.empty()) throw ConfigError("case.path: missing");
  cfg.case_path = resolve(base_dir, case_path).string();
  cfg.case_format = cs.string("format", "auto");
  const CaseFormat format = case_format_from_string(cfg.case_format);
  cfg.der_annotations = resolve(base_dir, cs.string("der_annotations", "")).string();
  cs.finish();

  Section rs(sub_table(root, "reference"), "reference");
  cfg.reference_mode = reference_mode_from_string(rs.string("mode", "fixed"));
  if (!rs.has("r_base")) throw ConfigError("reference.r_base: missing");
  cfg.r_base = rs.number("r_base", 0.0);
  rs.finish();

  Section ctl(sub_table(root, "controller"), "controller");
  const std::string kind_name = ctl.string("kind", "lag");
  ControllerKind kind;
  try {
    kind = controller_kind_from_string(kind_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  ControllerParams cp;
  cp.kind = kind;
  if (kind == ControllerKind::LinearSS) {
    cp.a = ctl.matrix("a");
    cp.b = ctl.vector("b");
    cp.c = ctl.vector("c").transpose();
    cp.d = ctl.number("d", 0.0);
  } else {
    cp.kp = ctl.number("kp", cp.kp);
    cp.ki = ctl.number("ki", cp.ki);
    if (kind == ControllerKind::Lag)
      cp.leak = ctl.number("leak", cp.leak);
    else
      cp.leak = 1.0;
  }
  cp.pi_min = ctl.optional_number("pi_min");
  cp.pi_max = ctl.optional_number("pi_max");
  if (cp.pi_min.has_value() != cp.pi_max.has_value())
    throw ConfigError("controller.pi_min: pi_min and pi_max must be given together");
  cfg.controller = cp;
  if (ctl.has("xc0")) {
    cfg.xc0 = ctl.vector("xc0");
  } else {
    cfg.xc0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cp.state_dim()));
  }
  if (cfg.xc0.size() == 1 && cp.state_dim() > 1)
    cfg.xc0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cp.state_dim()), cfg.xc0[0]);
  ctl.finish();

  Section sim(sub_table(root, "simulation"), "simulation");
  cfg.horizon = static_cast<std::size_t>(sim.integer("horizon", 2000, 1));
  cfg.runs = static_cast<std::size_t>(sim.integer("runs", 1, 1));
  cfg.seed = static_cast<std::uint64_t>(sim.integer("seed", 1, 0));
  cfg.burn_in = static_cast<std::size_t>(sim.integer("burn_in", static_cast<std::int64_t>(cfg.horizon / 2), 0));
  cfg.initial_commitment = sim.string("initial_commitment", "all_off");
  cfg.agent_thin = static_cast<std::size_t>(sim.integer("agent_thin", 0, 0));
  if (const toml::node* n = sim.get("noise_lanes")) {
    const toml::array* arr = n->as_array();
    if (!arr) fail(*n, "simulation.noise_lanes: expected an array of integers");
    for (const auto& item : *arr) {
      const auto v = item.value_exact<std::int64_t>();
      if (!v || *v < 0 || *v > std::numeric_limits<std::uint32_t>::max())
        fail(item, "simulation.noise_lanes: expected integers in [0, 2^32)");
      cfg.noise_lanes.push_back(static_cast<std::uint32_t>(*v));
    }
  }
  sim.finish();

  Section pf(sub_table(root, "powerflow"), "powerflow");
  cfg.powerflow.tolerance = pf.number("tolerance", cfg.powerflow.tolerance);
  cfg.powerflow.max_iterations = static_cast<int>(pf.integer("max_iterations", cfg.powerflow.max_iterations, 1));
  pf.finish();

  Section th(sub_table(root, "thresholds"), "thresholds");
  cfg.thresholds.regulation_band = th.number("regulation_band", cfg.thresholds.regulation_band);
  cfg.thresholds.gap_se_factor = th.number("gap_se_factor", cfg.thresholds.gap_se_factor);
  cfg.thresholds.ks_max = th.number("ks_max", cfg.thresholds.ks_max);
  cfg.thresholds.fairness_sigma_factor = th.number("fairness_sigma_factor", cfg.thresholds.fairness_sigma_factor);
  th.finish();
  if (!(cfg.thresholds.regulation_band > 0.0)) throw ConfigError("thresholds.regulation_band: must be > 0");
  if (!(cfg.thresholds.ks_max >= 0.0 && cfg.thresholds.ks_max <= 1.0))
    throw ConfigError("thresholds.ks_max: must lie in [0, 1]");

  try {
    cfg.network = std::make_shared<const Network>(load_case(cfg.case_path, format, cfg.der_annotations));
  } catch (const CaseError& e) {
    throw ConfigError(std::string("case.path: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("case.path: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

toml::table parse_text(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& err) {
    std::ostringstream m;
    m << "line " << err.source().begin.line << ": " << err.description();
    throw ConfigError(m.str());
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_toml_double(v[i]);
  return s + "]";
}

}  // namespace

SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir) {
  return from_table(parse_text(text), base_dir);
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const toml::table root = parse_text(text);
  const std::filesystem::path base = path.parent_path();
  if (const toml::node* n = root.get("config"); n && root.contains("manifest")) {
    const toml::table* t = n->as_table();
    if (!t) fail(*n, "config: expected a table");
    return from_table(*t, base);
  }
  return from_table(root, base);
}

std::string serialize_sim_config(const SimConfig& cfg, std::string_view table_prefix) {
  const std::string pre = table_prefix.empty() ? "" : std::string(table_prefix) + ".";
  std::ostringstream o;
  if (!table_prefix.empty()) o << "[" << table_prefix << "]\n";
  o << "preset = " << quote(cfg.preset) << "\n";

  o << "\n[" << pre << "case]\n";
  o << "path = " << quote(cfg.case_path) << "\n";
  o << "format = " << quote(cfg.case_format) << "\n";
  if (!cfg.der_annotations.empty()) o << "der_annotations = " << quote(cfg.der_annotations) << "\n";

  o << "\n[" << pre << "reference]\n";
  o << "mode = " << quote(std::string(to_string(cfg.reference_mode))) << "\n";
  o << "r_base = " << format_toml_double(cfg.r_base) << "\n";

  const ControllerParams& c = cfg.controller;
  o << "\n[" << pre << "controller]\n";
  o << "kind = " << quote(std::string(to_string(c.kind))) << "\n";
  if (c.kind == ControllerKind::LinearSS) {
    o << "a = [";
    for (Eigen::Index i = 0; i < c.a.rows(); ++i) o << (i ? ", " : "") << vec(c.a.row(i).transpose());
    o << "]\n";
    o << "b = " << vec(c.b) << "\n";
    o << "c = " << vec(c.c.transpose()) << "\n";
    o << "d = " << format_toml_double(c.d) << "\n";
  } else {
    o << "kp = " << format_toml_double(c.kp) << "\n";
    o << "ki = " << format_toml_double(c.ki) << "\n";
    if (c.kind == ControllerKind::Lag) o << "leak = " << format_toml_double(c.leak) << "\n";
  }
  if (c.pi_min && c.pi_max) {
    o << "pi_min = " << format_toml_double(*c.pi_min) << "\n";
    o << "pi_max = " << format_toml_double(*c.pi_max) << "\n";
  }
  if (cfg.xc0.size() == 1)
    o << "xc0 = " << format_toml_double(cfg.xc0[0]) << "\n";
  else
    o << "xc0 = " << vec(cfg.xc0) << "\n";

  o << "\n[" << pre << "simulation]\n";
  o << "horizon = " << cfg.horizon << "\n";
  o << "runs = " << cfg.runs << "\n";
  o << "seed = " << cfg.seed << "\n";
  o << "burn_in = " << cfg.burn_in << "\n";
  o << "initial_commitment = " << quote(cfg.initial_commitment) << "\n";
  o << "agent_thin = " << cfg.agent_thin << "\n";
  if (!cfg.noise_lanes.empty()) {
    o << "noise_lanes = [";
    for (std::size_t i = 0; i < cfg.noise_lanes.size(); ++i) o << (i ? ", " : "") << cfg.noise_lanes[i];
    o << "]\n";
  }

  o << "\n[" << pre << "powerflow]\n";
  o << "tolerance = " << format_toml_double(cfg.powerflow.tolerance) << "\n";
  o << "max_iterations = " << cfg.powerflow.max_iterations << "\n";

  o << "\n[" << pre << "thresholds]\n";
  o << "regulation_band = " << format_toml_double(cfg.thresholds.regulation_band) << "\n";
  o << "gap_se_factor = " << format_toml_double(cfg.thresholds.gap_se_factor) << "\n";
  o << "ks_max = " << format_toml_double(cfg.thresholds.ks_max) << "\n";
  o << "fairness_sigma_factor = " << format_toml_double(cfg.thresholds.fairness_sigma_factor) << "\n";
  return o.str();
}

}  // namespace vppsim
