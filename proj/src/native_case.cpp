#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/numfmt.hpp"

namespace vppsim {

namespace {

std::string fmt(double v) { return format_toml_double(v); }

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

[[noreturn]] void schema_error(const toml::node& node, const std::string& msg) {
  const auto& src = node.source();
  std::ostringstream m;
  m << "line " << src.begin.line << ": " << msg;
  throw CaseError(CaseErrorKind::SchemaViolation, m.str());
}

// Strict accessor for one [[table]] entry: every key must be consumed.
class Fields {
 public:
  Fields(const toml::table& t, std::string section) : t_(t), section_(std::move(section)) {}

  double number(std::string_view key, std::optional<double> fallback = std::nullopt) {
    used_.insert(std::string(key));
    const toml::node* n = t_.get(key);
    if (!n) {
      if (fallback) return *fallback;
      schema_error(t_, section_ + ": missing field '" + std::string(key) + "'");
    }
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
    schema_error(*n, section_ + "." + std::string(key) + ": expected a number");
  }

  std::int64_t integer(std::string_view key, std::optional<std::int64_t> fallback = std::nullopt) {
    used_.insert(std::string(key));
    const toml::node* n = t_.get(key);
    if (!n) {
      if (fallback) return *fallback;
      schema_error(t_, section_ + ": missing field '" + std::string(key) + "'");
    }
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    schema_error(*n, section_ + "." + std::string(key) + ": expected an integer");
  }

  std::string string(std::string_view key, std::optional<std::string> fallback = std::nullopt) {
    used_.insert(std::string(key));
    const toml::node* n = t_.get(key);
    if (!n) {
      if (fallback) return *fallback;
      schema_error(t_, section_ + ": missing field '" + std::string(key) + "'");
    }
    if (auto v = n->value_exact<std::string>()) return *v;
    schema_error(*n, section_ + "." + std::string(key) + ": expected a string");
  }

  bool has(std::string_view key) const { return t_.contains(key); }

  const toml::node& node() const { return t_; }

  void finish() const {
    for (const auto& [k, v] : t_) {
      if (!used_.count(std::string(k.str()))) schema_error(v, section_ + ": unknown field '" + std::string(k.str()) + "'");
    }
  }

 private:
  const toml::table& t_;
  std::string section_;
  std::set<std::string> used_;
};

template <typename Fn>
void for_each_entry(const toml::table& root, const char* section, bool required, Fn&& fn) {
  const toml::node* n = root.get(section);
  if (!n) {
    if (required) throw CaseError(CaseErrorKind::MissingSection, std::string("missing section [[") + section + "]]");
    return;
  }
  const toml::array* arr = n->as_array();
  if (!arr) schema_error(*n, std::string(section) + ": expected an array of tables ([[" + section + "]])");
  std::size_t i = 0;
  for (const auto& item : *arr) {
    const toml::table* t = item.as_table();
    if (!t) schema_error(item, std::string(section) + ": expected a table");
    fn(*t, std::string(section) + "[" + std::to_string(i++) + "]");
  }
}

toml::table parse_toml(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& err) {
    std::ostringstream m;
    m << "line " << err.source().begin.line << ": " << err.description();
    throw CaseError(CaseErrorKind::SchemaViolation, m.str());
  }
}

ProbFunction read_prob(Fields& f, const std::string& where) {
  const std::string kind_name = f.string("prob");
  ProbKind kind;
  try {
    kind = prob_kind_from_string(kind_name);
  } catch (const std::invalid_argument& e) {
    schema_error(f.node(), where + ": " + e.what());
  }
  ProbFunction p;
  p.kind = kind;
  if (kind == ProbKind::Constant) {
    p.value = f.number("value");
    if (!(p.value >= 0.0 && p.value <= 1.0)) schema_error(f.node(), where + ".value: must lie in [0, 1]");
  } else {
    p.xi = f.number("xi");
    p.x0 = f.number("x0");
  }
  return p;
}

}  // namespace

Network parse_native_case(std::string_view text) {
  const toml::table root = parse_toml(text);
  Network net;

  const toml::node* sys = root.get("system");
  if (!sys || !sys->is_table()) throw CaseError(CaseErrorKind::MissingSection, "missing section [system]");
  {
    Fields f(*sys->as_table(), "system");
    net.name = f.string("name", std::string());
    net.base_mva = f.number("base_mva");
    if (!(net.base_mva > 0.0)) schema_error(*sys, "system.base_mva: must be > 0");
    f.finish();
  }
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "system" && key != "bus" && key != "branch" && key != "gen" && key != "der")
      schema_error(v, "unknown section '" + key + "'");
  }

  std::map<int, std::size_t> index;
  for_each_entry(root, "bus", true, [&](const toml::table& t, const std::string& where) {
    Fields f(t, where);
    Bus b;
    b.id = static_cast<int>(f.integer("id"));
    const std::string kind = f.string("kind");
    if (kind == "slack") {
      b.kind = BusKind::Slack;
    } else if (kind == "pv") {
      b.kind = BusKind::PV;
    } else if (kind == "pq") {
      b.kind = BusKind::PQ;
    } else {
      schema_error(t, where + ".kind: expected slack, pv or pq, got '" + kind + "'");
    }
    b.p_load = f.number("p_load", 0.0);
    b.q_load = f.number("q_load", 0.0);
    b.v_set = f.number("v_set", 1.0);
    b.shunt_g = f.number("shunt_g", 0.0);
    b.shunt_b = f.number("shunt_b", 0.0);
    if (b.kind != BusKind::PQ && !(b.v_set > 0.0)) schema_error(t, where + ".v_set: must be > 0 on slack/pv buses");
    f.finish();
    if (!index.emplace(b.id, net.buses.size()).second)
      throw CaseError(CaseErrorKind::DuplicateBusId, where + ": duplicate bus id " + std::to_string(b.id));
    net.buses.push_back(b);
  });

  auto lookup = [&index](const toml::table& t, const std::string& where, std::int64_t id) {
    const auto it = index.find(static_cast<int>(id));
    if (it == index.end()) {
      std::ostringstream m;
      m << "line " << t.source().begin.line << ": " << where << " references unknown bus " << id;
      throw CaseError(CaseErrorKind::UnknownBusReference, m.str());
    }
    return it->second;
  };

  for_each_entry(root, "branch", true, [&](const toml::table& t, const std::string& where) {
    Fields f(t, where);
    Branch br;
    br.from_bus = lookup(t, where, f.integer("from"));
    br.to_bus = lookup(t, where, f.integer("to"));
    br.r = f.number("r");
    br.x = f.number("x");
    br.b_charging = f.number("b", 0.0);
    br.tap = f.number("tap", 1.0);
    br.in_service = f.integer("status", 1) != 0;
    if (!(br.tap > 0.0)) schema_error(t, where + ".tap: must be > 0");
    if (br.r == 0.0 && br.x == 0.0) schema_error(t, where + ": r and x are both zero");
    f.finish();
    net.branches.push_back(br);
  });

  for_each_entry(root, "gen", false, [&](const toml::table& t, const std::string& where) {
    Fields f(t, where);
    Generator g;
    g.bus = lookup(t, where, f.integer("bus"));
    g.p_out = f.number("p_out");
    g.q_min = f.number("q_min", 0.0);
    g.q_max = f.number("q_max", 0.0);
    g.in_service = f.integer("status", 1) != 0;
    if (g.q_min > g.q_max) schema_error(t, where + ": q_min > q_max");
    f.finish();
    net.gens.push_back(g);
  });

  for_each_entry(root, "der", false, [&](const toml::table& t, const std::string& where) {
    Fields f(t, where);
    DerSpec d;
    const auto gi = f.integer("gen");
    if (gi < 0 || static_cast<std::size_t>(gi) >= net.gens.size())
      schema_error(t, where + ".gen: generator index " + std::to_string(gi) + " out of range");
    d.gen = static_cast<std::size_t>(gi);
    d.prob = read_prob(f, where);
    d.group = f.string("group", std::string(to_string(d.prob.kind)));
    f.finish();
    if (!net.ders.empty() && net.ders.back().gen >= d.gen)
      schema_error(t, where + ".gen: der entries must list generators in increasing order");
    net.ders.push_back(d);
  });

  link_ders(net);
  return net;
}

std::string serialize_native_case(const Network& net) {
  std::ostringstream o;
  o << "# vppsim native case\n";
  o << "[system]\n";
  o << "name = " << quote(net.name) << "\n";
  o << "base_mva = " << fmt(net.base_mva) << "\n";
  for (const auto& b : net.buses) {
    o << "\n[[bus]]\n";
    o << "id = " << b.id << "\n";
    o << "kind = \"" << to_string(b.kind) << "\"\n";
    o << "p_load = " << fmt(b.p_load) << "\n";
    o << "q_load = " << fmt(b.q_load) << "\n";
    o << "v_set = " << fmt(b.v_set) << "\n";
    o << "shunt_g = " << fmt(b.shunt_g) << "\n";
    o << "shunt_b = " << fmt(b.shunt_b) << "\n";
  }
  for (const auto& br : net.branches) {
    o << "\n[[branch]]\n";
    o << "from = " << net.buses[br.from_bus].id << "\n";
    o << "to = " << net.buses[br.to_bus].id << "\n";
    o << "r = " << fmt(br.r) << "\n";
    o << "x = " << fmt(br.x) << "\n";
    o << "b = " << fmt(br.b_charging) << "\n";
    o << "tap = " << fmt(br.tap) << "\n";
    o << "status = " << (br.in_service ? 1 : 0) << "\n";
  }
  for (const auto& g : net.gens) {
    o << "\n[[gen]]\n";
    o << "bus = " << net.buses[g.bus].id << "\n";
    o << "p_out = " << fmt(g.p_out) << "\n";
    o << "q_min = " << fmt(g.q_min) << "\n";
    o << "q_max = " << fmt(g.q_max) << "\n";
    o << "status = " << (g.in_service ? 1 : 0) << "\n";
  }
  for (const auto& d : net.ders) {
    o << "\n[[der]]\n";
    o << "gen = " << d.gen << "\n";
    o << "group = " << quote(d.group) << "\n";
    o << "prob = \"" << to_string(d.prob.kind) << "\"\n";
    if (d.prob.kind == ProbKind::Constant) {
      o << "value = " << fmt(d.prob.value) << "\n";
    } else {
      o << "xi = " << fmt(d.prob.xi) << "\n";
      o << "x0 = " << fmt(d.prob.x0) << "\n";
    }
  }
  return o.str();
}

void apply_der_annotations(Network& net, std::string_view sidecar_text) {
  const toml::table root = parse_toml(sidecar_text);
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "remove_gens_at" && key != "der") schema_error(v, "unknown field '" + key + "'");
  }

  std::set<std::size_t> remove_at;
  if (const toml::node* n = root.get("remove_gens_at")) {
    const toml::array* arr = n->as_array();
    if (!arr) schema_error(*n, "remove_gens_at: expected an array of bus ids");
    for (const auto& item : *arr) {
      const auto id = item.value_exact<std::int64_t>();
      if (!id) schema_error(item, "remove_gens_at: expected integer bus ids");
      const auto bi = net.bus_index(static_cast<int>(*id));
      if (!bi) {
        throw CaseError(CaseErrorKind::UnknownBusReference,
                        "remove_gens_at references unknown bus " + std::to_string(*id));
      }
      remove_at.insert(*bi);
    }
  }

  // Drop conventional generators at the listed buses, remapping existing DER links.
  std::vector<Generator> kept;
  std::vector<std::size_t> remap(net.gens.size(), SIZE_MAX);
  for (std::size_t i = 0; i < net.gens.size(); ++i) {
    const Generator& g = net.gens[i];
    if (!g.is_der && remove_at.count(g.bus)) continue;
    remap[i] = kept.size();
    kept.push_back(g);
  }
  net.gens = std::move(kept);
  for (auto& d : net.ders) d.gen = remap[d.gen];

  for_each_entry(root, "der", false, [&](const toml::table& t, const std::string& where) {
    Fields f(t, where);
    const auto id = f.integer("bus");
    const auto bi = net.bus_index(static_cast<int>(id));
    if (!bi) {
      throw CaseError(CaseErrorKind::UnknownBusReference, where + " references unknown bus " + std::to_string(id));
    }
    const auto count = f.integer("count", 1);
    if (count < 1) schema_error(t, where + ".count: must be >= 1");
    const double p_out = f.number("p_out");
    const ProbFunction prob = read_prob(f, where);
    const std::string group = f.string("group", std::string(to_string(prob.kind)));
    f.finish();
    for (std::int64_t c = 0; c < count; ++c) {
      Generator g;
      g.bus = *bi;
      g.p_out = p_out;
      net.gens.push_back(g);
      net.ders.push_back(DerSpec{net.gens.size() - 1, group, prob});
    }
  });

  link_ders(net);
}

const char* to_string(CaseErrorKind kind) {
  switch (kind) {
    case CaseErrorKind::MalformedMatrix:
      return "MalformedMatrix";
    case CaseErrorKind::MissingSection:
      return "MissingSection";
    case CaseErrorKind::UnknownBusReference:
      return "UnknownBusReference";
    case CaseErrorKind::DuplicateBusId:
      return "DuplicateBusId";
    case CaseErrorKind::SchemaViolation:
      return "SchemaViolation";
    case CaseErrorKind::InvalidNetwork:
      return "InvalidNetwork";
  }
  return "CaseError";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Network load_case_unchecked(const std::filesystem::path& path, CaseFormat format,
                            const std::filesystem::path& der_annotations) {
  const std::string text = read_text_file(path);
  if (format == CaseFormat::Auto) format = path.extension() == ".m" ? CaseFormat::Matpower : CaseFormat::Native;
  Network net = format == CaseFormat::Matpower ? parse_matpower_case(text) : parse_native_case(text);
  if (net.name.empty()) net.name = path.stem().string();
  if (!der_annotations.empty()) apply_der_annotations(net, read_text_file(der_annotations));
  return net;
}

Network load_case(const std::filesystem::path& path, CaseFormat format, const std::filesystem::path& der_annotations) {
  Network net = load_case_unchecked(path, format, der_annotations);
  const auto problems = validate(net);
  if (!problems.empty()) {
    std::string msg = path.string() + ": invalid network";
    for (const auto& p : problems) msg += "\n  " + p;
    throw CaseError(CaseErrorKind::InvalidNetwork, msg);
  }
  return net;
}

}  // namespace vppsim
