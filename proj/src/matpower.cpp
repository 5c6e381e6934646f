#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vppsim/casefmt.hpp"

namespace vppsim {

namespace {

struct Matrix {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
  std::size_t line = 0;  // line of the opening bracket
};

// Replaces '%' comments with spaces, leaving quoted strings and newlines intact
// so that offsets still map to source lines.
std::string strip_comments(std::string_view text) {
  std::string out(text);
  bool in_quote = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char c = out[i];
    if (c == '\n') {
      in_quote = false;
      continue;
    }
    if (c == '\'') {
      // A quote directly after an identifier, ']' or ')' is a transpose.
      const bool transpose = i > 0 && (std::isalnum(static_cast<unsigned char>(out[i - 1])) || out[i - 1] == ']' ||
                                       out[i - 1] == ')' || out[i - 1] == '_');
      if (!transpose || in_quote) in_quote = !in_quote;
      continue;
    }
    if (c == '%' && !in_quote) {
      while (i < out.size() && out[i] != '\n') out[i++] = ' ';
      --i;
    }
  }
  return out;
}

std::size_t line_of(const std::string& s, std::size_t pos) {
  return 1 + static_cast<std::size_t>(std::count(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Position just past "mpc.<field> =" or npos.
std::size_t find_assignment(const std::string& s, const std::string& field) {
  const std::string key = "mpc." + field;
  std::size_t pos = 0;
  while ((pos = s.find(key, pos)) != std::string::npos) {
    const std::size_t end = pos + key.size();
    const bool left_ok = pos == 0 || !is_ident(s[pos - 1]);
    const bool right_ok = end >= s.size() || !is_ident(s[end]);
    if (left_ok && right_ok) {
      std::size_t i = end;
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i < s.size() && s[i] == '=') return i + 1;
    }
    pos = end;
  }
  return std::string::npos;
}

double parse_number(std::string_view tok, std::size_t line, const std::string& what) {
  std::string_view t = tok;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    std::ostringstream m;
    m << "line " << line << ": non-numeric entry '" << tok << "' in " << what;
    throw CaseError(CaseErrorKind::MalformedMatrix, m.str());
  }
  return v;
}

std::optional<double> read_scalar(const std::string& s, const std::string& field) {
  const std::size_t at = find_assignment(s, field);
  if (at == std::string::npos) return std::nullopt;
  const std::size_t semi = s.find(';', at);
  std::string tok = s.substr(at, (semi == std::string::npos ? s.size() : semi) - at);
  tok.erase(std::remove_if(tok.begin(), tok.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
            tok.end());
  return parse_number(tok, line_of(s, at), "mpc." + field);
}

std::optional<Matrix> read_matrix(const std::string& s, const std::string& field) {
  const std::size_t at = find_assignment(s, field);
  if (at == std::string::npos) return std::nullopt;
  std::size_t i = at;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i >= s.size() || s[i] != '[') {
    throw CaseError(CaseErrorKind::MalformedMatrix,
                    "line " + std::to_string(line_of(s, at)) + ": mpc." + field + " is not a numeric matrix");
  }
  const std::size_t open = i;
  const std::size_t close = s.find(']', open);
  if (close == std::string::npos) {
    throw CaseError(CaseErrorKind::MalformedMatrix,
                    "line " + std::to_string(line_of(s, open)) + ": unterminated matrix mpc." + field);
  }

  Matrix m;
  m.line = line_of(s, open);
  std::size_t line = m.line;
  std::vector<double> row;
  std::size_t row_line = line;
  auto flush = [&]() {
    if (row.empty()) return;
    if (!m.rows.empty() && row.size() != m.rows.front().size()) {
      std::ostringstream msg;
      msg << "line " << row_line << ": mpc." << field << " row has " << row.size() << " columns, expected "
          << m.rows.front().size();
      throw CaseError(CaseErrorKind::MalformedMatrix, msg.str());
    }
    m.rows.push_back(std::move(row));
    m.row_lines.push_back(row_line);
    row.clear();
  };

  std::size_t p = open + 1;
  while (p < close) {
    const char c = s[p];
    if (c == '\n' || c == ';') {
      flush();
      if (c == '\n') ++line;
      ++p;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++p;
      continue;
    }
    std::size_t q = p;
    while (q < close && !std::isspace(static_cast<unsigned char>(s[q])) && s[q] != ',' && s[q] != ';') ++q;
    if (row.empty()) row_line = line;
    row.push_back(parse_number(std::string_view(s).substr(p, q - p), line, "mpc." + field));
    p = q;
  }
  flush();
  return m;
}

Matrix require_matrix(const std::string& s, const std::string& field, std::size_t min_cols) {
  auto m = read_matrix(s, field);
  if (!m) throw CaseError(CaseErrorKind::MissingSection, "missing section mpc." + field);
  if (!m->rows.empty() && m->rows.front().size() < min_cols) {
    std::ostringstream msg;
    msg << "line " << m->line << ": mpc." << field << " has " << m->rows.front().size() << " columns, need at least "
        << min_cols;
    throw CaseError(CaseErrorKind::MalformedMatrix, msg.str());
  }
  return *m;
}

int as_bus_id(double v, std::size_t line, const char* what) {
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    std::ostringstream msg;
    msg << "line " << line << ": " << what << " " << v << " is not an integer bus number";
    throw CaseError(CaseErrorKind::MalformedMatrix, msg.str());
  }
  return static_cast<int>(v);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Network parse_matpower_case(std::string_view text) {
  const std::string s = strip_comments(text);

  const auto base = read_scalar(s, "baseMVA");
  if (!base) throw CaseError(CaseErrorKind::MissingSection, "missing section mpc.baseMVA");
  const Matrix bus = require_matrix(s, "bus", 8);
  const Matrix gen = require_matrix(s, "gen", 8);
  const Matrix branch = require_matrix(s, "branch", 11);

  Network net;
  net.base_mva = *base;
  std::map<int, std::size_t> index;
  for (std::size_t r = 0; r < bus.rows.size(); ++r) {
    const auto& row = bus.rows[r];
    Bus b;
    b.id = as_bus_id(row[0], bus.row_lines[r], "BUS_I");
    switch (static_cast<int>(row[1])) {
      case 1:
        b.kind = BusKind::PQ;
        break;
      case 2:
        b.kind = BusKind::PV;
        break;
      case 3:
        b.kind = BusKind::Slack;
        break;
      default:
        throw CaseError(CaseErrorKind::SchemaViolation,
                        "bus " + std::to_string(b.id) + ": unsupported BUS_TYPE " + fmt(row[1]));
    }
    b.p_load = row[2];
    b.q_load = row[3];
    b.shunt_g = row[4] / net.base_mva;
    b.shunt_b = row[5] / net.base_mva;
    b.v_set = row[7];
    if (!index.emplace(b.id, net.buses.size()).second) {
      throw CaseError(CaseErrorKind::DuplicateBusId, "duplicate bus id " + std::to_string(b.id));
    }
    net.buses.push_back(b);
  }

  auto lookup = [&index](int id, const char* what) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw CaseError(CaseErrorKind::UnknownBusReference,
                      std::string(what) + " references bus " + std::to_string(id) + " which is not in mpc.bus");
    }
    return it->second;
  };

  std::vector<bool> vg_taken(net.buses.size(), false);
  for (std::size_t r = 0; r < gen.rows.size(); ++r) {
    const auto& row = gen.rows[r];
    Generator g;
    g.bus = lookup(as_bus_id(row[0], gen.row_lines[r], "GEN_BUS"), "gen row");
    g.p_out = row[1];
    g.q_max = row[3];
    g.q_min = row[4];
    g.in_service = row[7] > 0.0;
    if (g.in_service && !vg_taken[g.bus] && net.buses[g.bus].kind != BusKind::PQ) {
      net.buses[g.bus].v_set = row[5];
      vg_taken[g.bus] = true;
    }
    net.gens.push_back(g);
  }

  for (std::size_t r = 0; r < branch.rows.size(); ++r) {
    const auto& row = branch.rows[r];
    Branch br;
    br.from_bus = lookup(as_bus_id(row[0], branch.row_lines[r], "F_BUS"), "branch row");
    br.to_bus = lookup(as_bus_id(row[1], branch.row_lines[r], "T_BUS"), "branch row");
    br.r = row[2];
    br.x = row[3];
    br.b_charging = row[4];
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.in_service = row[10] > 0.0;
    net.branches.push_back(br);
  }

  link_ders(net);
  return net;
}

std::string serialize_matpower_case(const Network& net) {
  std::ostringstream o;
  o << "function mpc = " << (net.name.empty() ? std::string("vppsim_case") : net.name) << "\n";
  o << "% Power-flow subset exported by vppsim.\n";
  o << "mpc.version = '2';\n";
  o << "mpc.baseMVA = " << fmt(net.base_mva) << ";\n\n";
  o << "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n";
  for (const auto& b : net.buses) {
    const int type = b.kind == BusKind::Slack ? 3 : (b.kind == BusKind::PV ? 2 : 1);
    o << '\t' << b.id << '\t' << type << '\t' << fmt(b.p_load) << '\t' << fmt(b.q_load) << '\t'
      << fmt(b.shunt_g * net.base_mva) << '\t' << fmt(b.shunt_b * net.base_mva) << "\t1\t" << fmt(b.v_set)
      << "\t0\t0\t1\t1.1\t0.9;\n";
  }
  o << "];\n\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n";
  for (const auto& g : net.gens) {
    const Bus& b = net.buses[g.bus];
    o << '\t' << b.id << '\t' << fmt(g.p_out) << "\t0\t" << fmt(g.q_max) << '\t' << fmt(g.q_min) << '\t'
      << fmt(b.v_set) << '\t' << fmt(net.base_mva) << '\t' << (g.in_service ? 1 : 0) << '\t' << fmt(g.p_out)
      << "\t0;\n";
  }
  o << "];\n\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n";
  for (const auto& br : net.branches) {
    o << '\t' << net.buses[br.from_bus].id << '\t' << net.buses[br.to_bus].id << '\t' << fmt(br.r) << '\t'
      << fmt(br.x) << '\t' << fmt(br.b_charging) << "\t0\t0\t0\t" << (br.tap == 1.0 ? std::string("0") : fmt(br.tap))
      << "\t0\t" << (br.in_service ? 1 : 0) << ";\n";
  }
  o << "];\n";
  return o.str();
}

}  // namespace vppsim
