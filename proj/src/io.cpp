#include "vppsim/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "vppsim/numfmt.hpp"

namespace vppsim {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

double to_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CsvError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_trace_csv(const SimulationTrace& tr) {
  std::string out = "k,pi,e,p,p_hat,losses,nonconverged,xc";
  for (const auto& g : tr.group_names) out += ",p_" + g;
  out += "\n";
  for (std::size_t j = 0; j < tr.length(); ++j) {
    out += std::to_string(j + 1);
    for (double v : {tr.pi[j], tr.e[j], tr.p[j], tr.p_hat[j], tr.losses[j]}) out += "," + format_double(v);
    out += tr.nonconverged[j] ? ",1" : ",0";
    out += "," + format_double(tr.xc[j]);
    for (const auto& g : tr.group_power) out += "," + format_double(g[j]);
    out += "\n";
  }
  return out;
}

SimulationTrace parse_trace_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw CsvError("empty trace file");
  const auto header = split(lines[0], ',');
  const std::vector<std::string_view> fixed = {"k", "pi", "e", "p", "p_hat", "losses", "nonconverged", "xc"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw CsvError("line 1: unexpected trace header");
  SimulationTrace tr;
  for (std::size_t c = fixed.size(); c < header.size(); ++c) {
    if (header[c].substr(0, 2) != "p_") throw CsvError("line 1: unexpected column '" + std::string(header[c]) + "'");
    tr.group_names.emplace_back(header[c].substr(2));
  }
  tr.group_power.assign(tr.group_names.size(), {});
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) throw CsvError("line " + std::to_string(i + 1) + ": wrong column count");
    if (to_number(cells[0], i + 1) != static_cast<double>(i))
      throw CsvError("line " + std::to_string(i + 1) + ": rows out of order");
    tr.pi.push_back(to_number(cells[1], i + 1));
    tr.e.push_back(to_number(cells[2], i + 1));
    tr.p.push_back(to_number(cells[3], i + 1));
    tr.p_hat.push_back(to_number(cells[4], i + 1));
    tr.losses.push_back(to_number(cells[5], i + 1));
    const bool nc = to_number(cells[6], i + 1) != 0.0;
    tr.nonconverged.push_back(nc ? 1 : 0);
    if (nc) ++tr.nonconverged_count;
    tr.xc.push_back(to_number(cells[7], i + 1));
    for (std::size_t g = 0; g < tr.group_names.size(); ++g) tr.group_power[g].push_back(to_number(cells[8 + g], i + 1));
  }
  return tr;
}

std::string format_stats_csv(const EnsembleStats& stats, bool std_dev) {
  std::string out = "k";
  for (const auto& n : stats.names) out += "," + n;
  out += "\n";
  const auto& cols = std_dev ? stats.std : stats.mean;
  const std::size_t len = cols.empty() ? 0 : cols.front().size();
  for (std::size_t j = 0; j < len; ++j) {
    out += std::to_string(j + 1);
    for (const auto& c : cols) out += "," + format_double(c[j]);
    out += "\n";
  }
  return out;
}

std::string format_agents_csv(const Network& net, const std::vector<SimulationTrace>& traces) {
  std::string out = "agent,gen,bus,group,mean_output,tail_mean_output,tail_std_across_runs\n";
  const double n = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < net.ders.size(); ++i) {
    double mean = 0.0, tail = 0.0;
    for (const auto& t : traces) {
      mean += t.agent_mean[i];
      tail += t.agent_tail_mean[i];
    }
    mean /= n;
    tail /= n;
    double var = 0.0;
    if (traces.size() > 1) {
      for (const auto& t : traces) var += (t.agent_tail_mean[i] - tail) * (t.agent_tail_mean[i] - tail);
      var /= n - 1.0;
    }
    const auto& d = net.ders[i];
    out += std::to_string(i) + "," + std::to_string(d.gen) + "," + std::to_string(net.buses[net.gens[d.gen].bus].id) +
           "," + d.group + "," + format_double(mean) + "," + format_double(tail) + "," + format_double(std::sqrt(var)) +
           "\n";
  }
  return out;
}

std::string format_agent_tails_csv(const std::vector<SimulationTrace>& traces) {
  std::string out = "run";
  const std::size_t n = traces.empty() ? 0 : traces.front().agent_tail_mean.size();
  for (std::size_t i = 0; i < n; ++i) out += ",a" + std::to_string(i);
  out += "\n";
  for (const auto& t : traces) {
    out += std::to_string(t.run_id);
    for (double v : t.agent_tail_mean) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

void apply_agent_tails_csv(std::string_view text, std::vector<SimulationTrace>& traces) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw CsvError("empty agent tail file");
  const std::size_t cols = split(lines[0], ',').size();
  std::map<std::size_t, SimulationTrace*> by_run;
  for (auto& t : traces) by_run[t.run_id] = &t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != cols) throw CsvError("line " + std::to_string(i + 1) + ": wrong column count");
    const auto run = static_cast<std::size_t>(to_number(cells[0], i + 1));
    const auto it = by_run.find(run);
    if (it == by_run.end()) throw CsvError("line " + std::to_string(i + 1) + ": no trace for run " + std::to_string(run));
    it->second->agent_tail_mean.clear();
    for (std::size_t c = 1; c < cells.size(); ++c) it->second->agent_tail_mean.push_back(to_number(cells[c], i + 1));
  }
}

std::string format_agent_series_csv(const SimulationTrace& tr) {
  std::string out = "k";
  const std::size_t n = tr.agent_output.empty() ? 0 : tr.agent_output.front().size();
  for (std::size_t i = 0; i < n; ++i) out += ",a" + std::to_string(i);
  out += "\n";
  for (std::size_t s = 0; s < tr.agent_output.size(); ++s) {
    out += std::to_string(s * tr.agent_thin + 1);
    for (double v : tr.agent_output[s]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string csv_to_dat(std::string_view csv) {
  std::string out;
  bool first = true;
  for (auto line : lines_of(csv)) {
    std::string l(line);
    for (char& c : l)
      if (c == ',') c = ' ';
    out += (first ? "# " : "") + l + "\n";
    first = false;
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vppsim
