#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "vppsim/app.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/config.hpp"
#include "vppsim/io.hpp"
#include "vppsim/network.hpp"
#include "vppsim/numfmt.hpp"
#include "vppsim/powerflow.hpp"
#include "vppsim/simloop.hpp"

#ifndef VPPSIM_PRESETS_DIR
#define VPPSIM_PRESETS_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace vppsim;

namespace {

CaseFormat parse_format(const std::string& s) {
  if (s == "auto") return CaseFormat::Auto;
  if (s == "native") return CaseFormat::Native;
  if (s == "matpower") return CaseFormat::Matpower;
  throw app::UsageError("--format: expected auto, native or matpower");
}

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Monte-Carlo simulator for DER aggregation under AC power flow"};
  cli.set_version_flag("--version", app::kVersion);
  cli.require_subcommand(1);

  // simulate
  std::string sim_config;
  std::string sim_out = "out";
  std::optional<std::string> sim_controller;
  std::optional<double> sim_xc0;
  std::optional<std::size_t> sim_runs, sim_horizon;
  std::optional<std::uint64_t> sim_seed;
  int sim_threads = default_threads();
  double max_nonconverged = 0.01;
  auto* simulate = cli.add_subcommand("simulate", "Run an ensemble and write CSV output");
  simulate->add_option("config", sim_config, "Config file (TOML) or a manifest.toml from a previous run")
      ->required();
  simulate->add_option("--out,-o", sim_out, "Output directory")->capture_default_str();
  simulate->add_option("--controller", sim_controller, "pi or lag (overrides the config)");
  simulate->add_option("--xc0", sim_xc0, "Initial controller state");
  simulate->add_option("--runs", sim_runs, "Number of runs");
  simulate->add_option("--horizon", sim_horizon, "Steps per run (burn-in becomes half of it)");
  simulate->add_option("--seed", sim_seed, "Ensemble seed");
  simulate->add_option("--threads", sim_threads, "Run-level parallelism")->capture_default_str();
  simulate->add_option("--max-nonconverged", max_nonconverged,
                       "Largest tolerated fraction of non-converged power-flow steps")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  // powerflow
  std::string pf_case, pf_commit, pf_der, pf_format = "auto";
  auto* powerflow = cli.add_subcommand("powerflow", "Solve one AC power flow and print the bus table");
  powerflow->add_option("case", pf_case, "Case file")->required();
  powerflow->add_option("--commit", pf_commit,
                        "DER commitment: bit string, all_on, all_off or run-length tokens like '0*60 1*60'");
  powerflow->add_option("--der-annotations", pf_der, "DER sidecar for MATPOWER cases");
  powerflow->add_option("--format", pf_format, "auto, native or matpower")->capture_default_str();

  // ergodicity
  std::string arm_a, arm_b, erg_out = ".";
  std::optional<std::size_t> erg_burn_in;
  auto* ergodicity = cli.add_subcommand("ergodicity", "Compare two simulate output directories");
  ergodicity->add_option("--arm-a", arm_a, "First arm directory")->required();
  ergodicity->add_option("--arm-b", arm_b, "Second arm directory")->required();
  ergodicity->add_option("--out-dir", erg_out, "Where ergodicity_report.csv goes")->capture_default_str();
  ergodicity->add_option("--burn-in", erg_burn_in, "Steps dropped before time averages");

  // check-contraction
  std::string ifs_spec;
  auto* contraction = cli.add_subcommand("check-contraction", "Estimate the average contraction of an IFS");
  contraction->add_option("spec", ifs_spec, "IFS description (TOML)")->required();

  // reproduce
  std::string rep_id;
  app::ReproduceOptions rep;
  rep.presets_dir = VPPSIM_PRESETS_DIR;
  rep.out_dir = "reproduce";
  rep.threads = default_threads();
  std::string rep_presets = rep.presets_dir.string(), rep_out = rep.out_dir.string();
  auto* reproduce = cli.add_subcommand("reproduce", "Run the two-controller, two-initial-state experiment");
  std::string ids;
  for (const auto& id : app::figure_ids()) ids += (ids.empty() ? "" : ", ") + id;
  reproduce->add_option("figure", rep_id, "One of: " + ids)->required();
  reproduce->add_option("--runs", rep.runs, "Runs per arm (default from the preset)");
  reproduce->add_option("--horizon", rep.horizon, "Steps per run (default from the preset)");
  reproduce->add_option("--out,-o", rep_out, "Output directory")->capture_default_str();
  reproduce->add_option("--threads", rep.threads, "Run-level parallelism")->capture_default_str();
  reproduce->add_option("--presets", rep_presets, "Preset directory")->capture_default_str();

  // case tools
  auto* case_cmd = cli.add_subcommand("case", "Inspect, validate or convert case files");
  case_cmd->require_subcommand(1);
  std::string case_path, case_der, case_format = "auto", convert_to, convert_out;
  auto add_case_args = [&](CLI::App* sub) {
    sub->add_option("path", case_path, "Case file")->required();
    sub->add_option("--der-annotations", case_der, "DER sidecar for MATPOWER cases");
    sub->add_option("--format", case_format, "auto, native or matpower")->capture_default_str();
  };
  auto* case_info = case_cmd->add_subcommand("info", "Print bus, branch and DER counts");
  add_case_args(case_info);
  auto* case_validate = case_cmd->add_subcommand("validate", "Check every network invariant");
  add_case_args(case_validate);
  auto* case_convert = case_cmd->add_subcommand("convert", "Convert between MATPOWER and native text");
  add_case_args(case_convert);
  case_convert->add_option("--to", convert_to, "native or matpower")
      ->required()
      ->check(CLI::IsMember({"native", "matpower"}));
  case_convert->add_option("--output,-o", convert_out, "Output file (default stdout)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      SimConfig cfg = load_sim_config(sim_config);
      app::apply_overrides(cfg, {sim_controller, sim_xc0, sim_runs, sim_horizon, sim_seed});
      const auto res = app::simulate_to_dir(cfg, sim_out, sim_threads);
      std::cout << "wrote " << res.result.traces.size() << " runs to " << sim_out << " in "
                << format_double(res.wall_seconds) << " s; non-converged steps: " << res.nonconverged_steps << "/"
                << res.total_steps << "\n";
      for (const auto& e : res.result.errors) std::cerr << "error: " << e << "\n";
      if (!res.result.errors.empty()) return 1;
      if (res.total_steps > 0 &&
          static_cast<double>(res.nonconverged_steps) > max_nonconverged * static_cast<double>(res.total_steps)) {
        std::cerr << "error: non-converged power flows exceed the budget of " << format_double(max_nonconverged)
                  << " of all steps\n";
        return 1;
      }
    } else if (*powerflow) {
      const Network net = load_case(pf_case, parse_format(pf_format), pf_der);
      Commitment commit = Commitment::all(net.der_count(), true);
      if (!pf_commit.empty()) {
        const bool bits = pf_commit.find_first_not_of("01") == std::string::npos;
        commit = bits ? Commitment::from_bits(pf_commit) : parse_commitment_spec(pf_commit, net.der_count());
      }
      const PowerFlowSolution sol = solve_power_flow(net, commit);
      std::cout << app::powerflow_csv(net, sol);
      if (!sol.converged) return 1;
    } else if (*ergodicity) {
      const auto rows = app::ergodicity_for_dirs(arm_a, arm_b, erg_burn_in);
      const std::string csv = format_report_csv(rows);
      fs::create_directories(erg_out);
      write_text_file(fs::path(erg_out) / "ergodicity_report.csv", csv);
      std::cout << csv;
    } else if (*contraction) {
      std::cout << app::check_contraction(ifs_spec);
    } else if (*reproduce) {
      rep.presets_dir = rep_presets;
      rep.out_dir = rep_out;
      app::reproduce(rep_id, rep, std::cout);
    } else if (*case_cmd) {
      const CaseFormat fmt = parse_format(case_format);
      if (*case_validate) {
        const Network net = load_case_unchecked(case_path, fmt, case_der);
        const auto problems = validate(net);
        for (const auto& p : problems) std::cout << p << "\n";
        if (!problems.empty()) return 1;
        std::cout << "ok: " << app::case_info(net) << "\n";
      } else {
        const Network net = load_case(case_path, fmt, case_der);
        if (*case_info) {
          std::cout << app::case_info(net) << "\n";
        } else {
          const std::string text =
              convert_to == "native" ? serialize_native_case(net) : serialize_matpower_case(net);
          if (convert_out.empty())
            std::cout << text;
          else
            write_text_file(convert_out, text);
        }
      }
    }
  } catch (const app::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CaseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return *case_cmd ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
