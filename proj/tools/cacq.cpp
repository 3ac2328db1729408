// cacq: command-line front end for the admission-control queue analyzer.

#include "cacq/parallel.hpp"
#include "cacq/scenario.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace cacq;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, comparison_failed = 3, not_converged = 4 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string config;
  std::string policy;
  std::string out;
  std::string format = "text";
  std::string dump_pi;
  std::string dump_matrix;
  std::string solver;
  std::string vary;
  std::string policies;
  std::string gnuplot;
  std::string raw_out;
  double tamper = 0.0;
};

Scenario load(const Options& o) {
  Scenario sc = load_scenario(o.config);
  try {
    if (!o.policy.empty()) {
      sc.policy = parse_policy(o.policy);
      sc.make_policy();
    }
    if (!o.solver.empty()) sc.solver.method = parse_solver_method(o.solver);
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
  return sc;
}

void append_csv(const std::string& path, const std::vector<QosReport>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (fresh) out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_row(r) << '\n';
}

void print_csv(const std::vector<QosReport>& rows) {
  std::cout << csv_header() << '\n';
  for (const auto& r : rows) std::cout << csv_row(r) << '\n';
}

int cmd_validate(const Options& o) {
  const Scenario sc = load(o);
  const CacPolicy policy = sc.make_policy();
  const StateSpace space{sc.arrival.num_phases(), sc.queue_cap, policy.connection_cap()};
  std::cout << o.config << ": valid\n"
            << "  phases " << space.num_phases << ", queue capacity " << space.queue_cap
            << ", connection cap " << space.conn_cap << ", " << space.size() << " states\n"
            << "  policy " << policy.label() << ", mean packet rate "
            << format_number(mean_arrival_rate(sc.arrival)) << " /min per connection\n"
            << "  simulation section " << (sc.sim ? "present" : "absent") << '\n'
            << "  fingerprint " << sc.fingerprint() << '\n';
  return ok;
}

int cmd_solve(const Options& o) {
  const Scenario sc = load(o);
  const StructuredChain chain(sc.chain_inputs());
  if (!o.dump_matrix.empty()) {
    const TransitionMatrix p = assemble(chain, {sc.solver.memory_budget_bytes});
    std::ofstream out(o.dump_matrix);
    write_matrix(out, p);
  }
  const StationaryDistribution dist = solve(chain, sc.solver);
  if (!o.dump_pi.empty()) {
    std::ofstream out(o.dump_pi);
    write_distribution(out, dist);
  }
  QosReport r = compute_report(dist, chain, sc.metrics);
  r.fingerprint = sc.fingerprint();
  if (!sc.channel.fixed_rate) r.snr_db = sc.channel.avg_snr_db;
  if (!o.out.empty()) append_csv(o.out, {r});
  if (o.format == "csv")
    print_csv({r});
  else
    std::cout << text_report(r);
  return ok;
}

struct Range {
  std::string name;
  std::vector<double> values;
};

Range parse_range(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError("--vary expects name=start:stop:step, got '" + text + "'");
  Range r{text.substr(0, eq), {}};
  if (r.name != "rho" && r.name != "snr") throw UsageError("--vary supports rho and snr, got '" + r.name + "'");
  double a = 0, b = 0, step = 0;
  char tail = 0;
  if (std::sscanf(text.c_str() + eq + 1, "%lf:%lf:%lf%c", &a, &b, &step, &tail) != 3) {
    if (std::sscanf(text.c_str() + eq + 1, "%lf%c", &a, &tail) != 1)
      throw UsageError("malformed range '" + text.substr(eq + 1) + "'");
    b = a;
    step = 1.0;
  }
  if (!(step > 0.0) || b < a) throw UsageError("range needs start <= stop and step > 0");
  const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
  if (n > 100000) throw UsageError("range has too many points");
  for (long i = 0; i < n; ++i) r.values.push_back(a + static_cast<double>(i) * step);
  return r;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // allow "threshold:10, none:70"
    const auto first = item.find_first_not_of(' ');
    if (first != std::string::npos) items.push_back(item.substr(first));
  }
  return items;
}

void write_gnuplot(const std::string& path, const std::string& csv, const std::string& axis,
                   const std::vector<std::string>& labels) {
  std::ofstream g(path);
  if (!g) throw std::runtime_error("cannot write " + path);
  const int column = axis == "rho" ? 2 : 3;
  const char* metrics[] = {"p_block", "n_conn", "n_queue", "n_drop", "lambda_bar", "p_drop", "throughput", "delay"};
  g << "set datafile separator ','\nset key outside\nset grid\nset terminal pngcairo size 900,600\n";
  g << "set xlabel '" << (axis == "rho" ? "connection arrival rate (1/min)" : "average SNR (dB)") << "'\n";
  for (int m = 0; m < 8; ++m) {
    g << "set output '" << metrics[m] << ".png'\nset ylabel '" << metrics[m] << "'\nplot ";
    for (std::size_t p = 0; p < labels.size(); ++p) {
      g << (p ? ", \\\n     " : "") << "'" << csv << "' using (strcol(1) eq '" << labels[p] << "' ? $"
        << column << " : 1/0):" << (m + 4) << " with linespoints title '" << labels[p] << "'";
    }
    g << "\n";
  }
}

int cmd_sweep(const Options& o) {
  const Scenario base = load(o);
  if (o.vary.empty()) throw UsageError("sweep needs --vary");
  const Range range = parse_range(o.vary);
  if (range.name == "snr" && base.channel.fixed_rate)
    throw UsageError("an SNR sweep needs a fading channel, the config uses a deterministic one");

  std::vector<PolicySpec> setups;
  try {
    if (o.policies.empty())
      setups.push_back(base.policy);
    else
      for (const auto& p : split_list(o.policies)) setups.push_back(parse_policy(p));
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }

  std::vector<Scenario> points;
  for (const auto& setup : setups) {
    for (double v : range.values) {
      Scenario sc = base;
      sc.policy = setup;
      if (range.name == "rho")
        sc.connections.arrival_rate = v;
      else
        sc.channel.avg_snr_db = v;
      try {
        sc.validate();
      } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
      }
      points.push_back(std::move(sc));
    }
  }
  std::vector<QosReport> rows(points.size());
  parallel_for(points.size(), [&](std::size_t i) { rows[i] = analyze(points[i]); });

  if (!o.out.empty()) append_csv(o.out, rows);
  else print_csv(rows);
  if (!o.gnuplot.empty()) {
    if (o.out.empty()) throw UsageError("--gnuplot needs --out so the script can reference the CSV");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows.size(); i += range.values.size()) labels.push_back(rows[i].policy);
    write_gnuplot(o.gnuplot, o.out, range.name, labels);
  }
  return ok;
}

QosEstimate run_simulation(const Scenario& sc, const Options& o) {
  const QosEstimate est = simulate(sc.sim_config());
  if (!o.raw_out.empty()) {
    std::ofstream raw(o.raw_out);
    write_replication_csv(raw, est);
  }
  return est;
}

int cmd_simulate(const Options& o) {
  const Scenario sc = load(o);
  if (!sc.sim) throw ConfigError("missing section [sim]", 0);
  const QosEstimate est = run_simulation(sc, o);
  std::printf("policy %s, %zu replications, fingerprint %s\n", est.policy.c_str(), est.replications.size(),
              est.fingerprint.c_str());
  std::printf("%-11s %14s %12s %12s\n", "metric", "mean", "stderr", "ci95");
  for (const char* name : {"p_block", "n_conn", "n_queue", "n_drop", "lambda_bar", "p_drop", "throughput", "delay"}) {
    const MetricEstimate& m = est.metric(name);
    std::printf("%-11s %14s %12.4g %12.4g\n", name, format_number(m.mean).c_str(), m.std_error, m.ci_half_width);
  }
  return ok;
}

int cmd_compare(const Options& o) {
  const Scenario sc = load(o);
  if (!sc.sim) throw ConfigError("missing section [sim]", 0);
  QosReport report = analyze(sc);
  const QosEstimate est = run_simulation(sc, o);
  if (o.tamper != 0.0) {
    // Shift every analytic value by `tamper` simulation standard errors.
    auto shift = [&](double& v, const MetricEstimate& m) { v += o.tamper * std::max(m.std_error, 1e-9); };
    shift(report.p_block, est.p_block);
    shift(report.n_conn, est.n_conn);
    shift(report.n_queue, est.n_queue);
    shift(report.p_drop, est.p_drop);
    shift(report.throughput, est.throughput);
    shift(report.lambda_bar, est.lambda_bar);
    if (report.delay) shift(*report.delay, est.delay);
  }
  const Comparison cmp = compare(report, est);
  std::cout << "policy " << report.policy << ", fingerprint " << report.fingerprint << '\n'
            << format_comparison(cmp);
  return cmp.all_pass() ? ok : comparison_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connection admission control queue analyzer"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", o.config, "scenario file")->required()->check(CLI::ExistingFile);
  };
  auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--policy", o.policy, "override the policy, e.g. threshold:10, queue_aware:100, none:70");
  };

  auto* validate = app.add_subcommand("validate", "check a scenario file");
  add_config(validate);

  auto* solve_cmd = app.add_subcommand("solve", "stationary QoS metrics of a scenario");
  add_config(solve_cmd);
  add_policy(solve_cmd);
  solve_cmd->add_option("--out", o.out, "append a CSV row to this file");
  solve_cmd->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"text", "csv"}));
  solve_cmd->add_option("--dump-pi", o.dump_pi, "write the stationary vector");
  solve_cmd->add_option("--dump-matrix", o.dump_matrix, "write the transition matrix");
  solve_cmd->add_option("--solver", o.solver, "auto, direct, iterative or aggregated");

  auto* sweep = app.add_subcommand("sweep", "solve over a parameter grid");
  add_config(sweep);
  sweep->add_option("--vary", o.vary, "rho=0.1:1.0:0.1 or snr=0:15:1")->required();
  sweep->add_option("--policies", o.policies, "comma-separated policies");
  sweep->add_option("--out", o.out, "append CSV rows to this file instead of stdout");
  sweep->add_option("--gnuplot", o.gnuplot, "also write a gnuplot script for the CSV");
  sweep->add_option("--solver", o.solver, "auto, direct, iterative or aggregated");

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo estimate of the same metrics");
  add_config(simulate_cmd);
  add_policy(simulate_cmd);
  simulate_cmd->add_option("--raw-out", o.raw_out, "write per-replication counts as CSV");

  auto* compare_cmd = app.add_subcommand("compare", "analytic metrics against simulation, 3 sigma gate");
  add_config(compare_cmd);
  add_policy(compare_cmd);
  compare_cmd->add_option("--raw-out", o.raw_out, "write per-replication counts as CSV");
  compare_cmd->add_option("--tamper", o.tamper, "shift analytic values by this many standard errors");
  compare_cmd->add_option("--solver", o.solver, "auto, direct, iterative or aggregated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*solve_cmd) return cmd_solve(o);
    if (*sweep) return cmd_sweep(o);
    if (*simulate_cmd) return cmd_simulate(o);
    if (*compare_cmd) return cmd_compare(o);
  } catch (const ConfigError& e) {
    std::cerr << o.config << ": " << e.what() << '\n';
    return config_error;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return config_error;
  } catch (const NonConvergenceError& e) {
    std::cerr << "solver did not converge: " << e.what() << " (residual " << e.last_residual() << " after "
              << e.iterations() << " iterations)\n";
    return not_converged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}
