#pragma once

// Command-line driver: single runs, cost sweeps, model fitting, chain
// verification, and the post-run explain report. All output tables are
// tab-separated with a header row; columns are listed in kTableHelp.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "epitrace/contracts.hpp"
#include "epitrace/irls.hpp"
#include "epitrace/ledger.hpp"
#include "epitrace/sim/config.hpp"
#include "epitrace/sim/cost.hpp"
#include "epitrace/sim/scenario.hpp"
#include "epitrace/sim/stats.hpp"
#include "epitrace/text.hpp"

namespace epitrace::cli {

namespace fs = std::filesystem;

enum class Mode { Single, Sweep, Fit, Verify, Explain };

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "single") return Mode::Single;
  if (s == "sweep") return Mode::Sweep;
  if (s == "fit") return Mode::Fit;
  if (s == "verify") return Mode::Verify;
  if (s == "explain") return Mode::Explain;
  return std::nullopt;
}

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kVerifyFailed = 3 };

struct RunManifest {
  std::string config_path;  // empty: built-in defaults
  fs::path out_dir = "out";
  Mode mode = Mode::Single;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::string data_path;    // fit: overrides fit.data
  std::string ledger_path;  // verify: check a dumped ledger instead of a fresh run
};

inline constexpr const char* kTableHelp = R"(Output tables (tab-separated, one header row):
  metrics.tsv        one row per (grid point, round); single mode writes one row
    contracts requests round seed submitted completed throughput drops_loss
    drops_queue encounters_lost mean_latency p95_latency mean_sealing_delay
    gas_loc gas_bt gas_heal gas_setup gas_op total_gas avg_request_cost
    rebates blocks
  surface.tsv        one row per grid point
    contracts requests queue_capacity block_capacity rotation_period
    service_rate avg_cost_mean avg_cost_stddev avg_cost_variance
    total_gas_mean total_gas_variance penalty
  fig5_avg_cost.tsv     contracts requests avg_cost_mean
  fig6_cost_stddev.tsv  contracts requests avg_cost_stddev
  fig7_total_gas.tsv    contracts requests total_gas_mean
  optimum.txt        key = value lines for the min-penalty grid point
  ledger.txt         (single) ledger dump, restorable with verify --ledger
  fit.txt            (fit) fitted coefficients and convergence
Gas and cost columns are in wei; times in simulated seconds.)";

/// Verbosity from EPITRACE_LOG: 0 quiet, 1 info (default), 2 debug.
class Log {
 public:
  explicit Log(std::ostream& os) : os_(os) {
    if (const char* v = std::getenv("EPITRACE_LOG")) {
      const std::string_view s = v;
      if (s == "0" || s == "quiet") level_ = 0;
      else if (s == "2" || s == "debug") level_ = 2;
    }
  }
  std::ostream* info() { return level_ >= 1 ? &os_ : nullptr; }
  std::ostream* debug() { return level_ >= 2 ? &os_ : nullptr; }

 private:
  std::ostream& os_;
  int level_ = 1;
};

namespace detail {

using text::format_double;

inline std::string metrics_header() {
  return "contracts\trequests\tround\tseed\tsubmitted\tcompleted\tthroughput\tdrops_loss\tdrops_queue\t"
         "encounters_lost\tmean_latency\tp95_latency\tmean_sealing_delay\tgas_loc\tgas_bt\tgas_heal\t"
         "gas_setup\tgas_op\ttotal_gas\tavg_request_cost\trebates\tblocks\n";
}

inline std::string metrics_row(std::size_t contracts, std::size_t requests, int round, std::uint64_t seed,
                               const sim::ScenarioMetrics& m) {
  using contracts::GasCategory;
  std::ostringstream os;
  os << contracts << '\t' << requests << '\t' << round << '\t' << seed << '\t' << m.requests_submitted << '\t'
     << m.requests_completed << '\t' << format_double(m.throughput) << '\t' << m.drops_loss << '\t'
     << m.drops_queue << '\t' << m.encounters_lost << '\t' << format_double(m.mean_latency()) << '\t'
     << format_double(m.latency_quantile(0.95)) << '\t' << format_double(m.mean_sealing_delay);
  for (auto c : contracts::kAllCategories) os << '\t' << m.gas[c];
  os << '\t' << m.total_gas << '\t' << format_double(m.avg_request_cost) << '\t' << m.rebates << '\t' << m.blocks
     << '\n';
  return os.str();
}

inline void write_file(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << body;
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

inline std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) return std::nullopt;
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Parses a TSV with a header row into column-name -> values.
inline std::map<std::string, std::vector<double>> read_table(const std::string& body) {
  std::map<std::string, std::vector<double>> cols;
  std::istringstream is(body);
  std::string line;
  if (!std::getline(is, line)) return cols;
  std::vector<std::string> names;
  for (auto n : text::split(line, '\t')) names.emplace_back(n);
  while (std::getline(is, line)) {
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, '\t');
    for (std::size_t i = 0; i < names.size() && i < cells.size(); ++i)
      cols[names[i]].push_back(text::parse_double(cells[i]).value_or(0.0));
  }
  return cols;
}

/// The documented location transition table, one row per defined pair.
struct ExpectedTransition {
  std::optional<contracts::StatusKind> from;
  contracts::StateEvent event;
  std::optional<contracts::StatusKind> to;  // nullopt: undefined
};

inline std::vector<ExpectedTransition> expected_transitions() {
  using contracts::StateEvent;
  using contracts::StatusKind;
  using K = std::optional<StatusKind>;
  const K none;
  return {
      {none, StateEvent::GenerateContract, StatusKind::Empty},
      {StatusKind::Empty, StateEvent::NormalUserCheckin, StatusKind::Clean},
      {StatusKind::Empty, StateEvent::InfectedUserCheckin, StatusKind::Infected},
      {StatusKind::Clean, StateEvent::NormalUserCheckin, StatusKind::Clean},
      {StatusKind::Clean, StateEvent::InfectedUserCheckin, StatusKind::Infected},
      {StatusKind::Clean, StateEvent::InfectedUserUpdate, StatusKind::Infected},
      {StatusKind::Infected, StateEvent::LocationIsCleaned, StatusKind::Clean},
      {StatusKind::Infected, StateEvent::Wait14Days, StatusKind::Clean},
      {StatusKind::Infected, StateEvent::NormalUserCheckin, StatusKind::Infected},
      {StatusKind::Infected, StateEvent::InfectedUserCheckin, StatusKind::Infected},
      {StatusKind::Infected, StateEvent::InfectedUserUpdate, StatusKind::Infected},
  };
}

/// Runs every (state, event) pair, including the absent contract, against
/// the expected table. Returns the number of mismatches.
inline int check_state_machine(std::ostream& out) {
  using namespace contracts;
  const auto table = expected_transitions();
  int bad = 0;
  std::vector<std::optional<StatusKind>> froms{std::nullopt, StatusKind::Empty, StatusKind::Infected,
                                               StatusKind::Clean};
  for (const auto& from : froms) {
    for (auto e : kAllEvents) {
      std::optional<StatusKind> want;
      for (const auto& row : table)
        if (row.from == from && row.event == e) want = row.to;
      const Seconds since = 1000.0;
      const Seconds now = since + kFourteenDays;
      std::optional<LocationStatus> cur;
      if (from) cur = LocationStatus{*from, *from == StatusKind::Infected ? since : 0.0};
      std::optional<StatusKind> got;
      try {
        got = step_location_state(cur, e, now).kind;
      } catch (const ContractError& err) {
        if (err.code() != ContractErrc::UndefinedTransition) ++bad;
      }
      bool ok = got == want;
      if (from == StatusKind::Infected && e == StateEvent::Wait14Days) {
        // One second short of the window the transition must be undefined.
        try {
          step_location_state(cur, e, now - 1.0);
          ok = false;
        } catch (const ContractError&) {
        }
      }
      if (!ok) ++bad;
      out << (from ? to_string(*from) : "NoContract") << " + " << to_string(e) << " -> "
          << (got ? to_string(*got) : "undefined") << (ok ? "" : "  MISMATCH") << '\n';
    }
  }
  return bad;
}

inline sim::ConfigFile load_config(const RunManifest& m) {
  sim::ConfigFile cf;
  if (!m.config_path.empty()) {
    std::ifstream is(m.config_path);
    if (!is) throw sim::ConfigError("config: cannot open " + m.config_path);
    cf = sim::parse_config(is);
  }
  if (m.seed) cf.scenario.seed = *m.seed;
  if (m.rounds) {
    if (*m.rounds < 2) throw sim::ConfigError("config: rounds must be >= 2");
    cf.sweep.rounds = *m.rounds;
  }
  return cf;
}

inline int run_single(const sim::ConfigFile& cf, const RunManifest& m, std::ostream& out, Log& log) {
  sim::Scenario s(cf.scenario);
  const auto& metrics = s.run();
  if (auto* os = log.info())
    *os << "single: " << metrics.requests_completed << " requests completed, " << metrics.blocks << " blocks\n";
  write_file(m.out_dir / "metrics.tsv",
             metrics_header() + metrics_row(cf.scenario.n_locations, metrics.requests_submitted, 0,
                                            cf.scenario.seed, metrics));
  std::ostringstream led;
  s.ledger().dump(led);
  write_file(m.out_dir / "ledger.txt", led.str());
  out << "throughput\t" << format_double(metrics.throughput) << "\nmean_latency\t"
      << format_double(metrics.mean_latency()) << "\ndrops\t" << metrics.drops() << "\ntotal_gas\t"
      << metrics.total_gas << "\navg_request_cost\t" << format_double(metrics.avg_request_cost) << '\n';
  return kOk;
}

inline int run_sweep(const sim::ConfigFile& cf, const RunManifest& m, std::ostream& out, Log& log) {
  const auto base = sim::sweep_base_config(cf.scenario);
  const auto grid = sim::make_grid(cf.sweep.contracts, cf.sweep.requests, base);
  const auto surface = sim::measure_cost_surface(grid, base, cf.sweep.rounds);
  const sim::PenaltyWeights w{cf.sweep.avg_weight, cf.sweep.var_weight};

  std::string metrics = metrics_header();
  std::string table =
      "contracts\trequests\tqueue_capacity\tblock_capacity\trotation_period\tservice_rate\tavg_cost_mean\t"
      "avg_cost_stddev\tavg_cost_variance\ttotal_gas_mean\ttotal_gas_variance\tpenalty\n";
  std::string fig5 = "contracts\trequests\tavg_cost_mean\n";
  std::string fig6 = "contracts\trequests\tavg_cost_stddev\n";
  std::string fig7 = "contracts\trequests\ttotal_gas_mean\n";
  for (const auto& p : surface.points) {
    const auto& a = p.args;
    for (std::size_t k = 0; k < p.rounds.size(); ++k)
      metrics += metrics_row(a.n_contracts, a.n_requests, static_cast<int>(k), p.rounds[k].seed,
                             p.rounds[k].metrics);
    const std::string key = std::to_string(a.n_contracts) + '\t' + std::to_string(a.n_requests) + '\t';
    table += key + std::to_string(a.queue_capacity) + '\t' + std::to_string(a.block_capacity) + '\t' +
             format_double(a.rotation_period) + '\t' + format_double(a.service_rate) + '\t' +
             format_double(p.avg_cost_mean) + '\t' + format_double(p.avg_cost_stddev()) + '\t' +
             format_double(p.avg_cost_variance) + '\t' + format_double(p.total_gas_mean) + '\t' +
             format_double(p.total_gas_variance) + '\t' + format_double(sim::penalty(surface, p, w)) + '\n';
    fig5 += key + format_double(p.avg_cost_mean) + '\n';
    fig6 += key + format_double(p.avg_cost_stddev()) + '\n';
    fig7 += key + format_double(p.total_gas_mean) + '\n';
    if (auto* os = log.debug())
      *os << "sweep: contracts=" << a.n_contracts << " requests=" << a.n_requests
          << " avg=" << format_double(p.avg_cost_mean) << '\n';
  }
  const auto best = sim::optimize_cost(surface, w);
  std::ostringstream opt;
  opt << "n_contracts = " << best.n_contracts << "\nn_requests = " << best.n_requests
      << "\nqueue_capacity = " << best.queue_capacity << "\nblock_capacity = " << best.block_capacity
      << "\nrotation_period = " << format_double(best.rotation_period)
      << "\nservice_rate = " << format_double(best.service_rate) << '\n';

  write_file(m.out_dir / "metrics.tsv", metrics);
  write_file(m.out_dir / "surface.tsv", table);
  write_file(m.out_dir / "fig5_avg_cost.tsv", fig5);
  write_file(m.out_dir / "fig6_cost_stddev.tsv", fig6);
  write_file(m.out_dir / "fig7_total_gas.tsv", fig7);
  write_file(m.out_dir / "optimum.txt", opt.str());
  if (auto* os = log.info()) *os << "sweep: " << surface.points.size() << " grid points written\n";
  out << opt.str();
  return kOk;
}

inline int run_fit(const sim::ConfigFile& cf, const RunManifest& m, std::ostream& out) {
  const std::string path = m.data_path.empty() ? cf.fit.data : m.data_path;
  if (path.empty()) throw sim::ConfigError("fit: no dataset given (--data or fit.data)");
  std::ifstream is(path);
  if (!is) throw sim::ConfigError("fit: cannot open " + path);
  const auto data = health::read_dataset(is);
  const auto r = health::fit_irls(data, {cf.fit.tol, cf.fit.max_iter, cf.fit.sign});
  std::ostringstream os;
  os << "beta0 = " << format_double(r.params.beta0) << "\nbeta1 = " << format_double(r.params.beta1)
     << "\nbeta2 = " << format_double(r.params.beta2) << "\nbeta1_beta2 = "
     << format_double(r.params.beta1 * r.params.beta2) << "\nbeta3 = " << format_double(r.params.beta3)
     << "\nconverged = " << (r.converged ? "true" : "false") << "\niterations = " << r.iterations
     << "\nlog_likelihood = " << format_double(r.log_likelihood) << '\n';
  write_file(m.out_dir / "fit.txt", os.str());
  out << os.str();
  return r.converged ? kOk : kRuntimeError;
}

inline int run_verify(const sim::ConfigFile& cf, const RunManifest& m, std::ostream& out) {
  bool chain_ok = false;
  if (!m.ledger_path.empty()) {
    std::ifstream is(m.ledger_path);
    if (!is) throw sim::ConfigError("verify: cannot open " + m.ledger_path);
    try {
      chain_ok = ledger::Ledger::restore(is).verify_chain();
    } catch (const ledger::LedgerError&) {
      chain_ok = false;
    }
  } else {
    sim::Scenario s(cf.scenario);
    s.run();
    chain_ok = s.ledger().verify_chain();
  }
  out << "chain: " << (chain_ok ? "PASS" : "FAIL") << '\n';
  std::ostringstream table;
  const int mismatches = check_state_machine(table);
  out << table.str() << "state machine: " << (mismatches == 0 ? "PASS" : "FAIL") << '\n';
  return chain_ok && mismatches == 0 ? kOk : kVerifyFailed;
}

}  // namespace detail

/// Executes one manifest. Returns an ExitCode; diagnostics go to `err`.
inline int cmd_run(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Summarizes a previous run's output directory.
inline int cmd_explain(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::format_double;
  const auto metrics = detail::read_file(m.out_dir / "metrics.tsv");
  const auto fig5 = detail::read_file(m.out_dir / "fig5_avg_cost.tsv");
  const auto fig7 = detail::read_file(m.out_dir / "fig7_total_gas.tsv");
  if (!metrics && !fig5 && !fig7) {
    err << "explain: no run outputs in " << m.out_dir.string() << '\n';
    return kConfigError;
  }

  if (fig5) {
    auto t = detail::read_table(*fig5);
    const auto& c = t["contracts"];
    const auto& r = t["requests"];
    const auto& a = t["avg_cost_mean"];
    // Smallest request count at the smallest contract count versus largest
    // request count at the largest contract count.
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (std::pair(c[i], r[i]) < std::pair(c[lo], r[lo])) lo = i;
      if (std::pair(c[i], r[i]) > std::pair(c[hi], r[hi])) hi = i;
    }
    if (!a.empty() && a[hi] > 0)
      out << "amortization factor: " << format_double(a[lo] / a[hi]) << " (" << c[lo] << " contracts, " << r[lo]
          << " requests vs " << c[hi] << " contracts, " << r[hi] << " requests)\n";
  } else {
    out << "amortization factor: absent (no surface)\n";
  }

  if (fig7) {
    auto t = detail::read_table(*fig7);
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_contracts;
    for (std::size_t i = 0; i < t["contracts"].size(); ++i) {
      by_contracts[t["contracts"][i]].first.push_back(t["requests"][i]);
      by_contracts[t["contracts"][i]].second.push_back(t["total_gas_mean"][i]);
    }
    for (const auto& [c, xy] : by_contracts) {
      const auto fit = sim::stats::linear_fit(xy.first, xy.second);
      out << "total gas vs requests, " << c << " contracts: slope " << format_double(fit.slope) << " R^2 "
          << text::format_fixed(fit.r2, 6) << '\n';
    }
  } else {
    out << "total gas linearity: absent (no surface)\n";
  }

  if (metrics) {
    auto t = detail::read_table(*metrics);
    double drops = 0.0, submitted = 0.0;
    for (double d : t["drops_loss"]) drops += d;
    for (double d : t["drops_queue"]) drops += d;
    for (double s : t["submitted"]) submitted += s;
    const auto& lat = t["mean_latency"];
    const auto& p95 = t["p95_latency"];
    out << "runs: " << lat.size() << "\ndrops: " << format_double(drops) << " of " << format_double(submitted)
        << " submitted\nmean latency: " << format_double(sim::stats::mean(lat))
        << " s\nmean p95 latency: " << format_double(sim::stats::mean(p95)) << " s\n";
  }
  return kOk;
}

inline int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  Log log(err);
  if (m.mode == Mode::Explain) return cmd_explain(m, out, err);
  try {
    const auto cf = detail::load_config(m);
    std::error_code ec;
    fs::create_directories(m.out_dir, ec);
    if (ec || !fs::is_directory(m.out_dir)) {
      err << "error: output directory " << m.out_dir.string() << " is not writable\n";
      return kRuntimeError;
    }
    switch (m.mode) {
      case Mode::Single: return detail::run_single(cf, m, out, log);
      case Mode::Sweep: return detail::run_sweep(cf, m, out, log);
      case Mode::Fit: return detail::run_fit(cf, m, out);
      case Mode::Verify: return detail::run_verify(cf, m, out);
      case Mode::Explain: break;
    }
  } catch (const sim::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const health::HealthError& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == health::HealthErrc::InvalidDataset ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace epitrace::cli
