// Command-line front end: run, sweep, gap, meta-exact, validate.

#include "metareason/harness.hpp"
#include "metareason/mdp_json.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace mr = metareason;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string domain;
  std::string agent;
  std::optional<std::size_t> n;
  std::optional<double> p;
  std::optional<double> cost_think;
  std::optional<double> cost_act;
  std::optional<std::size_t> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k_trials;
  std::optional<std::size_t> max_decisions;
  std::optional<unsigned> threads;
  bool reverse_only = false;
  std::string out;
  std::string trace;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_agent) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--domain", f.domain, "stochastic | traps | dynamicnop1 | dynamicnop2");
  if (with_agent) {
    cmd->add_option("--agent", f.agent,
                    "think_star_act | prob | no_info_think | heuristic | metareasoner | "
                    "uncorr_metareasoner (optionally kind:param)");
    cmd->add_option("--n", f.n, "think_star_act cycle count");
    cmd->add_option("--p", f.p, "prob think probability");
  }
  cmd->add_option("--cost-think", f.cost_think, "NOP cost per cell");
  cmd->add_option("--cost-act", f.cost_act, "movement cost per cell");
  cmd->add_option("--episodes", f.episodes, "episodes per experiment");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--k-trials", f.k_trials, "BRTDP trials per thinking cycle");
  cmd->add_option("--max-decisions", f.max_decisions, "per-episode decision cap");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  cmd->add_flag("--reverse-backups-only", f.reverse_only,
                "back up trial states only on the way out");
  cmd->add_option("--out", f.out, "output file (stdout when absent)");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

mr::ExperimentConfig build_config(const CommonFlags& f) {
  mr::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = mr::experiment_from_json(read_json_file(f.config));
  if (!f.domain.empty()) {
    const auto scale = cfg.domain.upper_heuristic_scale;
    cfg.domain = mr::grid::DomainConfig::defaults(mr::grid::parse_domain_kind(f.domain));
    cfg.domain.upper_heuristic_scale = scale;
  }
  if (f.cost_think) cfg.domain.cost_think = *f.cost_think;
  if (f.cost_act) cfg.domain.cost_act = *f.cost_act;
  if (!f.agent.empty())
    cfg.agent = f.agent.find(':') != std::string::npos
                    ? mr::parse_agent(f.agent)
                    : mr::AgentConfig::of(mr::parse_agent_kind(f.agent));
  if (f.n) cfg.agent.n = *f.n;
  if (f.p) cfg.agent.p = *f.p;
  if (f.episodes) cfg.episodes = *f.episodes;
  if (f.seed) cfg.seed = *f.seed;
  if (f.k_trials) cfg.k_trials_per_cycle = *f.k_trials;
  if (f.max_decisions) cfg.max_decisions_per_episode = *f.max_decisions;
  if (f.threads) cfg.threads = *f.threads;
  if (f.reverse_only) cfg.forward_backups = false;
  cfg.trace = !f.trace.empty();
  cfg.validate();
  return cfg;
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  fn(out);
}

int cmd_run(const CommonFlags& f) {
  const auto cfg = build_config(f);
  const auto result = mr::run_experiment(cfg);
  with_output(f.out, [&](std::ostream& os) { mr::write_csv(os, {mr::csv_row(result)}); });
  if (!f.trace.empty())
    with_output(f.trace, [&](std::ostream& os) { mr::write_trace_csv(os, result.trace); });
  return 0;
}

std::vector<mr::AgentConfig> parse_agent_list(const std::string& text) {
  std::vector<mr::AgentConfig> agents;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) agents.push_back(mr::parse_agent(item));
  return agents;
}

int cmd_sweep(const CommonFlags& f, const std::string& axis, const std::string& agents,
              bool no_avg) {
  CommonFlags base = f;
  base.trace.clear();
  auto cfg = build_config(base);
  const auto list = parse_agent_list(agents);
  if (list.empty()) throw std::invalid_argument("--agents is empty");
  const auto sweep = mr::run_sweep(cfg, mr::parse_sweep_axis(axis), list);
  with_output(f.out, [&](std::ostream& os) {
    auto rows = sweep.rows;
    if (!no_avg) rows.insert(rows.end(), sweep.averages.begin(), sweep.averages.end());
    mr::write_csv(os, rows);
  });
  return 0;
}

int cmd_gap(const std::string& domain, const std::string& out) {
  std::vector<mr::grid::DomainKind> kinds;
  if (domain.empty() || domain == "all")
    kinds = {mr::grid::DomainKind::kStochastic, mr::grid::DomainKind::kTraps,
             mr::grid::DomainKind::kDynamicNop1, mr::grid::DomainKind::kDynamicNop2};
  else
    kinds = {mr::grid::parse_domain_kind(domain)};
  json reports = json::array();
  for (const auto& g : mr::gap_reports(kinds)) {
    json j = mr::to_json(g.gap);
    j["domain"] = g.domain;
    j["setting"] = g.setting;
    if (std::isfinite(g.cost_think)) j["cost_think"] = g.cost_think;
    if (std::isfinite(g.cost_act)) j["cost_act"] = g.cost_act;
    reports.push_back(j);
  }
  with_output(out, [&](std::ostream& os) { os << reports.dump(2) << '\n'; });
  return 0;
}

int cmd_meta_exact(const std::string& mdp_path, std::size_t granularity,
                   std::size_t size_cap, std::optional<std::size_t> chain_len,
                   const std::string& out) {
  const mr::BaseMdp m = mr::mdp_from_json(read_json_file(mdp_path));
  const auto report = mr::validate_ssp(m);
  if (!report.is_ssp) {
    std::cerr << "not an SSP MDP:\n";
    for (const auto& msg : report.messages) std::cerr << "  " << msg << '\n';
    return 1;
  }
  mr::InstrumentOptions opt;
  opt.granularity = granularity;
  opt.size_cap = size_cap;
  const auto trace = mr::instrument_solver(m, opt);
  const auto meta = mr::construct_meta_mdp(m, trace);
  const double meta_value = mr::solve_meta(meta).value[meta.product.start_state()];
  const double base_optimal = mr::value_iteration(m).value[m.start_state()];

  // Optimal metareasoning on the lollypop MDP recovers the optimum of m
  // without its NOP.
  mr::SolveOptions acting;
  acting.actions = mr::ActionSet::kExcludeNop;
  const double reference = mr::value_iteration(m, acting).value[m.start_state()];
  const auto lolly = mr::construct_lollypop(m, chain_len.value_or(trace.length()));
  mr::InstrumentOptions lolly_opt;
  lolly_opt.size_cap = size_cap;
  const auto lolly_meta = mr::construct_meta_mdp(lolly, mr::instrument_solver(lolly, lolly_opt));
  const double lolly_value = mr::solve_meta(lolly_meta).value[lolly_meta.product.start_state()];
  const bool lolly_ok = std::abs(lolly_value - reference) <= 1e-6;

  const double heuristic = mr::schedule_cost(m, trace.policies.front());
  json j;
  j["product_size"] = meta.product.state_count();
  j["trace_length"] = trace.length();
  j["meta_value"] = meta_value;
  j["base_optimal"] = base_optimal;
  j["lollypop_check"] = lolly_ok ? "pass" : "fail";
  j["lollypop_value"] = lolly_value;
  j["lollypop_reference"] = reference;
  j["gap"] = mr::to_json(mr::gap_from_costs(heuristic, base_optimal));
  with_output(out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return 0;
}

int cmd_validate(const std::string& mdp_path) {
  json result;
  try {
    const mr::BaseMdp m = mr::mdp_from_json(read_json_file(mdp_path));
    const auto report = mr::validate_ssp(m);
    result["is_ssp"] = report.is_ssp;
    result["proper_policy_found"] = report.proper_policy_found;
    result["messages"] = report.messages;
    result["states"] = m.state_count();
    result["actions"] = m.action_count();
    std::cout << result.dump(2) << '\n';
    return report.is_ssp ? 0 : 1;
  } catch (const mr::StructuralError& e) {
    result["is_ssp"] = false;
    result["error"] = e.what();
    std::cout << result.dump(2) << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metareasoning experiments on SSP MDPs"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "one experiment, one CSV row");
  add_common(run, run_flags, true);
  run->add_option("--trace", run_flags.trace, "write the per-decision log as CSV here");

  CommonFlags sweep_flags;
  std::string axis = "think";
  std::string agents = "metareasoner,uncorr_metareasoner,no_info_think,heuristic";
  bool no_avg = false;
  auto* sweep = app.add_subcommand("sweep", "cost sweep over agents, CSV");
  add_common(sweep, sweep_flags, false);
  sweep->add_option("--axis", axis, "think (act fixed at 11) or act (think fixed at 1)");
  sweep->add_option("--agents", agents, "comma-separated agents, e.g. prob:0.3,metareasoner");
  sweep->add_flag("--no-avg", no_avg, "omit the per-agent average rows");

  std::string gap_domain, gap_out;
  auto* gap = app.add_subcommand("gap", "Heuristic / OptimalBase ratios, JSON");
  gap->add_option("--domain", gap_domain, "one domain or all");
  gap->add_option("--out", gap_out, "output file");

  std::string meta_mdp, meta_out;
  std::size_t granularity = 1, size_cap = 1'000'000;
  std::optional<std::size_t> chain_len;
  auto* meta = app.add_subcommand("meta-exact", "exact meta-MDP of a small MDP, JSON");
  meta->add_option("--mdp", meta_mdp, "base MDP JSON")->required();
  meta->add_option("--granularity", granularity, "solver sweeps per configuration");
  meta->add_option("--size-cap", size_cap, "limit on |S| x trace length");
  meta->add_option("--chain-length", chain_len, "lollypop chain length (trace length)");
  meta->add_option("--out", meta_out, "output file");

  std::string validate_mdp;
  auto* validate = app.add_subcommand("validate", "check an MDP JSON file");
  validate->add_option("mdp", validate_mdp, "MDP JSON")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags, axis, agents, no_avg);
    if (*gap) return cmd_gap(gap_domain, gap_out);
    if (*meta) return cmd_meta_exact(meta_mdp, granularity, size_cap, chain_len, meta_out);
    if (*validate) return cmd_validate(validate_mdp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
