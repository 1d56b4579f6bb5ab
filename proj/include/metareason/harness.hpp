#pragma once

#include "metareason/agents.hpp"
#include "metareason/gridworld.hpp"
#include "metareason/meta_exact.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace metareason {

struct ExperimentConfig {
  grid::DomainConfig domain;
  AgentConfig agent;
  std::size_t episodes = 1000;
  std::size_t k_trials_per_cycle = 1;
  std::size_t max_decisions_per_episode = 100'000;
  std::uint64_t seed = 1;
  bool trace = false;
  std::size_t trial_length = 50;
  bool forward_backups = true;
  unsigned threads = 1;  // 0 picks the hardware concurrency

  void validate() const {
    domain.validate();
    agent.validate();
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (max_decisions_per_episode < 1) throw std::invalid_argument("step cap must be >= 1");
    if (k_trials_per_cycle < 1) throw std::invalid_argument("k_trials_per_cycle must be >= 1");
    if (trial_length < 1) throw std::invalid_argument("trial_length must be >= 1");
  }
};

struct EpisodeStats {
  double total_cost = 0.0;
  std::size_t think_count = 0;
  std::size_t act_count = 0;
  bool reached_goal = false;
  bool truncated = false;
  /// Largest raw bound violation any backup saw, floored at 0.
  double max_upper_increase = 0.0;
  double max_lower_decrease = 0.0;

  friend bool operator==(const EpisodeStats&, const EpisodeStats&) = default;
};

struct TraceRecord {
  std::size_t episode = 0;
  std::size_t step = 0;
  StateIndex state = 0;
  MetaDecision decision = MetaDecision::kAct;
  ActionIndex action = 0;
  double cost = 0.0;
  double q_act = std::numeric_limits<double>::quiet_NaN();
  double q_nop = std::numeric_limits<double>::quiet_NaN();
  double voc = std::numeric_limits<double>::quiet_NaN();
};

/// World model plus initial bounds, shared read-only by every episode.
struct Environment {
  BaseMdp mdp;
  ValueFn lower;
  ValueFn upper;
  std::string name;
  /// Drop history every episode starts from; empty when absent.
  std::optional<DropHistory> initial_drops;
};

inline Environment make_environment(const grid::DomainConfig& cfg) {
  auto domain = grid::build_domain(cfg);
  auto bounds = grid::heuristic_bounds(domain.spec, cfg);
  return {std::move(domain.mdp), std::move(bounds.lower), std::move(bounds.upper),
          std::string(grid::to_string(cfg.kind)), std::nullopt};
}

/**
 * One episode with a fresh planner. Thinking pays C(s, NOP), runs a thinking
 * cycle from s, then moves s by a sampled NOP transition; acting pays C(s, a)
 * for the recommendation and moves s by a sampled transition.
 */
inline EpisodeStats run_episode(const Environment& env, const ExperimentConfig& cfg, Rng& rng,
                                std::vector<TraceRecord>* trace = nullptr,
                                std::size_t episode_index = 0) {
  const BaseMdp& m = env.mdp;
  BoundsState b = init_planner(m, env.lower, env.upper);
  DropHistory drops = env.initial_drops.value_or(DropHistory(m.action_count()));
  AgentEpisodeState agent_state;
  TrialOptions trial;
  trial.max_length = cfg.trial_length;
  trial.forward_backups = cfg.forward_backups;

  EpisodeStats stats;
  StateIndex s = m.start_state();
  std::size_t step = 0;
  while (!m.is_goal(s)) {
    if (step == cfg.max_decisions_per_episode) {
      stats.truncated = true;
      break;
    }
    const AgentDecision d = agent_step(cfg.agent, agent_state, m, b, drops, s, rng);
    TraceRecord rec;
    if (trace) {
      rec.episode = episode_index;
      rec.step = step;
      rec.state = s;
      rec.decision = d.decision;
      rec.action = d.action;
      if (d.voc) {
        rec.q_act = d.voc->q_act;
        rec.q_nop = d.voc->q_nop;
        rec.voc = d.voc->voc;
      }
    }
    const ActionIndex a = d.decision == MetaDecision::kThink ? m.nop_action() : d.action;
    const double c = m.cost(s, a);
    stats.total_cost += c;
    if (d.decision == MetaDecision::kThink) {
      ++stats.think_count;
      thinking_cycle(b, drops, m, s, cfg.k_trials_per_cycle, rng, trial);
    } else {
      ++stats.act_count;
    }
    s = sample_transition(m, s, a, rng);
    if (trace) {
      rec.cost = c;
      trace->push_back(rec);
    }
    ++step;
  }
  stats.reached_goal = m.is_goal(s);
  stats.max_upper_increase = b.max_upper_increase;
  stats.max_lower_decrease = b.max_lower_decrease;
  return stats;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::string domain_name;
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
  double mean_thinks = 0.0;
  double mean_acts = 0.0;
  double trunc_rate = 0.0;
  std::vector<EpisodeStats> episodes;
  std::vector<TraceRecord> trace;
};

inline Rng episode_rng(std::uint64_t seed, std::size_t episode) {
  return Rng(seed ^ static_cast<std::uint64_t>(episode));
}

inline ExperimentResult aggregate(const ExperimentConfig& cfg, std::string domain_name,
                                  std::vector<EpisodeStats> episodes) {
  ExperimentResult r;
  r.config = cfg;
  r.domain_name = std::move(domain_name);
  const double n = static_cast<double>(episodes.size());
  double sum = 0.0, thinks = 0.0, acts = 0.0, trunc = 0.0;
  for (const auto& e : episodes) {
    sum += e.total_cost;
    thinks += static_cast<double>(e.think_count);
    acts += static_cast<double>(e.act_count);
    trunc += e.truncated ? 1.0 : 0.0;
  }
  r.mean_cost = sum / n;
  double ss = 0.0;
  for (const auto& e : episodes) ss += (e.total_cost - r.mean_cost) * (e.total_cost - r.mean_cost);
  r.stderr_cost = episodes.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  r.mean_thinks = thinks / n;
  r.mean_acts = acts / n;
  r.trunc_rate = trunc / n;
  r.episodes = std::move(episodes);
  return r;
}

/// Runs cfg.episodes independent episodes, episode i seeded with seed ^ i.
/// Episodes may run on several threads; the reduction is ordered by index.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Environment& env) {
  cfg.validate();
  std::vector<EpisodeStats> stats(cfg.episodes);
  std::vector<std::vector<TraceRecord>> traces(cfg.trace ? cfg.episodes : 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.episodes; i = next++) {
      Rng rng = episode_rng(cfg.seed, i);
      stats[i] = run_episode(env, cfg, rng, cfg.trace ? &traces[i] : nullptr, i);
    }
  };
  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.episodes));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  ExperimentResult r = aggregate(cfg, env.name, std::move(stats));
  for (auto& t : traces) r.trace.insert(r.trace.end(), t.begin(), t.end());
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, make_environment(cfg.domain));
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_fixed(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// Shortest text for a cost setting: "11", "0.5".
inline std::string format_setting(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline constexpr const char* kCsvHeader =
    "domain,agent,param,cost_think,cost_act,episodes,mean_cost,stderr,mean_thinks,mean_acts,"
    "trunc_rate,seed";

struct CsvRow {
  std::string domain, agent, param, cost_think, cost_act;
  std::size_t episodes = 0;
  double mean_cost = 0.0, stderr_cost = 0.0, mean_thinks = 0.0, mean_acts = 0.0,
         trunc_rate = 0.0;
  std::uint64_t seed = 0;

  std::string str() const {
    return domain + "," + agent + "," + param + "," + cost_think + "," + cost_act + "," +
           std::to_string(episodes) + "," + format_fixed(mean_cost, 4) + "," +
           format_fixed(stderr_cost, 4) + "," + format_fixed(mean_thinks, 4) + "," +
           format_fixed(mean_acts, 4) + "," + format_fixed(trunc_rate, 4) + "," +
           std::to_string(seed);
  }
};

inline CsvRow csv_row(const ExperimentResult& r) {
  CsvRow row;
  row.domain = r.domain_name;
  row.agent = r.config.agent.label();
  row.param = r.config.agent.param();
  row.cost_think = format_setting(r.config.domain.cost_think);
  row.cost_act = format_setting(r.config.domain.cost_act);
  row.episodes = r.config.episodes;
  row.mean_cost = r.mean_cost;
  row.stderr_cost = r.stderr_cost;
  row.mean_thinks = r.mean_thinks;
  row.mean_acts = r.mean_acts;
  row.trunc_rate = r.trunc_rate;
  row.seed = r.config.seed;
  return row;
}

inline void write_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << r.str() << '\n';
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << "episode,step,state,decision,action,cost,q_act,q_nop,voc\n";
  for (const auto& t : trace)
    os << t.episode << ',' << t.step << ',' << t.state << ',' << to_string(t.decision) << ','
       << t.action << ',' << format_fixed(t.cost, 6) << ',' << format_fixed(t.q_act, 6) << ','
       << format_fixed(t.q_nop, 6) << ',' << format_fixed(t.voc, 6) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { kThinkCost, kActCost };

inline std::string_view to_string(SweepAxis a) {
  return a == SweepAxis::kThinkCost ? "think" : "act";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "think" || s == "cost_think") return SweepAxis::kThinkCost;
  if (s == "act" || s == "cost_act") return SweepAxis::kActCost;
  throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "'");
}

inline const std::vector<double>& default_sweep_values() {
  static const std::vector<double> v{1.0, 5.0, 10.0, 15.0};
  return v;
}

/// Cost settings of one sweep point: the swept cost takes `value`, the other
/// one its fixed level (act 11 when sweeping think, think 1 when sweeping act).
inline grid::DomainConfig sweep_point(grid::DomainConfig base, SweepAxis axis, double value) {
  if (axis == SweepAxis::kThinkCost) {
    base.cost_think = value;
    base.cost_act = 11.0;
  } else {
    base.cost_think = 1.0;
    base.cost_act = value;
  }
  return base;
}

struct SweepResult {
  std::vector<CsvRow> rows;      // one per (value, agent), value-major
  std::vector<CsvRow> averages;  // one per agent, param = avg
  std::vector<ExperimentResult> results;
};

inline SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<AgentConfig>& agents,
                             const std::vector<double>& values = default_sweep_values()) {
  SweepResult out;
  std::vector<std::vector<const CsvRow*>> by_agent(agents.size());
  for (double v : values) {
    ExperimentConfig cfg = base;
    cfg.domain = sweep_point(base.domain, axis, v);
    cfg.trace = false;
    cfg.validate();
    const Environment env = make_environment(cfg.domain);
    for (const auto& agent : agents) {
      cfg.agent = agent;
      out.results.push_back(run_experiment(cfg, env));
      out.rows.push_back(csv_row(out.results.back()));
    }
  }
  for (std::size_t a = 0; a < agents.size(); ++a) {
    CsvRow avg;
    const double k = static_cast<double>(values.size());
    std::size_t count = 0;
    for (std::size_t i = a; i < out.rows.size(); i += agents.size()) {
      const CsvRow& r = out.rows[i];
      avg.domain = r.domain;
      avg.agent = r.agent;
      avg.cost_think = axis == SweepAxis::kThinkCost ? "" : r.cost_think;
      avg.cost_act = axis == SweepAxis::kActCost ? "" : r.cost_act;
      avg.episodes = r.episodes;
      avg.seed = r.seed;
      avg.mean_cost += out.results[i].mean_cost / k;
      avg.mean_thinks += out.results[i].mean_thinks / k;
      avg.mean_acts += out.results[i].mean_acts / k;
      avg.trunc_rate += out.results[i].trunc_rate / k;
      avg.stderr_cost += out.results[i].stderr_cost * out.results[i].stderr_cost / (k * k);
      ++count;
    }
    if (count == 0) continue;
    avg.stderr_cost = std::sqrt(avg.stderr_cost);
    avg.param = "avg";
    out.averages.push_back(avg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gap reports

struct DomainGap {
  std::string domain;
  std::string setting;  // "default", "think=5", "act=10", "think_avg", "act_avg"
  double cost_think = 0.0;
  double cost_act = 0.0;
  GapReport gap;
};

/// Heuristic and OptimalBase costs at s0 of one domain configuration. Both
/// policies choose among movement actions only.
inline GapReport domain_gap(const grid::DomainConfig& cfg) {
  const Environment env = make_environment(cfg);
  return metareasoning_gap_ub(env.mdp, env.upper, ActionSet::kExcludeNop);
}

/// The default configuration of each domain; for Stochastic additionally every
/// sweep setting and the per-axis averages of the costs.
inline std::vector<DomainGap> gap_reports(const std::vector<grid::DomainKind>& kinds) {
  std::vector<DomainGap> out;
  for (auto kind : kinds) {
    const auto base = grid::DomainConfig::defaults(kind);
    const std::string name(grid::to_string(kind));
    out.push_back({name, "default", base.cost_think, base.cost_act, domain_gap(base)});
    if (kind != grid::DomainKind::kStochastic) continue;
    for (auto axis : {SweepAxis::kThinkCost, SweepAxis::kActCost}) {
      double h = 0.0, o = 0.0;
      const auto& values = default_sweep_values();
      for (double v : values) {
        const auto cfg = sweep_point(base, axis, v);
        const GapReport g = domain_gap(cfg);
        out.push_back({name, std::string(to_string(axis)) + "=" + format_setting(v),
                       cfg.cost_think, cfg.cost_act, g});
        h += g.heuristic_cost / static_cast<double>(values.size());
        o += g.optimal_cost / static_cast<double>(values.size());
      }
      out.push_back({name, std::string(to_string(axis)) + "_avg",
                     std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), gap_from_costs(h, o)});
    }
  }
  return out;
}

inline nlohmann::json to_json(const GapReport& g) {
  nlohmann::json j;
  j["heuristic_cost"] = g.heuristic_cost;
  j["optimal_cost"] = g.optimal_cost;
  j["defined"] = g.defined;
  if (g.defined)
    j["mg_ub"] = g.mg_ub;
  else
    j["mg_ub"] = nullptr;
  if (!std::isfinite(g.heuristic_cost)) j["heuristic_cost"] = "inf";
  return j;
}

// ---------------------------------------------------------------------------
// JSON configuration

inline grid::DomainConfig domain_from_json(const nlohmann::json& j) {
  grid::DomainConfig cfg =
      grid::DomainConfig::defaults(grid::parse_domain_kind(j.value("kind", "stochastic")));
  if (j.contains("cost_think")) cfg.cost_think = j.at("cost_think").get<double>();
  if (j.contains("cost_act")) cfg.cost_act = j.at("cost_act").get<double>();
  if (j.contains("upper_heuristic_scale"))
    cfg.upper_heuristic_scale = j.at("upper_heuristic_scale").get<double>();
  if (j.contains("trap_cost")) cfg.trap_cost = j.at("trap_cost").get<double>();
  cfg.validate();
  return cfg;
}

inline AgentConfig agent_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_agent(j.get<std::string>());
  AgentConfig cfg = AgentConfig::of(parse_agent_kind(j.at("kind").get<std::string>()));
  if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
  if (j.contains("p")) cfg.p = j.at("p").get<double>();
  cfg.validate();
  return cfg;
}

/// Keys: domain {kind, cost_think, cost_act, upper_heuristic_scale, trap_cost},
/// agent {kind, n, p} or "kind:param", episodes, k_trials_per_cycle,
/// max_decisions_per_episode, seed, trace, trial_length, forward_backups,
/// threads.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    if (j.contains("domain")) cfg.domain = domain_from_json(j.at("domain"));
    if (j.contains("agent")) cfg.agent = agent_from_json(j.at("agent"));
    cfg.episodes = j.value("episodes", cfg.episodes);
    cfg.k_trials_per_cycle = j.value("k_trials_per_cycle", cfg.k_trials_per_cycle);
    cfg.max_decisions_per_episode =
        j.value("max_decisions_per_episode", cfg.max_decisions_per_episode);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.trace = j.value("trace", cfg.trace);
    cfg.trial_length = j.value("trial_length", cfg.trial_length);
    cfg.forward_backups = j.value("forward_backups", cfg.forward_backups);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw grid::ConfigError(std::string("bad experiment config: ") + e.what());
  }
}

}  // namespace metareason
