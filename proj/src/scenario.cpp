#include "cacq/scenario.hpp"

#include <cmath>
#include <regex>

namespace cacq {

namespace {

int parse_int(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw std::invalid_argument(what + ": '" + text + "' is not an integer");
  return v;
}

PolicySpec::Kind policy_kind(const std::string& name) {
  if (name == "threshold") return PolicySpec::Kind::threshold;
  if (name == "queue_aware") return PolicySpec::Kind::queue_aware;
  if (name == "queue_aware_vector") return PolicySpec::Kind::queue_aware_vector;
  if (name == "none") return PolicySpec::Kind::none;
  throw std::invalid_argument("unknown policy '" + name +
                              "' (expected threshold, queue_aware, queue_aware_vector or none)");
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, const std::string& what, int line) {
  if (rows.empty()) throw ConfigError(what + " is empty", line);
  const std::size_t n = rows.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n)
      throw ConfigError(what + " must be square: row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " entries, expected " + std::to_string(n),
                        line);
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void expect_args(const ConfigValue& v, std::size_t count, const std::string& usage) {
  if (v.items.size() != count) throw ConfigError(usage + " takes " + std::to_string(count) + " arguments", v.line);
}

BatchArrivalProcess read_arrival(const ConfigSection& s) {
  BatchArrivalProcess p;
  int anchor = s.line;
  if (const ConfigEntry* e = s.find("process")) {
    anchor = e->line;
    const ConfigValue& v = e->value;
    if (v.kind != ConfigValue::Kind::call)
      throw ConfigError("arrival.process must be poisson(rate, batch) or mmpp2(r1, r2, s12, s21, batch)", e->line);
    try {
      if (v.text == "poisson") {
        expect_args(v, 2, "poisson(rate, batch)");
        p = BatchArrivalProcess::poisson(v.items[0].as_number("poisson rate"), v.items[1].as_int("poisson batch"));
      } else if (v.text == "mmpp2") {
        expect_args(v, 5, "mmpp2(r1, r2, s12, s21, batch)");
        p = BatchArrivalProcess::mmpp2(v.items[0].as_number("mmpp2 rate1"), v.items[1].as_number("mmpp2 rate2"),
                                       v.items[2].as_number("mmpp2 switch12"),
                                       v.items[3].as_number("mmpp2 switch21"), v.items[4].as_int("mmpp2 batch"));
      } else {
        throw ConfigError("unknown arrival process '" + v.text + "'", e->line);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("arrival.process: ") + ex.what(), e->line);
    }
    for (const auto& key : s.order)
      if (key.size() > 1 && key[0] == 'd' && key != "process")
        throw ConfigError("arrival: give either process or d0/dK matrices, not both", s.entries.at(key).line);
  } else {
    const ConfigEntry& d0 = s.require("d0");
    anchor = d0.line;
    p.d0 = to_matrix(d0.value.as_matrix("arrival.d0"), "arrival.d0", d0.line);
    for (const auto& key : s.order) {
      if (key.size() < 2 || key[0] != 'd' || key == "d0") continue;
      const std::string digits = key.substr(1);
      if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
      const ConfigEntry& e = *s.find(key);
      const int k = std::stoi(digits);
      Matrix dk = to_matrix(e.value.as_matrix("arrival." + key), "arrival." + key, e.line);
      if (dk.rows() != p.d0.rows())
        throw ConfigError("arrival." + key + " is " + std::to_string(dk.rows()) + "x" +
                              std::to_string(dk.rows()) + " but d0 is " + std::to_string(p.d0.rows()) + "x" +
                              std::to_string(p.d0.rows()),
                          e.line);
      p.batches[k] = std::move(dk);
    }
  }
  const BmapValidation check = validate_bmap(p);
  if (!check.ok()) throw ConfigError("invalid arrival process: " + check.describe(), anchor);
  return p;
}

ChannelModel read_channel(const ConfigSection& s) {
  ChannelModel ch;
  ch.num_subchannels = s.integer("subchannels", 5);
  if (const ConfigEntry* e = s.find("model")) {
    const ConfigValue& v = e->value;
    if (v.kind == ConfigValue::Kind::call && v.text == "deterministic") {
      expect_args(v, 1, "deterministic(r)");
      ch.fixed_rate = v.items[0].as_int("deterministic rate");
    } else if (!(v.kind == ConfigValue::Kind::word && v.text == "nakagami")) {
      throw ConfigError("channel.model must be nakagami or deterministic(r)", e->line);
    }
  }
  ch.avg_snr_db = s.number("avg_snr_db", 5.0);
  ch.fading_m = s.number("nakagami_m", 1.0);
  if (const ConfigEntry* e = s.find("amc")) {
    std::vector<AmcEntry> entries;
    for (const auto& row : e->value.as_matrix("channel.amc")) {
      if (row.size() != 3) throw ConfigError("channel.amc rows are [rate_id, threshold_db, packets]", e->line);
      entries.push_back({static_cast<int>(row[0]), row[1], static_cast<int>(row[2])});
    }
    try {
      ch.amc = AmcTable(std::move(entries));
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("channel.amc: ") + ex.what(), e->line);
    }
  }
  try {
    ch.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("channel: ") + ex.what(), s.line);
  }
  return ch;
}

PolicySpec read_policy(const ConfigValue& v) {
  PolicySpec setup;
  if (v.kind == ConfigValue::Kind::word) {
    setup.kind = policy_kind(v.text);
    if (setup.kind != PolicySpec::Kind::none) throw ConfigError("policy " + v.text + " needs an argument", v.line);
    return setup;
  }
  if (v.kind != ConfigValue::Kind::call) throw ConfigError("policy must look like threshold(10)", v.line);
  setup.kind = policy_kind(v.text);
  expect_args(v, 1, v.text + "(...)");
  if (setup.kind == PolicySpec::Kind::queue_aware_vector)
    setup.alpha = v.items[0].as_vector("policy.alpha");
  else
    setup.value = v.items[0].as_int("policy " + v.text);
  return setup;
}

}  // namespace

PolicySpec parse_policy(const std::string& text) {
  static const std::regex colon(R"(^\s*([a-z_]+)\s*(?::\s*(-?[0-9]+))?\s*$)");
  static const std::regex call(R"(^\s*([a-z_]+)\s*\(\s*(-?[0-9]+)\s*\)\s*$)");
  std::smatch m;
  PolicySpec setup;
  if (std::regex_match(text, m, colon) || std::regex_match(text, m, call)) {
    setup.kind = policy_kind(m[1]);
    if (setup.kind == PolicySpec::Kind::queue_aware_vector)
      throw std::invalid_argument("queue_aware_vector policies are only available in config files");
    if (m[2].matched) setup.value = parse_int(m[2], "policy argument");
    if (setup.value == 0 && setup.kind != PolicySpec::Kind::none)
      throw std::invalid_argument("policy '" + text + "' needs a positive argument");
    return setup;
  }
  throw std::invalid_argument("cannot parse policy '" + text + "' (try threshold:10, queue_aware:100, none:70)");
}

std::string to_string(const PolicySpec& setup) {
  switch (setup.kind) {
    case PolicySpec::Kind::threshold: return "threshold(" + std::to_string(setup.value) + ")";
    case PolicySpec::Kind::queue_aware: return "queue_aware(" + std::to_string(setup.value) + ")";
    case PolicySpec::Kind::queue_aware_vector: return "queue_aware_vector";
    case PolicySpec::Kind::none: return setup.value ? "none(" + std::to_string(setup.value) + ")" : "none";
  }
  return "?";
}

CacPolicy Scenario::make_policy() const {
  auto need_ctr = [&]() {
    if (!c_tr) throw std::invalid_argument(to_string(policy) + " needs policy.c_tr");
    return *c_tr;
  };
  switch (policy.kind) {
    case PolicySpec::Kind::threshold: return CacPolicy::threshold(policy.value);
    case PolicySpec::Kind::queue_aware: return CacPolicy::queue_aware(policy.value, queue_cap, need_ctr());
    case PolicySpec::Kind::queue_aware_vector:
      if (static_cast<int>(policy.alpha.size()) != queue_cap + 1)
        throw std::invalid_argument("policy.alpha has " + std::to_string(policy.alpha.size()) +
                                    " entries, expected queue.capacity + 1 = " + std::to_string(queue_cap + 1));
      return CacPolicy::queue_aware(policy.alpha, need_ctr());
    case PolicySpec::Kind::none: return CacPolicy::none(policy.value ? policy.value : need_ctr());
  }
  throw std::logic_error("unreachable");
}

void Scenario::validate() const {
  if (queue_cap < 0) throw std::invalid_argument("queue.capacity must be >= 0");
  if (max_batch < 1) throw std::invalid_argument("arrival.max_batch must be >= 1");
  if (c_tr && *c_tr < 1) throw std::invalid_argument("policy.c_tr must be >= 1");
  const BmapValidation check = validate_bmap(arrival);
  if (!check.ok()) throw std::invalid_argument("invalid arrival process: " + check.describe());
  connections.validate();
  channel.validate();
  make_policy().validate();
  if (sim) {
    if (sim->measure_frames < 1000) throw std::invalid_argument("sim.measure_frames must be >= 1000");
    if (sim->replications < 3) throw std::invalid_argument("sim.replications must be >= 3");
  }
}

ChainInputs Scenario::chain_inputs() const {
  ChainInputs in;
  in.kernel = frame_count_kernel(arrival, connections.frame_length, max_batch);
  in.capacity = capacity_distribution(channel);
  in.connections = connections;
  in.policy = make_policy();
  in.queue_cap = queue_cap;
  return in;
}

SimConfig Scenario::sim_config() const {
  if (!sim) throw ConfigError("missing section [sim]", 0);
  SimConfig c;
  c.model = chain_inputs();
  c.warmup_frames = sim->warmup_frames;
  c.measure_frames = sim->measure_frames;
  c.replications = sim->replications;
  c.base_seed = sim->seed;
  c.fingerprint = fingerprint();
  return c;
}

std::string Scenario::fingerprint() const {
  Fingerprint f;
  f.add(std::string_view("arrival"));
  f.add(arrival.d0);
  for (const auto& [k, m] : arrival.batches) {
    f.add(static_cast<std::int64_t>(k));
    f.add(m);
  }
  f.add(static_cast<std::int64_t>(max_batch));
  f.add(std::string_view("connections"));
  f.add(connections.arrival_rate);
  f.add(connections.mean_duration);
  f.add(connections.frame_length);
  f.add(static_cast<std::int64_t>(connections.max_arrivals_per_frame));
  f.add(std::string_view("channel"));
  f.add(static_cast<std::int64_t>(channel.num_subchannels));
  if (channel.fixed_rate) {
    f.add(static_cast<std::int64_t>(*channel.fixed_rate));
  } else {
    f.add(channel.avg_snr_db);
    f.add(channel.fading_m);
    for (const auto& e : channel.amc.entries()) {
      f.add(static_cast<std::int64_t>(e.rate_id));
      f.add(e.snr_threshold_db);
      f.add(static_cast<std::int64_t>(e.packets_per_frame));
    }
  }
  f.add(std::string_view("policy"));
  f.add(std::string_view(to_string(policy)));
  f.add(static_cast<std::int64_t>(c_tr.value_or(-1)));
  f.add(std::span<const double>(policy.alpha));
  f.add(static_cast<std::int64_t>(queue_cap));
  return f.hex();
}

Scenario scenario_from_config(const ConfigDocument& doc) {
  doc.reject_unknown_sections({"arrival", "connections", "channel", "policy", "queue", "solver", "sim"});
  Scenario sc;

  const ConfigSection& arrival = doc.require_section("arrival");
  sc.arrival = read_arrival(arrival);
  sc.max_batch = arrival.integer("max_batch");
  if (sc.max_batch < 1) throw ConfigError("arrival.max_batch must be >= 1", arrival.require("max_batch").line);
  arrival.reject_unused();

  const ConfigSection& conn = doc.require_section("connections");
  sc.connections.arrival_rate = conn.number("arrival_rate");
  sc.connections.mean_duration = conn.number("mean_duration");
  sc.connections.frame_length = conn.number("frame_length_ms", 1.0) / 60000.0;
  sc.connections.max_arrivals_per_frame = conn.integer("max_arrivals_per_frame", 3);
  try {
    sc.connections.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("connections: ") + ex.what(), conn.line);
  }
  conn.reject_unused();

  if (const ConfigSection* ch = doc.section("channel")) {
    sc.channel = read_channel(*ch);
    ch->reject_unused();
  }

  const ConfigSection& queue = doc.require_section("queue");
  sc.queue_cap = queue.integer("capacity");
  if (sc.queue_cap < 0) throw ConfigError("queue.capacity must be >= 0", queue.require("capacity").line);
  queue.reject_unused();

  const ConfigSection& pol = doc.require_section("policy");
  const ConfigEntry& rule = pol.require("policy");
  try {
    sc.policy = read_policy(rule.value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what(), rule.line);
  }
  if (pol.has("c_tr")) {
    sc.c_tr = pol.integer("c_tr");
    if (*sc.c_tr < 1) throw ConfigError("policy.c_tr must be >= 1", pol.require("c_tr").line);
  }
  try {
    sc.make_policy();
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what(), rule.line);
  }
  pol.reject_unused();

  if (const ConfigSection* s = doc.section("solver")) {
    try {
      sc.solver.method = parse_solver_method(s->word("method", "auto"));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what(), s->require("method").line);
    }
    sc.solver.tolerance = s->number("tol", 1e-10);
    const double max_iter = s->number("max_iter", 1e6);
    const double direct_cap = s->number("direct_cap", 5000);
    const double budget_mb = s->number("memory_budget_mb", 3072);
    if (!(sc.solver.tolerance > 0.0) || max_iter < 1 || direct_cap < 1 || budget_mb <= 0)
      throw ConfigError("solver settings must be positive", s->line);
    sc.solver.max_iterations = static_cast<std::size_t>(max_iter);
    sc.solver.direct_max_states = static_cast<std::size_t>(direct_cap);
    sc.solver.memory_budget_bytes = static_cast<std::size_t>(budget_mb * 1024.0 * 1024.0);
    sc.metrics.single_connection_throughput = s->boolean("single_connection_throughput", false);
    s->reject_unused();
  }

  if (const ConfigSection* s = doc.section("sim")) {
    SimSettings sim;
    const int warmup = s->integer("warmup_frames", 20000);
    const int measure = s->integer("measure_frames", 200000);
    const int seed = s->integer("seed", 1);
    sim.replications = s->integer("replications", 10);
    if (warmup < 0) throw ConfigError("sim.warmup_frames must be >= 0", s->require("warmup_frames").line);
    if (measure < 1000) throw ConfigError("sim.measure_frames must be >= 1000", s->line);
    if (sim.replications < 3) throw ConfigError("sim.replications must be >= 3", s->line);
    if (seed < 0) throw ConfigError("sim.seed must be >= 0", s->line);
    sim.warmup_frames = static_cast<std::uint64_t>(warmup);
    sim.measure_frames = static_cast<std::uint64_t>(measure);
    sim.seed = static_cast<std::uint64_t>(seed);
    sc.sim = sim;
    s->reject_unused();
  }

  try {
    sc.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what(), 0);
  }
  return sc;
}

Scenario load_scenario(const std::string& path) { return scenario_from_config(load_config_file(path)); }

QosReport analyze(const Scenario& scenario) {
  const StructuredChain chain(scenario.chain_inputs());
  const StationaryDistribution dist = solve(chain, scenario.solver);
  QosReport r = compute_report(dist, chain, scenario.metrics);
  r.fingerprint = scenario.fingerprint();
  if (!scenario.channel.fixed_rate) r.snr_db = scenario.channel.avg_snr_db;
  return r;
}

}  // namespace cacq
