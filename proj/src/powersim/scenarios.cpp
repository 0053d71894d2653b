#include "tsa/powersim/scenarios.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "tsa/error.hpp"
#include "tsa/parallel.hpp"
#include "tsa/powersim/features.hpp"
#include "tsa/powersim/power_flow.hpp"
#include "tsa/powersim/swing.hpp"
#include "tsa/rng.hpp"

namespace tsa::powersim {

using nlohmann::json;

void ScenarioConfig::validate() const {
  if (load_levels.empty()) throw ConfigError("scenario config needs at least one load level");
  for (double l : load_levels)
    if (!(l > 0.0)) throw ConfigError("load levels must be positive");
  if (dispatches_per_level < 1) throw ConfigError("dispatches_per_level must be >= 1");
  if (fault_buses.empty()) throw ConfigError("scenario config needs at least one fault bus");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (t_clear < 0.0) throw ConfigError("t_clear must be non-negative");
  if (!(horizon > t_clear)) throw ConfigError("horizon must exceed t_clear");
  if (!(share_low > 0.0) || !(share_high >= share_low))
    throw ConfigError("dispatch share range must satisfy 0 < low <= high");
}

ScenarioConfig parse_scenarios(const std::string& json_text) {
  ScenarioConfig c;
  try {
    const json j = json::parse(json_text);
    c.load_levels = j.at("load_levels").get<std::vector<double>>();
    c.dispatches_per_level = j.at("dispatches_per_level").get<int>();
    c.fault_buses = j.at("fault_buses").get<std::vector<int>>();
    c.t_clear = j.value("t_clear", c.t_clear);
    c.horizon = j.value("horizon", c.horizon);
    c.dt = j.value("dt", c.dt);
    c.seed = j.value("seed", c.seed);
    c.share_low = j.value("share_low", c.share_low);
    c.share_high = j.value("share_high", c.share_high);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenarios(ss.str());
}

namespace {

struct BaseDispatch {
  Vector shares;
  double load = 0.0;
  double losses = 0.0;
};

BaseDispatch base_dispatch(const PowerCase& base) {
  const PowerFlowResult pf = solve_power_flow(base);
  BaseDispatch b;
  for (const auto& l : base.loads) b.load += l.p;
  const double gen = pf.p_gen.sum();
  b.losses = gen - b.load;
  b.shares = pf.p_gen / gen;
  return b;
}

PowerCase redispatch(const PowerCase& base, const BaseDispatch& bd, const ScenarioConfig& cfg,
                     std::size_t level_index, int dispatch) {
  const double level = cfg.load_levels.at(level_index);
  PowerCase c = base;
  for (auto& l : c.loads) {
    l.p *= level;
    l.q *= level;
  }
  Rng rng = derive_rng(cfg.seed, {0x5ce7a210ULL, level_index, static_cast<std::uint64_t>(dispatch)});
  std::uniform_real_distribution<double> u(cfg.share_low, cfg.share_high);
  Vector s(bd.shares.size());
  for (Eigen::Index g = 0; g < s.size(); ++g) s(g) = bd.shares(g) * u(rng);
  s /= s.sum();
  const double total = level * bd.load + bd.losses * level * level;
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    c.generators[g].pg = s(static_cast<Eigen::Index>(g)) * total;
  return c;
}

}  // namespace

PowerCase dispatch_case(const PowerCase& base, const ScenarioConfig& cfg, std::size_t level_index,
                        int dispatch) {
  return redispatch(base, base_dispatch(base), cfg, level_index, dispatch);
}

GeneratedData generate_dataset(const PowerCase& base, const ScenarioConfig& cfg,
                               unsigned threads) {
  cfg.validate();
  base.validate();
  for (int b : cfg.fault_buses) base.bus_index(b);
  const BaseDispatch bd = base_dispatch(base);

  const std::size_t nl = cfg.load_levels.size();
  const auto nd = static_cast<std::size_t>(cfg.dispatches_per_level);
  const std::size_t nf = cfg.fault_buses.size();

  // Operating points, one per (level, dispatch).
  std::vector<std::optional<OperatingPoint>> ops(nl * nd);
  std::vector<std::string> op_error(nl * nd);
  parallel_for(nl * nd, threads, [&](std::size_t i) {
    try {
      ops[i] = initial_conditions(redispatch(base, bd, cfg, i / nd, static_cast<int>(i % nd)));
    } catch (const NumericalError& e) {
      op_error[i] = e.what();
    }
  });

  const std::size_t total = nl * nd * nf;
  std::vector<std::optional<FeatureVector33>> feats(total);
  std::vector<int> labels(total, 0);
  std::vector<std::string> err(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const auto& op = ops[i / nf];
    if (!op) {
      err[i] = "power flow: " + op_error[i / nf];
      return;
    }
    try {
      const Trajectory tr = simulate_fault(*op, cfg.fault_buses[i % nf], cfg.t_clear,
                                           cfg.horizon, cfg.dt);
      labels[i] = stability_label(tr);
      feats[i] = extract_features(tr, op->solved);
    } catch (const NumericalError& e) {
      err[i] = e.what();
    } catch (const DataError& e) {
      err[i] = e.what();
    }
  });

  GeneratedData out;
  out.data.feature_names = feature_names();
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < total; ++i) {
    const ScenarioInfo info{cfg.load_levels[i / (nd * nf)], static_cast<int>((i / nf) % nd),
                            cfg.fault_buses[i % nf]};
    if (feats[i]) {
      ok.push_back(i);
      out.rows.push_back(info);
    } else {
      out.skipped.push_back({info, err[i]});
    }
  }
  if (ok.empty()) throw DataError("every scenario was infeasible");
  out.data.features.resize(static_cast<Eigen::Index>(ok.size()),
                           static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < ok.size(); ++r) {
    const auto& z = *feats[ok[r]];
    for (std::size_t j = 0; j < kFeatureCount; ++j)
      out.data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = z[j];
    out.data.labels.push_back(labels[ok[r]]);
  }
  return out;
}

std::string skipped_to_json(const std::vector<SkippedScenario>& skipped) {
  json j = json::array();
  for (const auto& s : skipped)
    j.push_back({{"load_level", s.scenario.load_level},
                 {"dispatch", s.scenario.dispatch},
                 {"fault_bus", s.scenario.fault_bus},
                 {"reason", s.reason}});
  return j.dump(2) + "\n";
}

}  // namespace tsa::powersim
