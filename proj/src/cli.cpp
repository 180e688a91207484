#include "execlab/cli.hpp"

#include "execlab/flashcrash.hpp"
#include "execlab/hawkes.hpp"
#include "execlab/market_data.hpp"
#include "execlab/orderbook_pde.hpp"
#include "execlab/random.hpp"
#include "execlab/scheduler.hpp"
#include "execlab/sor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#ifndef EXECLAB_VERSION
#define EXECLAB_VERSION "dev"
#endif

namespace execlab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace {

constexpr std::array<const char*, 6> kSubcommands = {"schedule", "sor", "flashcrash", "bookpde", "hawkes", "profile"};

// ---------------------------------------------------------------------------
// Strict JSON field access

class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw UsageError(where_ + ": missing field '" + key + "'");
    return convert<T>(j_.at(key), key);
  }

  const json& raw(const std::string& key) {
    if (!has(key)) throw UsageError(where_ + ": missing field '" + key + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  /// Rejects any key that was never looked up.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw UsageError(where_ + ": unknown field '" + key + "'");
    }
  }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("not a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("not an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && v.get<long long>() < 0) throw std::invalid_argument("negative");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("not a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("not a string");
      }
      return v.get<T>();
    } catch (const std::exception& e) {
      throw UsageError(where_ + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Eigen::VectorXd to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw UsageError(where + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw UsageError(where + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json to_json(const std::vector<double>& v) { return json(v); }

std::string hex64(std::uint64_t h) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << h;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Run context and artifacts

struct Context {
  std::string subcommand;
  std::uint64_t seed = kDefaultSeed;
  std::string format = "csv";
  fs::path out_dir = ".";
  std::vector<std::string> outputs;

  std::uint64_t component_seed(const std::string& name) const { return derive_seed(seed, name); }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir);
    const fs::path target = out_dir / name;
    const fs::path tmp = out_dir / (name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      f << content;
      if (!f) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, target);
    outputs.push_back(name);
  }

  /// Writes a table as CSV or, with --format json, as a JSON object of columns.
  void write_table(const std::string& stem, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows) {
    if (format == "json") {
      json cols = json::object();
      for (std::size_t c = 0; c < header.size(); ++c) {
        json col = json::array();
        for (const auto& r : rows) col.push_back(r[c]);
        cols[header[c]] = std::move(col);
      }
      write(stem + ".json", cols.dump(2) + "\n");
      return;
    }
    std::string s;
    for (std::size_t c = 0; c < header.size(); ++c) s += (c ? "," : "") + header[c];
    s += "\n";
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) s += ",";
        s += format_number(r[c]);
      }
      s += "\n";
    }
    write(stem + ".csv", s);
  }
};

// ---------------------------------------------------------------------------
// Common settings shared by every subcommand

void read_common(Fields& f, Context& ctx) {
  ctx.seed = f.get<std::uint64_t>("seed", kDefaultSeed);
  ctx.format = f.get<std::string>("format", "csv");
  if (ctx.format != "csv" && ctx.format != "json") throw UsageError("format must be csv or json");
  if (f.has("out")) ctx.out_dir = f.get<std::string>("out", ".");
}

json common_json(const Context& ctx) { return json{{"seed", ctx.seed}, {"format", ctx.format}}; }

// ---------------------------------------------------------------------------
// schedule

struct ScheduleConfig {
  scheduler::ExecutionProblem problem;
  scheduler::Criterion criterion = scheduler::Criterion::expectation;
  bool greeks = false;
  bool nonnegative = false;
};

scheduler::ExecutionProblem flat_riskless_preset(Eigen::Index n, double total) {
  scheduler::ExecutionProblem p;
  p.total_quantity = total;
  p.profile = market_data::SlicedMarketProfile::deterministic(Eigen::VectorXd::Constant(n, 1000.0),
                                                              Eigen::VectorXd::Constant(n, 0.02),
                                                              Eigen::VectorXd::Constant(n, 0.01));
  p.impact = {0.0, 1.0, 1.0, 0.0};
  p.signal = scheduler::ArbitrageSignal::zero(n);
  p.risk_aversion = 0.0;
  p.initial_price = 100.0;
  return p;
}

ScheduleConfig parse_schedule(Fields& f) {
  ScheduleConfig c;
  c.criterion = scheduler::parse_criterion(f.get<std::string>("criterion", "expectation"));
  c.greeks = f.get<bool>("greeks", false);
  c.nonnegative = f.get<bool>("nonnegative", false);
  if (f.has("preset")) {
    const auto preset = f.get<std::string>("preset", "");
    if (preset != "flat_riskless") throw UsageError("unknown schedule preset '" + preset + "'");
    c.problem = flat_riskless_preset(f.get<int>("slices", 10), f.get<double>("total_quantity", 1000.0));
    if (f.has("risk_aversion")) c.problem.risk_aversion = f.get<double>("risk_aversion", 0.0);
    return c;
  }
  auto& p = c.problem;
  p.total_quantity = f.require<double>("total_quantity");
  p.initial_price = f.get<double>("initial_price", 0.0);
  p.risk_aversion = f.get<double>("risk_aversion", 0.0);

  Fields im(f.raw("impact"), f.path("impact"));
  p.impact.a = im.get<double>("a", 0.0);
  p.impact.kappa = im.require<double>("kappa");
  p.impact.gamma = im.get<double>("gamma", 1.0);
  p.impact.var_noise = im.get<double>("var_noise", 0.0);
  im.finish();

  Fields pr(f.raw("profile"), f.path("profile"));
  const Eigen::VectorXd volume = to_vector(pr.raw("expected_volume"), pr.path("expected_volume"));
  const Eigen::VectorXd sigma = to_vector(pr.raw("volatility"), pr.path("volatility"));
  const Eigen::VectorXd psi = pr.has("half_spread") ? to_vector(pr.raw("half_spread"), pr.path("half_spread"))
                                                    : Eigen::VectorXd::Zero(volume.size());
  if (sigma.size() != volume.size() || psi.size() != volume.size()) {
    throw UsageError("profile arrays must have equal lengths");
  }
  p.profile.expected_volume = volume;
  p.profile.volatility = sigma;
  p.profile.half_spread = psi;
  p.profile.mean_ratio = pr.has("mean_ratio") ? to_vector(pr.raw("mean_ratio"), pr.path("mean_ratio"))
                                              : Eigen::VectorXd(sigma.cwiseQuotient(volume));
  p.profile.var_ratio = pr.has("var_ratio") ? to_vector(pr.raw("var_ratio"), pr.path("var_ratio"))
                                            : Eigen::VectorXd::Zero(volume.size());
  p.profile.var_half_spread = pr.has("var_half_spread")
                                  ? to_vector(pr.raw("var_half_spread"), pr.path("var_half_spread"))
                                  : Eigen::VectorXd::Zero(volume.size());
  pr.finish();

  p.signal = scheduler::ArbitrageSignal::zero(volume.size());
  if (f.has("signal")) {
    Fields sg(f.raw("signal"), f.path("signal"));
    if (sg.has("mean")) p.signal.mean = to_vector(sg.raw("mean"), sg.path("mean"));
    if (sg.has("variance")) p.signal.variance = to_vector(sg.raw("variance"), sg.path("variance"));
    sg.finish();
  }
  return c;
}

json schedule_json(const ScheduleConfig& c) {
  const auto& p = c.problem;
  return json{{"criterion", scheduler::to_string(c.criterion)},
              {"greeks", c.greeks},
              {"nonnegative", c.nonnegative},
              {"total_quantity", p.total_quantity},
              {"initial_price", p.initial_price},
              {"risk_aversion", p.risk_aversion},
              {"impact",
               {{"a", p.impact.a}, {"kappa", p.impact.kappa}, {"gamma", p.impact.gamma}, {"var_noise", p.impact.var_noise}}},
              {"profile",
               {{"expected_volume", to_json(p.profile.expected_volume)},
                {"volatility", to_json(p.profile.volatility)},
                {"half_spread", to_json(p.profile.half_spread)},
                {"mean_ratio", to_json(p.profile.mean_ratio)},
                {"var_ratio", to_json(p.profile.var_ratio)},
                {"var_half_spread", to_json(p.profile.var_half_spread)}}},
              {"signal", {{"mean", to_json(p.signal.mean)}, {"variance", to_json(p.signal.variance)}}}};
}

void run_schedule(const ScheduleConfig& c, Context& ctx) {
  using namespace scheduler;
  const auto& problem = c.problem;
  problem.validate();
  json diag = json::object();
  Trajectory traj;
  if (!c.nonnegative && problem.impact.gamma == 1.0 && c.criterion == Criterion::statistical) {
    const SolveReport r = solve_statistical_report(problem);
    traj = r.trajectory;
    diag["gradient_norm"] = r.gradient_norm;
    diag["iterations"] = r.iterations;
  } else {
    traj = solve(c.criterion, problem, c.nonnegative);
  }
  if (problem.impact.gamma == 1.0 && c.criterion == Criterion::mean_variance && !c.nonnegative) {
    diag["recurrence_residual"] = mv_recurrence_residual(traj, problem);
  }

  const Eigen::VectorXd v = traj.volumes();
  std::vector<std::vector<double>> rows;
  for (Eigen::Index n = 0; n < traj.n_slices(); ++n) {
    rows.push_back({static_cast<double>(n), traj.remaining()(n), v(n)});
  }
  ctx.write_table("trajectory", {"slice", "remaining", "volume"}, rows);

  json summary{{"criterion", to_string(c.criterion)},
               {"remaining", to_json(traj.remaining())},
               {"volumes", to_json(v)},
               {"objective", cost(c.criterion, traj, problem)},
               {"costs", json::object()},
               {"diagnostics", diag}};
  summary["costs"]["expectation"] = expected_cost(traj, problem);
  summary["costs"]["mv"] = mv_cost(traj, problem);
  if (problem.impact.gamma == 1.0) {
    summary["costs"]["statistical"] = statistical_cost(traj, problem);
    if ((problem.profile.volatility.array() > 0.0).all()) {
      summary["impact_weights"] = to_json(impact_weights(problem.profile));
    }
  }
  if (c.greeks) {
    const Greeks g = greeks(problem);
    summary["greeks"] = {{"psi", to_json(g.psi)},
                         {"phi", g.phi},
                         {"lambda", g.lambda},
                         {"optimal_cost", g.optimal_cost},
                         {"phi_method", Greeks::phi_method}};
  }
  ctx.write("schedule.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// sor

struct SorConfig {
  std::vector<sor::VenueSpec> venues;
  sor::QuantityLaw order_size = sor::QuantityLaw::constant(20.0);
  sor::LearnerConfig learner;
  std::size_t balance_samples = 10000;
  std::size_t criterion_samples = 10000;
};

sor::QuantityLaw parse_law(const json& j, const std::string& where) {
  if (j.is_number()) return sor::QuantityLaw::constant(j.get<double>());
  Fields f(j, where);
  const auto kind = f.require<std::string>("kind");
  sor::QuantityLaw law;
  if (kind == "constant") {
    law = sor::QuantityLaw::constant(f.require<double>("value"));
  } else if (kind == "geometric") {
    law = sor::QuantityLaw::geometric(f.require<double>("p"), f.get<double>("offset", 0.0));
  } else if (kind == "uniform") {
    law = sor::QuantityLaw::uniform(f.require<std::int64_t>("low"), f.require<std::int64_t>("high"));
  } else {
    throw UsageError(where + ": unknown law kind '" + kind + "'");
  }
  f.finish();
  law.validate(where.c_str());
  return law;
}

json law_json(const sor::QuantityLaw& law) {
  switch (law.kind) {
    case sor::QuantityLaw::Kind::constant: return json{{"kind", "constant"}, {"value", law.value}};
    case sor::QuantityLaw::Kind::geometric: return json{{"kind", "geometric"}, {"p", law.p}, {"offset", law.offset}};
    case sor::QuantityLaw::Kind::uniform: return json{{"kind", "uniform"}, {"low", law.low}, {"high", law.high}};
  }
  return {};
}

SorConfig parse_sor(Fields& f) {
  SorConfig c;
  const json& venues = f.raw("venues");
  if (!venues.is_array() || venues.empty()) throw UsageError("sor: 'venues' must be a non-empty array");
  for (std::size_t i = 0; i < venues.size(); ++i) {
    const std::string where = "venues[" + std::to_string(i) + "]";
    Fields v(venues[i], where);
    sor::VenueSpec spec;
    spec.intensity = v.require<double>("intensity");
    if (v.has("queue_law")) spec.queue_law = parse_law(v.raw("queue_law"), where + ".queue_law");
    if (v.has("event_size")) spec.event_size_law = parse_law(v.raw("event_size"), where + ".event_size");
    v.finish();
    spec.validate();
    c.venues.push_back(spec);
  }
  if (f.has("order_size")) c.order_size = parse_law(f.raw("order_size"), "order_size");
  c.learner.iterations = f.get<std::size_t>("iters", 100000);
  c.learner.gamma0 = f.get<double>("gamma0", 0.1);
  c.learner.beta = f.get<double>("beta", 1.0);
  c.learner.arrival_rate = f.get<double>("arrival_rate", 1.0);
  const auto signal = f.get<std::string>("signal", "completion_jump");
  if (signal == "completion_jump") {
    c.learner.signal = sor::LearnerSignal::completion_jump;
  } else if (signal == "marginal_time") {
    c.learner.signal = sor::LearnerSignal::marginal_time;
  } else {
    throw UsageError("sor: signal must be completion_jump or marginal_time");
  }
  c.balance_samples = f.get<std::size_t>("balance_samples", 10000);
  c.criterion_samples = f.get<std::size_t>("criterion_samples", 10000);
  c.learner.validate();
  return c;
}

json sor_json(const SorConfig& c) {
  json venues = json::array();
  for (const auto& v : c.venues) {
    venues.push_back({{"intensity", v.intensity},
                      {"queue_law", law_json(v.queue_law)},
                      {"event_size", law_json(v.event_size_law)}});
  }
  return json{{"venues", venues},
              {"order_size", law_json(c.order_size)},
              {"iters", c.learner.iterations},
              {"gamma0", c.learner.gamma0},
              {"beta", c.learner.beta},
              {"arrival_rate", c.learner.arrival_rate},
              {"signal", c.learner.signal == sor::LearnerSignal::completion_jump ? "completion_jump" : "marginal_time"},
              {"balance_samples", c.balance_samples},
              {"criterion_samples", c.criterion_samples}};
}

void run_sor_command(SorConfig c, Context& ctx) {
  c.learner.seed = ctx.component_seed("sor");
  const sor::SorRun run = sor::run_sor(c.venues, c.order_size, c.learner);

  std::vector<std::string> header{"iter"};
  for (std::size_t k = 1; k <= c.venues.size(); ++k) header.push_back("r_" + std::to_string(k));
  std::vector<std::vector<double>> rows;
  rows.reserve(run.path.size());
  for (std::size_t i = 0; i < run.path.size(); ++i) {
    std::vector<double> r{static_cast<double>(i)};
    for (double w : run.path[i]) r.push_back(w);
    rows.push_back(std::move(r));
  }
  ctx.write_table("sor_path", header, rows);

  const std::uint64_t diag_seed = ctx.component_seed("sor.diagnostics");
  const auto balance = sor::balance_diagnostics(run.final_key, c.venues, c.order_size, c.balance_samples, diag_seed,
                                                 c.learner.signal);
  const auto at_final = sor::criterion(run.final_key, c.venues, c.order_size, c.criterion_samples, diag_seed);
  const auto at_uniform = sor::criterion(sor::AllocationKey::uniform(static_cast<Eigen::Index>(c.venues.size())),
                                         c.venues, c.order_size, c.criterion_samples, diag_seed);
  json summary{{"final_key", to_json(run.final_key.weights())},
               {"iterations", c.learner.iterations},
               {"balance",
                {{"mean", to_json(balance.mean)}, {"std_error", to_json(balance.std_error)}, {"max_z", balance.max_z}}},
               {"criterion",
                {{"final", {{"mean", at_final.mean}, {"std_error", at_final.std_error}}},
                 {"uniform", {{"mean", at_uniform.mean}, {"std_error", at_uniform.std_error}}}}}};
  ctx.write("sor_summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// flashcrash

flashcrash::CrashParams parse_flashcrash(Fields& f) {
  flashcrash::CrashParams p;
  p.daily_volume = f.get<double>("daily_volume", 100.0);
  p.n_slices = f.get<int>("slices", 10);
  p.participation = f.get<double>("participation", 0.08);
  if (f.has("initial_participation")) p.initial_participation = f.get<double>("initial_participation", 0.0);
  if (f.has("echo_factor")) p.echo_factor = f.get<double>("echo_factor", 0.0);
  if (f.has("pass_through")) p.pass_through = f.get<double>("pass_through", 1.0);
  p.hot_potato_rounds = f.get<int>("rounds", 1);
  if (!p.echo_factor && !p.pass_through) p.echo_factor = 2.0;
  p.validate();
  return p;
}

json flashcrash_json(const flashcrash::CrashParams& p) {
  json j{{"daily_volume", p.daily_volume},
         {"slices", p.n_slices},
         {"participation", p.participation},
         {"rounds", p.hot_potato_rounds}};
  if (p.initial_participation) j["initial_participation"] = *p.initial_participation;
  if (p.echo_factor) j["echo_factor"] = *p.echo_factor;
  if (p.pass_through) j["pass_through"] = *p.pass_through;
  return j;
}

void run_flashcrash(const flashcrash::CrashParams& p, Context& ctx) {
  const auto path = flashcrash::simulate_crash(p);
  std::vector<std::vector<double>> rows;
  for (Eigen::Index t = 0; t < path.algo_volume.size(); ++t) {
    rows.push_back({static_cast<double>(t), path.algo_volume(t), path.echo_volume(t), path.total_volume(t)});
  }
  ctx.write_table("flashcrash", {"slice", "algo_volume", "echo_volume", "total_volume"}, rows);
  json summary{{"growth_factor", path.growth_factor},
               {"explosive", path.explosive},
               {"feedback", p.feedback()},
               {"final_over_initial", path.algo_volume(path.algo_volume.size() - 1) / path.algo_volume(0)}};
  ctx.write("flashcrash_summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// bookpde

struct BookConfig {
  double p_min = 0.0, p_max = 1.0;
  long points = 200;
  double dt = 1e-5;
  double eps = 0.1;
  double offset = 0.05;
  long steps = 1000;
  double trend_h = 0.0;
  std::string preset = "gaussian_flank";
  double centre = 0.5, width = 0.1, bid_weight = 1.0, ask_weight = 1.0, slope = 1.0;
  std::string deposit = "nearest";
  long snapshot_every = 0;
};

BookConfig parse_book(Fields& f) {
  BookConfig c;
  c.p_min = f.get<double>("pmin", c.p_min);
  c.p_max = f.get<double>("pmax", c.p_max);
  c.points = f.get<long>("points", c.points);
  c.dt = f.get<double>("dt", c.dt);
  c.eps = f.get<double>("eps", c.eps);
  c.offset = f.get<double>("offset", c.offset);
  c.steps = f.get<long>("steps", c.steps);
  c.trend_h = f.get<double>("trend_h", c.trend_h);
  c.preset = f.get<std::string>("preset", c.preset);
  c.centre = f.get<double>("centre", 0.5 * (c.p_min + c.p_max));
  c.width = f.get<double>("width", 0.1 * (c.p_max - c.p_min));
  c.bid_weight = f.get<double>("bid_weight", c.bid_weight);
  c.ask_weight = f.get<double>("ask_weight", c.ask_weight);
  c.slope = f.get<double>("slope", c.slope);
  c.deposit = f.get<std::string>("deposit", c.deposit);
  c.snapshot_every = f.get<long>("snapshot_every", c.snapshot_every);
  if (c.preset != "gaussian_flank" && c.preset != "linear_ramp") {
    throw UsageError("unknown book preset '" + c.preset + "' (expected gaussian_flank|linear_ramp)");
  }
  if (c.deposit != "nearest" && c.deposit != "linear") throw UsageError("deposit must be nearest or linear");
  if (c.steps < 0 || c.snapshot_every < 0) throw UsageError("steps and snapshot_every must be nonnegative");
  return c;
}

json book_json(const BookConfig& c) {
  return json{{"pmin", c.p_min},       {"pmax", c.p_max},     {"points", c.points},
              {"dt", c.dt},            {"eps", c.eps},        {"offset", c.offset},
              {"steps", c.steps},      {"trend_h", c.trend_h}, {"preset", c.preset},
              {"centre", c.centre},    {"width", c.width},    {"bid_weight", c.bid_weight},
              {"ask_weight", c.ask_weight}, {"slope", c.slope}, {"deposit", c.deposit},
              {"snapshot_every", c.snapshot_every}};
}

void run_bookpde(const BookConfig& c, Context& ctx) {
  const book::BookGrid grid(c.p_min, c.p_max, c.points, c.dt, 0.5 * c.eps * c.eps, c.offset);
  Eigen::VectorXd m0 = c.preset == "linear_ramp" ? book::linear_ramp(grid, c.centre, c.slope)
                                                 : book::gaussian_flank(grid, c.centre, c.width, c.bid_weight,
                                                                        c.ask_weight);
  const book::BookState initial = book::make_state(std::move(m0), grid);
  book::TrendFollowerSource source;
  source.enabled = c.trend_h > 0.0;
  source.horizon = c.trend_h;
  book::StepOptions opt;
  opt.deposit = c.deposit == "linear" ? book::Deposit::linear_hat : book::Deposit::nearest_node;
  const book::BookRun run = book::run_book(initial, grid, source, c.steps, opt, c.snapshot_every);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    rows.push_back({run.times[i], run.trading_price[i], run.realized_price[i]});
  }
  ctx.write_table("book_price", {"t", "p_star", "realized_price"}, rows);

  if (c.snapshot_every > 0) {
    std::vector<std::string> header{"step"};
    for (Eigen::Index i = 0; i < grid.size(); ++i) header.push_back("p_" + format_number(grid.node(i)));
    std::vector<std::vector<double>> snap;
    for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
      std::vector<double> r{static_cast<double>(s * static_cast<std::size_t>(c.snapshot_every))};
      for (double x : run.snapshots[s]) r.push_back(x);
      snap.push_back(std::move(r));
    }
    ctx.write_table("book_density", header, snap);
  }
  const double abs0 = initial.absolute_mass(grid);
  json summary{{"final_trading_price", run.final_state.trading_price},
               {"initial_trading_price", initial.trading_price},
               {"cfl", grid.cfl()},
               {"dp", grid.dp()},
               {"signed_mass_initial", initial.signed_mass(grid)},
               {"signed_mass_final", run.final_state.signed_mass(grid)},
               {"mass_drift_relative", std::abs(run.final_state.signed_mass(grid) - initial.signed_mass(grid)) / abs0}};
  ctx.write("book_summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// hawkes

struct HawkesConfig {
  hawkes::HawkesParams params;
  double horizon = 10000.0;
  int scales = 8;
  double smallest_scale = 0.1;
  double largest_scale = 100.0;
};

HawkesConfig parse_hawkes(Fields& f) {
  HawkesConfig c;
  const double mu = f.get<double>("mu", 1.0);
  c.params.mu_bid = f.get<double>("mu_bid", mu);
  c.params.mu_ask = f.get<double>("mu_ask", mu);
  c.params.excitation = f.get<double>("c", 0.5);
  c.params.decay = f.get<double>("k", 1.0);
  c.params.allow_unstable = f.get<bool>("allow_unstable", false);
  c.horizon = f.get<double>("horizon", c.horizon);
  c.scales = f.get<int>("scales", c.scales);
  c.smallest_scale = f.get<double>("smallest_scale", c.smallest_scale);
  c.largest_scale = f.get<double>("largest_scale", c.largest_scale);
  c.params.validate();
  return c;
}

json hawkes_json(const HawkesConfig& c) {
  return json{{"mu_bid", c.params.mu_bid},
              {"mu_ask", c.params.mu_ask},
              {"c", c.params.excitation},
              {"k", c.params.decay},
              {"allow_unstable", c.params.allow_unstable},
              {"horizon", c.horizon},
              {"scales", c.scales},
              {"smallest_scale", c.smallest_scale},
              {"largest_scale", c.largest_scale}};
}

void run_hawkes(const HawkesConfig& c, Context& ctx) {
  const auto stream = hawkes::simulate_hawkes(c.params, c.horizon, ctx.component_seed("hawkes"));
  std::vector<std::vector<double>> rows;
  rows.reserve(stream.events.size());
  if (ctx.format == "json") {
    for (const auto& e : stream.events) rows.push_back({e.time, e.side == hawkes::Side::bid ? 0.0 : 1.0});
    ctx.write_table("hawkes_events", {"time", "side"}, rows);
  } else {
    std::string s = "time,side\n";
    for (const auto& e : stream.events) {
      s += format_number(e.time);
      s += e.side == hawkes::Side::bid ? ",bid\n" : ",ask\n";
    }
    ctx.write("hawkes_events.csv", s);
  }

  json summary{{"events", stream.events.size()},
               {"mean_intensity",
                {{"bid", static_cast<double>(stream.count(hawkes::Side::bid)) / c.horizon},
                 {"ask", static_cast<double>(stream.count(hawkes::Side::ask)) / c.horizon}}}};
  if (c.params.branching_ratio() < 1.0) {
    const auto [bid, ask] = c.params.stationary_intensity();
    summary["stationary_intensity"] = {{"bid", bid}, {"ask", ask}};
  }
  if (!stream.events.empty()) {
    const auto ks = hawkes::time_rescaling_test(stream, c.params);
    summary["time_rescaling_ks"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}};
  }
  try {
    const auto curve = hawkes::diffusivity_check(
        stream, hawkes::geometric_scales(c.smallest_scale, c.largest_scale, c.scales));
    summary["diffusivity"] = {{"scales", to_json(curve.scales)},
                              {"ratio", to_json(curve.ratio)},
                              {"top_scale_change", curve.top_scale_change},
                              {"flat", curve.flat}};
  } catch (const std::invalid_argument& e) {
    summary["diffusivity"] = {{"skipped", e.what()}};
  }
  ctx.write("hawkes_summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// profile

struct ProfileConfig {
  std::string input;
  std::optional<Eigen::VectorXd> shares;
};

ProfileConfig parse_profile(Fields& f) {
  ProfileConfig c;
  c.input = f.require<std::string>("input");
  if (f.has("shares")) c.shares = to_vector(f.raw("shares"), "shares");
  return c;
}

json profile_json(const ProfileConfig& c) {
  json j{{"input", c.input}};
  if (c.shares) j["shares"] = to_json(*c.shares);
  return j;
}

void run_profile(const ProfileConfig& c, Context& ctx) {
  std::ifstream in(c.input);
  if (!in) throw std::invalid_argument("cannot open input CSV '" + c.input + "'");
  const auto profile = market_data::estimate_profile(market_data::read_samples_csv(in));
  json out{{"expected_volume", to_json(profile.expected_volume)},
           {"volatility", to_json(profile.volatility)},
           {"half_spread", to_json(profile.half_spread)},
           {"mean_ratio", to_json(profile.mean_ratio)},
           {"var_ratio", to_json(profile.var_ratio)},
           {"var_half_spread", to_json(profile.var_half_spread)},
           {"ratio_gap", to_json(market_data::ratio_gap(profile))}};
  if (c.shares) {
    out["fragmentation_entropy"] = market_data::fragmentation_entropy(market_data::MarketShares(*c.shares));
  }
  ctx.write("profile.json", out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dispatch

const char* module_of(const std::string& subcommand) {
  if (subcommand == "schedule") return "scheduler";
  if (subcommand == "sor") return "sor";
  if (subcommand == "flashcrash") return "flashcrash";
  if (subcommand == "bookpde") return "orderbook_pde";
  if (subcommand == "hawkes") return "hawkes";
  if (subcommand == "profile") return "market_data";
  return "cli";
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& subcommand, const std::string& module,
                const std::string& message) {
  json e{{"error", kind}, {"message", message}};
  if (!subcommand.empty()) e["subcommand"] = subcommand;
  if (!module.empty()) e["module"] = module;
  err << e.dump() << "\n";
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
}

/// Flag overrides recorded by name; applied on top of the config document.
struct Overrides {
  std::vector<std::function<void(json&)>> apply;
};

template <typename T>
void add_override(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key,
                  const std::string& help) {
  auto value = std::make_shared<T>();
  auto* opt = app->add_option(flag, *value, help);
  ov.apply.push_back([opt, value, key](json& j) {
    if (opt->count() > 0) j[key] = *value;
  });
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::string subcommand;
  if (argc >= 2) {
    const std::string first = argv[1];
    if (!first.empty() && first[0] != '-') {
      bool known = false;
      for (const char* s : kSubcommands) known = known || first == s;
      if (!known) {
        emit_error(err, "usage", first, "cli", "unknown subcommand '" + first + "'");
        return usage_error;
      }
    }
  }

  CLI::App app{"execlab: optimal execution, smart order routing and order-flow toolkit", "execlab"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  Overrides ov;

  std::map<std::string, CLI::App*> subs;
  auto add_sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "JSON configuration document");
    auto* seed_opt = s->add_option("--seed", seed, "64-bit seed");
    ov.apply.push_back([seed_opt, &seed](json& j) {
      if (seed_opt->count() > 0) j["seed"] = seed;
    });
    s->add_option("--out", out_dir, "output directory (fallback: $EXECLAB_OUT, then .)");
    add_override<std::string>(s, ov, "--format", "format", "csv or json series output");
    subs[name] = s;
    return s;
  };

  auto* sched = add_sub("schedule", "optimal trade schedule for an execution problem");
  add_override<std::string>(sched, ov, "--criterion", "criterion", "expectation|mv|statistical");
  add_override<std::string>(sched, ov, "--preset", "preset", "built-in problem (flat_riskless)");
  {
    auto flag = std::make_shared<bool>(false);
    auto* opt = sched->add_flag("--greeks", *flag, "also compute trading Greeks");
    ov.apply.push_back([opt](json& j) {
      if (opt->count() > 0) j["greeks"] = true;
    });
    auto nn = std::make_shared<bool>(false);
    auto* nn_opt = sched->add_flag("--nonnegative", *nn, "forbid negative slice volumes");
    ov.apply.push_back([nn_opt](json& j) {
      if (nn_opt->count() > 0) j["nonnegative"] = true;
    });
  }

  auto* sor_cmd = add_sub("sor", "learn a smart-order-routing allocation key");
  add_override<std::size_t>(sor_cmd, ov, "--iters", "iters", "learner iterations");
  add_override<double>(sor_cmd, ov, "--gamma0", "gamma0", "step size scale");
  add_override<double>(sor_cmd, ov, "--beta", "beta", "step size exponent in (0.5, 1]");

  auto* crash = add_sub("flashcrash", "idealised hot-potato volume recursion");
  add_override<double>(crash, ov, "--daily-volume", "daily_volume", "expected daily volume");
  add_override<int>(crash, ov, "--slices", "slices", "number of slices");
  add_override<double>(crash, ov, "--participation", "participation", "participation rate in (0,1)");
  add_override<double>(crash, ov, "--initial-participation", "initial_participation", "participation of slice 0");
  add_override<double>(crash, ov, "--echo-factor", "echo_factor", "inter-slice feedback multiplier N");
  add_override<double>(crash, ov, "--pass-through", "pass_through", "fraction q not re-hedged per leg");
  add_override<int>(crash, ov, "--rounds", "rounds", "hot-potato rounds per slice");

  auto* bk = add_sub("bookpde", "mean-field order book simulation");
  add_override<double>(bk, ov, "--pmin", "pmin", "lower price bound");
  add_override<double>(bk, ov, "--pmax", "pmax", "upper price bound");
  add_override<long>(bk, ov, "--points", "points", "grid size");
  add_override<double>(bk, ov, "--dt", "dt", "time step");
  add_override<double>(bk, ov, "--eps", "eps", "diffusion epsilon (coefficient eps^2/2)");
  add_override<double>(bk, ov, "--offset", "offset", "reinjection offset a");
  add_override<long>(bk, ov, "--steps", "steps", "number of steps");
  add_override<double>(bk, ov, "--trend-h", "trend_h", "trend-follower horizon (0 disables)");
  add_override<std::string>(bk, ov, "--preset", "preset", "gaussian_flank|linear_ramp");
  add_override<long>(bk, ov, "--snapshot-every", "snapshot_every", "density snapshot period in steps");

  auto* hk = add_sub("hawkes", "coupled bid/ask Hawkes transactions");
  add_override<double>(hk, ov, "--mu", "mu", "baseline intensity (both sides)");
  add_override<double>(hk, ov, "--c", "c", "cross excitation");
  add_override<double>(hk, ov, "--k", "k", "kernel decay");
  add_override<double>(hk, ov, "--horizon", "horizon", "simulated time");

  auto* prof = add_sub("profile", "estimate an intraday profile from CSV");
  add_override<std::string>(prof, ov, "--input", "input", "CSV with day,slice,volume,volatility,half_spread");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return success;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return success;
  } catch (const CLI::ParseError& e) {
    for (const auto& [name, s] : subs) {
      if (s->parsed()) subcommand = name;
    }
    emit_error(err, "usage", subcommand, "cli", e.what());
    return usage_error;
  }
  for (const auto& [name, s] : subs) {
    if (s->parsed()) subcommand = name;
  }

  Context ctx;
  ctx.subcommand = subcommand;
  json manifest_config;
  try {
    json config = load_config(config_path);
    for (auto& f : ov.apply) f(config);
    Fields f(config, "config");
    read_common(f, ctx);
    if (!out_dir.empty()) {
      ctx.out_dir = out_dir;
    } else if (!f.has("out")) {
      if (const char* env = std::getenv("EXECLAB_OUT"); env && *env) ctx.out_dir = env;
    }

    std::function<void()> body;
    if (subcommand == "schedule") {
      auto c = std::make_shared<ScheduleConfig>(parse_schedule(f));
      manifest_config = schedule_json(*c);
      body = [c, &ctx] { run_schedule(*c, ctx); };
    } else if (subcommand == "sor") {
      auto c = std::make_shared<SorConfig>(parse_sor(f));
      manifest_config = sor_json(*c);
      body = [c, &ctx] { run_sor_command(*c, ctx); };
    } else if (subcommand == "flashcrash") {
      auto c = std::make_shared<flashcrash::CrashParams>(parse_flashcrash(f));
      manifest_config = flashcrash_json(*c);
      body = [c, &ctx] { run_flashcrash(*c, ctx); };
    } else if (subcommand == "bookpde") {
      auto c = std::make_shared<BookConfig>(parse_book(f));
      manifest_config = book_json(*c);
      body = [c, &ctx] { run_bookpde(*c, ctx); };
    } else if (subcommand == "hawkes") {
      auto c = std::make_shared<HawkesConfig>(parse_hawkes(f));
      manifest_config = hawkes_json(*c);
      body = [c, &ctx] { run_hawkes(*c, ctx); };
    } else {
      auto c = std::make_shared<ProfileConfig>(parse_profile(f));
      manifest_config = profile_json(*c);
      body = [c, &ctx] { run_profile(*c, ctx); };
    }
    f.finish();
    manifest_config.update(common_json(ctx));

    try {
      body();
    } catch (const std::invalid_argument& e) {
      emit_error(err, "invalid_parameters", subcommand, module_of(subcommand),
                 std::string(module_of(subcommand)) + ": " + e.what());
      return usage_error;
    } catch (const std::exception& e) {
      emit_error(err, "runtime", subcommand, module_of(subcommand),
                 std::string(module_of(subcommand)) + ": " + e.what());
      return runtime_error;
    }
  } catch (const UsageError& e) {
    emit_error(err, "usage", subcommand, "cli", e.what());
    return usage_error;
  } catch (const std::invalid_argument& e) {
    emit_error(err, "invalid_config", subcommand, module_of(subcommand),
               std::string(module_of(subcommand)) + ": " + e.what());
    return usage_error;
  } catch (const std::exception& e) {
    emit_error(err, "runtime", subcommand, module_of(subcommand), std::string(module_of(subcommand)) + ": " + e.what());
    return runtime_error;
  }

  const std::string canonical = manifest_config.dump();
  json manifest{{"tool", "execlab"},
                {"version", EXECLAB_VERSION},
                {"subcommand", subcommand},
                {"seed", ctx.seed},
                {"config_hash", hex64(fnv1a64(canonical))},
                {"config", manifest_config},
                {"outputs", ctx.outputs}};
  try {
    ctx.write("manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    emit_error(err, "runtime", subcommand, "cli", std::string("cli: ") + e.what());
    return runtime_error;
  }
  out << manifest.dump() << "\n";
  return success;
}

}  // namespace execlab::cli
