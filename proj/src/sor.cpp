#include "execlab/sor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace execlab::sor {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

void require_venues(const AllocationKey& key, const std::vector<VenueSpec>& venues) {
  require(!venues.empty(), "at least one venue is required");
  require(key.size() == static_cast<Eigen::Index>(venues.size()), "allocation key and venue list differ in size");
  for (const auto& v : venues) v.validate();
}

}  // namespace

double QuantityLaw::sample(Rng& rng) const {
  switch (kind) {
    case Kind::constant: return value;
    case Kind::geometric: return offset + static_cast<double>(std::geometric_distribution<std::int64_t>(p)(rng));
    case Kind::uniform: return static_cast<double>(std::uniform_int_distribution<std::int64_t>(low, high)(rng));
  }
  return 0.0;
}

double QuantityLaw::mean() const {
  switch (kind) {
    case Kind::constant: return value;
    case Kind::geometric: return offset + (1.0 - p) / p;
    case Kind::uniform: return 0.5 * static_cast<double>(low + high);
  }
  return 0.0;
}

void QuantityLaw::validate(const char* what) const {
  switch (kind) {
    case Kind::constant: require(std::isfinite(value) && value >= 0.0, std::string(what) + ": constant must be >= 0"); break;
    case Kind::geometric:
      require(p > 0.0 && p <= 1.0, std::string(what) + ": geometric p must be in (0, 1]");
      require(offset >= 0.0, std::string(what) + ": offset must be >= 0");
      break;
    case Kind::uniform: require(0 <= low && low <= high, std::string(what) + ": need 0 <= low <= high"); break;
  }
}

void VenueSpec::validate() const {
  require(std::isfinite(intensity) && intensity > 0.0, "venue intensity must be positive");
  queue_law.validate("queue_law");
  event_size_law.validate("event_size_law");
  require(event_size_law.mean() > 0.0, "event sizes must have a positive mean");
}

AllocationKey::AllocationKey(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  require(weights_.size() >= 1, "allocation key must be non-empty");
  require(weights_.allFinite() && (weights_.array() >= 0.0).all(), "allocation weights must be nonnegative");
  require(std::abs(weights_.sum() - 1.0) <= 1e-9, "allocation weights must sum to 1");
}

AllocationKey AllocationKey::uniform(Eigen::Index k) {
  return AllocationKey(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y) {
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd x = (y.array() - theta).max(0.0);
  return x / x.sum();
}

OrderFlow generate_order_flow(std::size_t n, double arrival_rate, const QuantityLaw& size_law, Rng& rng) {
  require(arrival_rate > 0.0, "arrival rate must be positive");
  std::exponential_distribution<double> gap(arrival_rate);
  OrderFlow flow;
  flow.arrival_times.reserve(n);
  flow.sizes.reserve(n);
  double t = 0.0;
  while (flow.sizes.size() < n) {
    const double size = size_law.sample(rng);
    if (size <= 0.0) continue;  // orders have positive size
    double dt = 0.0;
    while (dt <= 0.0) dt = gap(rng);
    t += dt;
    flow.arrival_times.push_back(t);
    flow.sizes.push_back(size);
  }
  return flow;
}

double LearnerConfig::step(std::size_t n) const {
  return gamma0 / std::pow(static_cast<double>(std::max<std::size_t>(n, 1)), beta);
}

void LearnerConfig::validate() const {
  require(std::isfinite(gamma0) && gamma0 >= 0.0, "gamma0 must be nonnegative");
  require(beta > 0.5 && beta <= 1.0, "beta must lie in (0.5, 1]");
  require(iterations >= 1, "iterations must be at least 1");
  require(arrival_rate > 0.0, "arrival rate must be positive");
}

WaitingTime simulate_waiting_time(const VenueSpec& venue, double v, Rng& rng, bool probe_next) {
  require(v >= 0.0, "quantity must be nonnegative");
  // r * V carries rounding error; 0.3 * 20 must not demand a seventh share.
  const double raw = venue.queue_law.sample(rng) + v;
  const double threshold = raw - 1e-9 * std::max(1.0, raw);
  WaitingTime w;
  if (threshold <= 0.0) return w;
  std::exponential_distribution<double> gap(venue.intensity);
  double consumed = 0.0;
  while (true) {
    w.elapsed += gap(rng);
    const double size = venue.event_size_law.sample(rng);
    consumed += size;
    if (size > 0.0 && consumed >= threshold) {
      w.last_jump = size;
      if (probe_next) {
        // Memoryless: the gap to the next consuming event prices one more share.
        double gap_next = gap(rng), next = venue.event_size_law.sample(rng);
        while (next <= 0.0) {
          gap_next += gap(rng);
          next = venue.event_size_law.sample(rng);
        }
        w.marginal_time = gap_next / next;
      }
      return w;
    }
  }
}

Eigen::VectorXd split_order(const AllocationKey& key, double order_size) {
  require(order_size >= 0.0, "order size must be nonnegative");
  Eigen::VectorXd exact = key.weights() * order_size;
  if (order_size != std::floor(order_size)) return exact;
  // Largest remainder; ties go to the lower venue index.
  Eigen::VectorXd shares = exact.array().floor();
  auto missing = static_cast<long>(std::lround(order_size - shares.sum()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(key.size()));
  for (Eigen::Index i = 0; i < key.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return exact(a) - shares(a) > exact(b) - shares(b);
  });
  for (std::size_t j = 0; missing > 0 && j < order.size(); ++j, --missing) shares(order[j]) += 1.0;
  return shares;
}

RoutedOrder route_order(const AllocationKey& key, double order_size, const std::vector<VenueSpec>& venues,
                        Rng& rng, LearnerSignal signal) {
  const Eigen::Index k = key.size();
  RoutedOrder r;
  r.waits.reserve(static_cast<std::size_t>(k));
  const bool probe = signal == LearnerSignal::marginal_time;
  const Eigen::VectorXd shares = split_order(key, order_size);
  for (Eigen::Index i = 0; i < k; ++i) r.waits.push_back(simulate_waiting_time(venues[i], shares(i), rng, probe));
  for (Eigen::Index i = 1; i < k; ++i) {
    if (r.waits[i].elapsed > r.waits[r.slowest].elapsed) r.slowest = i;
  }
  r.signal = Eigen::VectorXd::Zero(k);
  const WaitingTime& w = r.waits[r.slowest];
  if (signal == LearnerSignal::completion_jump) {
    r.signal(r.slowest) = w.last_jump > 0.0 ? order_size / w.last_jump : 0.0;
  } else {
    r.signal(r.slowest) = order_size * w.marginal_time;
  }
  return r;
}

Eigen::VectorXd learner_increment(const RoutedOrder& routed) {
  return routed.signal.array() - routed.signal.mean();
}

CriterionEstimate criterion(const AllocationKey& key, const std::vector<VenueSpec>& venues,
                            const QuantityLaw& order_size_law, std::size_t samples, std::uint64_t seed) {
  require_venues(key, venues);
  require(samples >= 1, "criterion needs at least one sample");
  order_size_law.validate("order_size_law");
  std::vector<double> values(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    // One stream per (draw, venue): common random numbers across keys.
    const std::uint64_t draw_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(draw_seed);
    const Eigen::VectorXd shares = split_order(key, order_size_law.sample(rng));
    double worst = 0.0;
    for (std::size_t k = 0; k < venues.size(); ++k) {
      Rng venue_rng(derive_seed(draw_seed, static_cast<std::uint64_t>(k + 1)));
      worst = std::max(worst,
                       simulate_waiting_time(venues[k], shares(static_cast<Eigen::Index>(k)), venue_rng).elapsed);
    }
    values[i] = worst;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double m = sum / static_cast<double>(samples);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double var = samples > 1 ? ss / static_cast<double>(samples - 1) : 0.0;
  return {m, std::sqrt(var / static_cast<double>(samples))};
}

AllocationKey learner_step(const AllocationKey& key, double order_size, const std::vector<VenueSpec>& venues,
                           const LearnerConfig& config, std::size_t n, Rng& rng) {
  require_venues(key, venues);
  const RoutedOrder routed = route_order(key, order_size, venues, rng, config.signal);
  const double gamma = config.step(n);
  if (gamma == 0.0) return key;
  return AllocationKey(project_to_simplex(key.weights() - gamma * learner_increment(routed)));
}

SorRun run_sor(const std::vector<VenueSpec>& venues, const QuantityLaw& order_size_law, const LearnerConfig& config) {
  config.validate();
  order_size_law.validate("order_size_law");
  require(order_size_law.mean() > 0.0, "orders must have positive mean size");
  AllocationKey key = AllocationKey::uniform(static_cast<Eigen::Index>(venues.size()));
  require_venues(key, venues);

  Rng order_rng(derive_seed(config.seed, "sor.orders"));
  Rng venue_rng(derive_seed(config.seed, "sor.venues"));
  const OrderFlow flow = generate_order_flow(config.iterations, config.arrival_rate, order_size_law, order_rng);

  SorRun run;
  run.path.reserve(config.iterations + 1);
  run.path.push_back(key.weights());
  const std::size_t tail = std::max<std::size_t>(1, config.iterations / 10);
  Eigen::VectorXd tail_sum = Eigen::VectorXd::Zero(key.size());
  for (std::size_t n = 1; n <= config.iterations; ++n) {
    key = learner_step(key, flow.sizes[n - 1], venues, config, n, venue_rng);
    run.path.push_back(key.weights());
    if (n > config.iterations - tail) tail_sum += key.weights();
  }
  const Eigen::VectorXd avg = tail_sum / static_cast<double>(tail);
  run.final_key = AllocationKey(avg / avg.sum());
  return run;
}

BalanceDiagnostics balance_diagnostics(const AllocationKey& key, const std::vector<VenueSpec>& venues,
                                       const QuantityLaw& order_size_law, std::size_t samples, std::uint64_t seed,
                                       LearnerSignal signal) {
  require_venues(key, venues);
  require(samples >= 2, "balance diagnostics need at least two samples");
  const Eigen::Index k = key.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k), sum_sq = sum;
  for (std::size_t i = 0; i < samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    double size = 0.0;
    while (size <= 0.0) size = order_size_law.sample(rng);
    const RoutedOrder routed = route_order(key, size, venues, rng, signal);
    sum += routed.signal;
    sum_sq += routed.signal.cwiseAbs2();
  }
  const double m = static_cast<double>(samples);
  BalanceDiagnostics d;
  d.mean = sum / m;
  const Eigen::VectorXd var = ((sum_sq / m - d.mean.cwiseAbs2()) * (m / (m - 1.0))).cwiseMax(0.0);
  d.std_error = (var / m).cwiseSqrt();
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double se = std::hypot(d.std_error(a), d.std_error(b));
      const double diff = std::abs(d.mean(a) - d.mean(b));
      d.max_z = std::max(d.max_z, se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0));
    }
  }
  return d;
}

}  // namespace execlab::sor
