#include "execlab/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace execlab::hawkes {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

/// Exponential-kernel excitation that decays between updates.
struct Excitation {
  double level = 0.0;
  double at = 0.0;

  double value(double t, double k) const { return level * std::exp(-k * (t - at)); }
  /// Integral of the excitation over [at, t].
  double integral(double t, double k) const { return level * -std::expm1(-k * (t - at)) / k; }
  void advance(double t, double k) {
    level = value(t, k);
    at = t;
  }
};

}  // namespace

void HawkesParams::validate() const {
  require(std::isfinite(mu_bid) && std::isfinite(mu_ask) && mu_bid >= 0.0 && mu_ask >= 0.0,
          "baseline intensities must be nonnegative");
  require(mu_bid + mu_ask > 0.0, "at least one baseline intensity must be positive");
  require(std::isfinite(excitation) && excitation >= 0.0, "excitation must be nonnegative");
  require(std::isfinite(decay) && decay > 0.0, "decay must be positive");
  if (!allow_unstable) {
    require(branching_ratio() < 1.0, "unstable parameters: c/k = " + std::to_string(branching_ratio()) +
                                         " >= 1 (set allow_unstable to override)");
  }
}

std::pair<double, double> HawkesParams::stationary_intensity() const {
  // E L_a = mu_a + (c/k) E L_b and symmetrically.
  const double r = branching_ratio();
  const double det = 1.0 - r * r;
  return {(mu_bid + r * mu_ask) / det, (mu_ask + r * mu_bid) / det};
}

std::size_t EventStream::count(Side side) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [side](const Event& e) { return e.side == side; }));
}

EventStream simulate_hawkes(const HawkesParams& params, double horizon, std::uint64_t seed) {
  params.validate();
  require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double k = params.decay;

  EventStream stream;
  stream.horizon = horizon;
  double t = 0.0;
  double bid_excitation = 0.0;  // raised by ask trades
  double ask_excitation = 0.0;  // raised by bid trades
  while (true) {
    // Intensities only decay until the next event, so the current total bounds them.
    const double bound = params.mu_bid + params.mu_ask + bid_excitation + ask_excitation;
    const double dt = std::exponential_distribution<double>(bound)(rng);
    t += dt;
    if (t > horizon) break;
    const double decay = std::exp(-k * dt);
    bid_excitation *= decay;
    ask_excitation *= decay;
    const double bid_rate = params.mu_bid + bid_excitation;
    const double ask_rate = params.mu_ask + ask_excitation;
    const double u = unit(rng) * bound;
    if (u < bid_rate) {
      stream.events.push_back({t, Side::bid});
      ask_excitation += params.excitation;
    } else if (u < bid_rate + ask_rate) {
      stream.events.push_back({t, Side::ask});
      bid_excitation += params.excitation;
    }
  }
  return stream;
}

std::vector<double> time_rescaling_residuals(const EventStream& stream, const HawkesParams& params) {
  params.validate();
  const double k = params.decay;
  Excitation bid_exc, ask_exc;
  double bid_acc = 0.0, ask_acc = 0.0;  // compensator since the last same-side event
  double last = 0.0;
  std::vector<double> out;
  out.reserve(stream.events.size());
  for (const Event& e : stream.events) {
    const double dt = e.time - last;
    bid_acc += params.mu_bid * dt + bid_exc.integral(e.time, k);
    ask_acc += params.mu_ask * dt + ask_exc.integral(e.time, k);
    bid_exc.advance(e.time, k);
    ask_exc.advance(e.time, k);
    last = e.time;
    if (e.side == Side::bid) {
      out.push_back(bid_acc);
      bid_acc = 0.0;
      ask_exc.level += params.excitation;
    } else {
      out.push_back(ask_acc);
      ask_acc = 0.0;
      bid_exc.level += params.excitation;
    }
  }
  return out;
}

stats::KsResult time_rescaling_test(const EventStream& stream, const HawkesParams& params) {
  return stats::ks_exponential(time_rescaling_residuals(stream, params));
}

EventStream swap_sides(const EventStream& stream) {
  EventStream out = stream;
  for (Event& e : out.events) e.side = e.side == Side::bid ? Side::ask : Side::bid;
  return out;
}

namespace {

void bin_counts(const EventStream& stream, double width, std::size_t bins, std::vector<double>& bid,
                std::vector<double>& ask) {
  bid.assign(bins, 0.0);
  ask.assign(bins, 0.0);
  for (const Event& e : stream.events) {
    const auto i = static_cast<std::size_t>(e.time / width);
    if (i >= bins) continue;
    (e.side == Side::bid ? bid : ask)[i] += 1.0;
  }
}

}  // namespace

CorrelationCurve cross_correlation(const EventStream& stream, double bin_width, int max_lag, std::size_t min_events) {
  require(bin_width > 0.0 && max_lag >= 0, "need a positive bin width and a nonnegative lag count");
  require(stream.count(Side::bid) >= min_events && stream.count(Side::ask) >= min_events,
          "insufficient events for cross-correlation (need " + std::to_string(min_events) + " per side)");
  const auto bins = static_cast<std::size_t>(std::floor(stream.horizon / bin_width));
  require(bins > static_cast<std::size_t>(max_lag) + 2, "horizon too short for the requested lags");
  std::vector<double> bid, ask;
  bin_counts(stream, bin_width, bins, bid, ask);

  CorrelationCurve curve;
  curve.bins = bins;
  curve.noise_band = 4.0 / std::sqrt(static_cast<double>(bins));
  for (int lag = 0; lag <= max_lag; ++lag) {
    const std::size_t n = bins - static_cast<std::size_t>(lag);
    double mb = 0.0, ma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mb += bid[i];
      ma += ask[i + lag];
    }
    mb /= static_cast<double>(n);
    ma /= static_cast<double>(n);
    double sab = 0.0, sbb = 0.0, saa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double db = bid[i] - mb, da = ask[i + lag] - ma;
      sab += db * da;
      sbb += db * db;
      saa += da * da;
    }
    curve.lags.push_back(lag * bin_width);
    curve.correlation.push_back(sbb > 0.0 && saa > 0.0 ? sab / std::sqrt(sbb * saa) : 0.0);
  }
  return curve;
}

std::vector<double> geometric_scales(double smallest, double largest, int count) {
  require(smallest > 0.0 && largest > smallest && count >= 2, "need 0 < smallest < largest and count >= 2");
  std::vector<double> s(static_cast<std::size_t>(count));
  const double ratio = std::pow(largest / smallest, 1.0 / (count - 1));
  for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = smallest * std::pow(ratio, i);
  s.back() = largest;
  return s;
}

DiffusivityCurve diffusivity_check(const EventStream& stream, const std::vector<double>& scales,
                                   std::size_t min_events) {
  require(stream.events.size() >= min_events,
          "insufficient data for diffusivity check (need " + std::to_string(min_events) + " events)");
  require(scales.size() >= 2, "need at least two scales");
  DiffusivityCurve curve;
  for (double scale : scales) {
    require(scale > 0.0, "scales must be positive");
    const auto windows = static_cast<std::size_t>(std::floor(stream.horizon / scale));
    require(windows >= 10, "largest scale leaves fewer than 10 windows");
    std::vector<double> bid, ask;
    bin_counts(stream, scale, windows, bid, ask);
    std::vector<double> x(windows);
    for (std::size_t i = 0; i < windows; ++i) x[i] = ask[i] - bid[i];
    curve.scales.push_back(scale);
    curve.ratio.push_back(stats::variance(x) / scale);
  }
  const double last = curve.ratio.back();
  const double prev = curve.ratio[curve.ratio.size() - 2];
  curve.top_scale_change = std::abs(last - prev) / prev;
  curve.flat = curve.top_scale_change < 0.1;
  return curve;
}

PricePath queue_to_price(const QueueProcess& queues, bool constant_spread) {
  require(constant_spread, "queue depletions map to price moves only under a constant spread");
  PricePath out;
  long level = 0;
  auto emit = [&](double t, int tick) {
    level += tick;
    out.times.push_back(t);
    out.ticks.push_back(tick);
    out.level.push_back(level);
    (tick > 0 ? out.up_ticks : out.down_ticks) += 1;
  };
  for (std::size_t i = 0; i < queues.path.size(); ++i) {
    const QueueState& q = queues.path[i];
    require(q.bid >= 0.0 && q.ask >= 0.0, "queue sizes must be nonnegative");
    if (i > 0) require(q.time >= queues.path[i - 1].time, "queue samples must be time ordered");
    const bool bid_hit = q.bid == 0.0 && (i == 0 || queues.path[i - 1].bid > 0.0);
    const bool ask_hit = q.ask == 0.0 && (i == 0 || queues.path[i - 1].ask > 0.0);
    if (i == 0) continue;  // initial emptiness is not a crossing
    if (bid_hit) emit(q.time, -1);
    if (ask_hit) emit(q.time, +1);
  }
  return out;
}

QueueProcess drive_queues(const EventStream& stream, const QueueDrive& drive, RefillRule refill) {
  require(drive.initial_bid > 0.0 && drive.initial_ask > 0.0, "initial queues must be positive");
  require(drive.consumed_per_event > 0.0, "consumed quantity per event must be positive");
  if (!refill) {
    refill = [&drive](Side side, double) { return side == Side::bid ? drive.initial_bid : drive.initial_ask; };
  }
  QueueProcess out;
  QueueState q{0.0, drive.initial_bid, drive.initial_ask};
  out.path.push_back(q);
  for (const Event& e : stream.events) {
    double& queue = e.side == Side::bid ? q.bid : q.ask;
    q.time = e.time;
    queue = std::max(0.0, queue - drive.consumed_per_event);
    out.path.push_back(q);
    if (queue == 0.0) {
      queue = refill(e.side, e.time);
      require(queue > 0.0, "refill rule must return a positive queue");
      out.path.push_back(q);
    }
  }
  return out;
}

}  // namespace execlab::hawkes
