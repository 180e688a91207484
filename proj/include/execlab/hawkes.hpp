#pragma once

#include "execlab/random.hpp"
#include "execlab/stats.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace execlab::hawkes {

enum class Side : std::uint8_t { bid, ask };

/// Mutually exciting transactions: each bid trade raises the ask intensity by
/// `excitation`, decaying at rate `decay`, and vice versa.
struct HawkesParams {
  double mu_bid = 1.0;
  double mu_ask = 1.0;
  double excitation = 0.0;  // c
  double decay = 1.0;       // k
  bool allow_unstable = false;

  double branching_ratio() const { return excitation / decay; }
  void validate() const;
  /// Stationary mean intensities (bid, ask); only meaningful when c/k < 1.
  std::pair<double, double> stationary_intensity() const;
};

struct Event {
  double time = 0.0;
  Side side = Side::bid;
};

struct EventStream {
  std::vector<Event> events;
  double horizon = 0.0;

  std::size_t count(Side side) const;
};

/// Ogata thinning with the exact conditional intensity.
EventStream simulate_hawkes(const HawkesParams& params, double horizon, std::uint64_t seed);

/// Compensator increments between consecutive same-side events, both sides
/// pooled. Unit exponential when the stream was generated by `params`.
std::vector<double> time_rescaling_residuals(const EventStream& stream, const HawkesParams& params);
stats::KsResult time_rescaling_test(const EventStream& stream, const HawkesParams& params);

/// Exchanges bid and ask labels.
EventStream swap_sides(const EventStream& stream);

struct CorrelationCurve {
  std::vector<double> lags;         // in time units, lag 0 first
  std::vector<double> correlation;  // corr(bid count in bin i, ask count in bin i + lag)
  double noise_band = 0.0;          // 4 / sqrt(bins)
  std::size_t bins = 0;
};

/// Binned lagged correlation of bid counts followed by ask counts.
/// Requires at least `min_events` events on each side.
CorrelationCurve cross_correlation(const EventStream& stream, double bin_width, int max_lag,
                                   std::size_t min_events = 1000);

struct DiffusivityCurve {
  std::vector<double> scales;
  std::vector<double> ratio;  // Var[X(t+D) - X(t)] / D for X = N^ask - N^bid
  double top_scale_change = 0.0;  // |r_last - r_prev| / r_prev
  bool flat = false;              // top_scale_change < 10%
};

std::vector<double> geometric_scales(double smallest, double largest, int count);

/// Variance-time curve of the signed transaction count over non-overlapping windows.
DiffusivityCurve diffusivity_check(const EventStream& stream, const std::vector<double>& scales,
                                   std::size_t min_events = 100000);

struct QueueState {
  double time = 0.0;
  double bid = 0.0;
  double ask = 0.0;
};

/// Best bid/ask queue sizes; piecewise constant between samples.
struct QueueProcess {
  std::vector<QueueState> path;
};

struct PricePath {
  std::vector<double> times;
  std::vector<int> ticks;  // +1 when the ask queue empties, -1 when the bid queue does
  std::vector<long> level;
  std::size_t up_ticks = 0;
  std::size_t down_ticks = 0;
};

/// Maps queue depletions to price moves. The mapping is exact only with a
/// constant bid-ask spread, so the caller must assert it. Simultaneous
/// depletions are emitted bid first.
PricePath queue_to_price(const QueueProcess& queues, bool constant_spread = true);

/// New queue size after depletion of `side` at `time`.
using RefillRule = std::function<double(Side side, double time)>;

struct QueueDrive {
  double initial_bid = 10.0;
  double initial_ask = 10.0;
  double consumed_per_event = 1.0;
};

/// Runs the queues down with the transactions of `stream`: bid trades consume
/// the bid queue and ask trades the ask queue. A depleted queue is recorded
/// at zero and then refilled by `refill` (default: back to its initial size).
QueueProcess drive_queues(const EventStream& stream, const QueueDrive& drive, RefillRule refill = {});

}  // namespace execlab::hawkes
