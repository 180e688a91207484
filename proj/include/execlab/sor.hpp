#pragma once

#include "execlab/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace execlab::sor {

/// Nonnegative integer-valued law used for queues, event sizes and order sizes.
struct QuantityLaw {
  enum class Kind { constant, geometric, uniform };

  Kind kind = Kind::constant;
  double value = 0.0;  // constant
  double p = 0.5;      // geometric success probability; support {0, 1, ...}, mean (1-p)/p
  std::int64_t low = 0, high = 0;  // uniform integer range, inclusive
  double offset = 0.0;             // added to every draw

  static QuantityLaw constant(double v) { return {Kind::constant, v, 0.5, 0, 0, 0.0}; }
  static QuantityLaw geometric(double p, double offset = 0.0) { return {Kind::geometric, 0.0, p, 0, 0, offset}; }
  static QuantityLaw uniform(std::int64_t lo, std::int64_t hi) { return {Kind::uniform, 0.0, 0.5, lo, hi, 0.0}; }

  double sample(Rng& rng) const;
  double mean() const;
  void validate(const char* what) const;
};

struct VenueSpec {
  double intensity = 1.0;
  QuantityLaw queue_law = QuantityLaw::constant(0.0);
  QuantityLaw event_size_law = QuantityLaw::constant(1.0);

  void validate() const;
};

/// Allocation weights on the simplex.
class AllocationKey {
 public:
  explicit AllocationKey(Eigen::VectorXd weights);
  static AllocationKey uniform(Eigen::Index k);

  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index k) const { return weights_(k); }

 private:
  Eigen::VectorXd weights_;
};

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y);

struct OrderFlow {
  std::vector<double> arrival_times;
  std::vector<double> sizes;
};

/// Arrival times from a Poisson clock of the given rate, sizes from the law.
OrderFlow generate_order_flow(std::size_t n, double arrival_rate, const QuantityLaw& size_law, Rng& rng);

/// Per-order signal fed to the learner for the slowest venue k*.
enum class LearnerSignal {
  /// V / (size of the completing event): the published update. With unit
  /// events its fixed point equalises P(k* = k) across venues, which is not
  /// the minimiser of the criterion when venue intensities differ.
  completion_jump,
  /// V * (gap to the next consuming event) / (its size): an unbiased
  /// per-share marginal waiting time, so the fixed point equalises
  /// E[V dDeltaT/dv 1{k* = k}], the criterion's own gradient.
  marginal_time,
};

struct LearnerConfig {
  double gamma0 = 0.1;
  double beta = 1.0;
  std::size_t iterations = 100000;
  std::uint64_t seed = kDefaultSeed;
  double arrival_rate = 1.0;
  LearnerSignal signal = LearnerSignal::completion_jump;

  double step(std::size_t n) const;
  void validate() const;
};

struct WaitingTime {
  double elapsed = 0.0;     // Delta T
  double last_jump = 0.0;   // Delta N at the completion instant (shares)
  double marginal_time = 0.0;  // time per share of the next event; only filled when probed
};

/// First passage of the venue's consumed quantity above I + v, with I freshly
/// sampled. With `probe_next` one further event is drawn to fill marginal_time.
WaitingTime simulate_waiting_time(const VenueSpec& venue, double v, Rng& rng, bool probe_next = false);

struct CriterionEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of E max_k Delta T^k(r^k V) over `samples` draws, with
/// orders split by split_order.
/// Draw i uses its own seed derived from (seed, i), and each venue within a
/// draw its own sub-stream, so estimates at different keys share randomness.
CriterionEstimate criterion(const AllocationKey& key, const std::vector<VenueSpec>& venues,
                            const QuantityLaw& order_size_law, std::size_t samples, std::uint64_t seed);

/// Outcome of routing one order across all venues.
/// Per-venue quantities r^k V. A whole-share order is split into whole shares
/// by largest remainder (ties to the lower index); fractional orders are split exactly.
Eigen::VectorXd split_order(const AllocationKey& key, double order_size);

struct RoutedOrder {
  std::vector<WaitingTime> waits;
  Eigen::Index slowest = 0;  // k*, lowest index on ties
  Eigen::VectorXd signal;    // V * D^k * 1{k* = k}
};

RoutedOrder route_order(const AllocationKey& key, double order_size, const std::vector<VenueSpec>& venues, Rng& rng,
                        LearnerSignal signal = LearnerSignal::completion_jump);

/// Mean-centred stochastic-approximation increment for a routed order (sums to zero).
Eigen::VectorXd learner_increment(const RoutedOrder& routed);

/// One step of the allocation learner with step gamma_n, followed by simplex projection.
AllocationKey learner_step(const AllocationKey& key, double order_size, const std::vector<VenueSpec>& venues,
                           const LearnerConfig& config, std::size_t n, Rng& rng);

struct SorRun {
  std::vector<Eigen::VectorXd> path;  // key after each iteration, path[0] is the initial key
  AllocationKey final_key = AllocationKey::uniform(1);  // tail average over the last 10% of iterations
};

SorRun run_sor(const std::vector<VenueSpec>& venues, const QuantityLaw& order_size_law, const LearnerConfig& config);

struct BalanceDiagnostics {
  Eigen::VectorXd mean;       // E[V D^k 1{k*=k}]
  Eigen::VectorXd std_error;
  double max_z = 0.0;         // largest pairwise |difference| / combined standard error
};

/// Empirical check that V D^k 1{k*=k} has equal means across venues at `key`.
BalanceDiagnostics balance_diagnostics(const AllocationKey& key, const std::vector<VenueSpec>& venues,
                                       const QuantityLaw& order_size_law, std::size_t samples, std::uint64_t seed,
                                       LearnerSignal signal = LearnerSignal::completion_jump);

}  // namespace execlab::sor
