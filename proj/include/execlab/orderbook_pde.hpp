#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace execlab::book {

/// Cell-centred price grid for the signed mean-field order book.
///
/// Cell i covers [p_min + i dp, p_min + (i+1) dp]; density values live at the
/// cell centres. Boundary faces carry zero flux (Neumann).
class BookGrid {
 public:
  BookGrid(double p_min, double p_max, Eigen::Index n_points, double dt, double diffusion, double reinjection_offset);

  double p_min() const noexcept { return p_min_; }
  double p_max() const noexcept { return p_max_; }
  Eigen::Index size() const noexcept { return n_; }
  double dp() const noexcept { return dp_; }
  double dt() const noexcept { return dt_; }
  /// epsilon^2 / 2.
  double diffusion() const noexcept { return diffusion_; }
  double reinjection_offset() const noexcept { return offset_; }
  double cfl() const noexcept { return diffusion_ * dt_ / (dp_ * dp_); }

  double node(Eigen::Index i) const noexcept { return p_min_ + (static_cast<double>(i) + 0.5) * dp_; }
  Eigen::VectorXd nodes() const;
  /// Index of the cell centre nearest to p, clamped to the grid.
  Eigen::Index nearest(double p) const noexcept;

 private:
  double p_min_, p_max_;
  Eigen::Index n_;
  double dp_, dt_, diffusion_, offset_;
};

enum class Deposit {
  nearest_node,  // Dirac mass on the single nearest cell
  linear_hat,    // split between the two bracketing cells
};

struct TrendFollowerSource {
  bool enabled = false;
  double horizon = 0.0;
};

struct StepOptions {
  bool reinjection = true;
  Deposit deposit = Deposit::nearest_node;
};

struct BookState {
  Eigen::VectorXd density;  // > 0 bid side, < 0 ask side
  double trading_price = 0.0;
  double time = 0.0;
  std::vector<double> price_history;  // p* after each step, history[0] = initial

  /// Signed mass integral m dp.
  double signed_mass(const BookGrid& grid) const { return density.sum() * grid.dp(); }
  double absolute_mass(const BookGrid& grid) const { return density.cwiseAbs().sum() * grid.dp(); }
};

/// The book has no bid/ask sign change left.
class BookDepleted : public std::runtime_error {
 public:
  BookDepleted(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Zero crossing of the density by linear interpolation between the last bid
/// cell and the first ask cell. Throws BookDepleted when there is none.
double locate_trading_price(const Eigen::VectorXd& density, const BookGrid& grid);

/// Builds a state from a density, locating p*.
BookState make_state(Eigen::VectorXd density, const BookGrid& grid);

struct TradingFlow {
  double value = 0.0;      // mean of the two one-sided estimates
  double bid_side = 0.0;   // -D dm/dp from the bid cells
  double ask_side = 0.0;   // -D dm/dp from the ask cells
  bool sides_agree = true;  // within 10%
};

/// Trading flow lambda(t) = -(eps^2/2) dm/dp at p*.
TradingFlow trading_flow(const BookState& state, const BookGrid& grid);

/// Reinjection cells (bid, ask) for the current state and source.
std::pair<Eigen::Index, Eigen::Index> reinjection_nodes(const BookState& state, const BookGrid& grid,
                                                       const TrendFollowerSource& source);

/// In-place form of `step`.
void advance(BookState& state, const BookGrid& grid, const TrendFollowerSource& source, const StepOptions& options = {});

/// One explicit step: diffusion with zero-flux faces plus the dipole reinjection.
BookState step(const BookState& state, const BookGrid& grid, const TrendFollowerSource& source,
               const StepOptions& options = {});

struct BookRun {
  BookState final_state;
  std::vector<double> times;
  std::vector<double> trading_price;   // interpolated zero crossing
  std::vector<double> realized_price;  // p* snapped to the last bid cell centre (stepwise)
  std::vector<Eigen::VectorXd> snapshots;
};

/// Iterates `step`; keeps a density snapshot every `snapshot_every` steps when > 0.
BookRun run_book(const BookState& initial, const BookGrid& grid, const TrendFollowerSource& source, long n_steps,
                 const StepOptions& options = {}, long snapshot_every = 0);

/// Preset m(p) = slope * (centre - p).
Eigen::VectorXd linear_ramp(const BookGrid& grid, double centre, double slope = 1.0);
/// Preset m(p) = w (centre - p) exp(-(p - centre)^2 / (2 width^2)), w = bid_weight below the centre and ask_weight above.
Eigen::VectorXd gaussian_flank(const BookGrid& grid, double centre, double width, double bid_weight = 1.0,
                               double ask_weight = 1.0);
/// Reflects the density about the grid centre and negates it.
Eigen::VectorXd mirror(const Eigen::VectorXd& density);

}  // namespace execlab::book
