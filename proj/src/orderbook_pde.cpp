#include "execlab/orderbook_pde.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace execlab::book {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

struct Crossing {
  Eigen::Index bid = -1;  // last positive cell
  Eigen::Index ask = -1;  // first negative cell after it
};

std::optional<Crossing> find_crossing(const Eigen::VectorXd& m) {
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(m(i) > 0.0)) continue;
    Eigen::Index j = i + 1;
    while (j < n && m(j) == 0.0) ++j;
    if (j < n && m(j) < 0.0) return Crossing{i, j};
  }
  return std::nullopt;
}

void deposit(Eigen::VectorXd& m, const BookGrid& grid, double price, double amount, Deposit mode) {
  if (mode == Deposit::nearest_node) {
    m(grid.nearest(price)) += amount;
    return;
  }
  const double s = (price - grid.p_min()) / grid.dp() - 0.5;
  const double clamped = std::clamp(s, 0.0, static_cast<double>(grid.size() - 1));
  const auto lo = static_cast<Eigen::Index>(std::floor(clamped));
  const Eigen::Index hi = std::min(lo + 1, grid.size() - 1);
  const double frac = clamped - static_cast<double>(lo);
  m(lo) += (1.0 - frac) * amount;
  m(hi) += frac * amount;
}

double trend_shift(const BookState& state, const BookGrid& grid, const TrendFollowerSource& source) {
  if (!source.enabled) return 0.0;
  const auto lag = static_cast<std::size_t>(std::llround(source.horizon / grid.dt()));
  const auto& h = state.price_history;
  if (lag == 0 || h.size() <= lag) return 0.0;
  return h.back() - h[h.size() - 1 - lag];
}

}  // namespace

BookGrid::BookGrid(double p_min, double p_max, Eigen::Index n_points, double dt, double diffusion,
                   double reinjection_offset)
    : p_min_(p_min), p_max_(p_max), n_(n_points), dt_(dt), diffusion_(diffusion), offset_(reinjection_offset) {
  require(std::isfinite(p_min) && std::isfinite(p_max) && p_min < p_max, "need p_min < p_max");
  require(n_points >= 16, "grid needs at least 16 points");
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(diffusion > 0.0 && std::isfinite(diffusion), "diffusion must be positive");
  dp_ = (p_max - p_min) / static_cast<double>(n_points);
  require(cfl() <= 0.5, "CFL condition violated: (eps^2/2) dt / dp^2 = " + std::to_string(cfl()) + " > 0.5");
  require(reinjection_offset >= dp_, "reinjection offset must be at least one grid step");
}

Eigen::VectorXd BookGrid::nodes() const {
  Eigen::VectorXd p(n_);
  for (Eigen::Index i = 0; i < n_; ++i) p(i) = node(i);
  return p;
}

Eigen::Index BookGrid::nearest(double p) const noexcept {
  const double s = std::floor((p - p_min_) / dp_);
  return static_cast<Eigen::Index>(std::clamp(s, 0.0, static_cast<double>(n_ - 1)));
}

double locate_trading_price(const Eigen::VectorXd& density, const BookGrid& grid) {
  const auto c = find_crossing(density);
  if (!c) throw BookDepleted("order book has no bid/ask sign change", -1);
  const double pb = grid.node(c->bid), pa = grid.node(c->ask);
  const double mb = density(c->bid), ma = density(c->ask);
  return pb + (pa - pb) * mb / (mb - ma);
}

BookState make_state(Eigen::VectorXd density, const BookGrid& grid) {
  require(density.size() == grid.size(), "density length must match the grid");
  BookState s;
  s.trading_price = locate_trading_price(density, grid);
  s.density = std::move(density);
  s.price_history.push_back(s.trading_price);
  return s;
}

TradingFlow trading_flow(const BookState& state, const BookGrid& grid) {
  const auto c = find_crossing(state.density);
  if (!c) throw BookDepleted("order book has no bid/ask sign change", -1);
  const auto& m = state.density;
  const double d = grid.diffusion();
  const double dp = grid.dp();
  TradingFlow f;
  const bool has_bid = c->bid >= 1;
  const bool has_ask = c->ask + 1 < m.size();
  if (has_bid) f.bid_side = -d * (m(c->bid) - m(c->bid - 1)) / dp;
  if (has_ask) f.ask_side = -d * (m(c->ask + 1) - m(c->ask)) / dp;
  if (has_bid && has_ask) {
    f.value = 0.5 * (f.bid_side + f.ask_side);
    f.sides_agree = std::abs(f.bid_side - f.ask_side) <= 0.1 * std::max(std::abs(f.bid_side), std::abs(f.ask_side));
  } else {
    f.value = has_bid ? f.bid_side : f.ask_side;
    f.sides_agree = false;
  }
  return f;
}

std::pair<Eigen::Index, Eigen::Index> reinjection_nodes(const BookState& state, const BookGrid& grid,
                                                       const TrendFollowerSource& source) {
  const double centre = state.trading_price + trend_shift(state, grid, source);
  return {grid.nearest(centre - grid.reinjection_offset()), grid.nearest(centre + grid.reinjection_offset())};
}

void advance(BookState& state, const BookGrid& grid, const TrendFollowerSource& source, const StepOptions& options) {
  require(state.density.size() == grid.size(), "density length must match the grid");
  if (source.enabled) require(source.horizon > 0.0 && source.horizon >= grid.dt(), "trend horizon must be >= dt");
  const Eigen::VectorXd& m = state.density;
  const Eigen::Index n = m.size();
  const double r = grid.cfl();

  Eigen::VectorXd next(n);
  // Face fluxes; the two boundary faces carry none.
  next(0) = m(0) + r * (m(1) - m(0));
  for (Eigen::Index i = 1; i + 1 < n; ++i) next(i) = m(i) + r * (m(i + 1) - 2.0 * m(i) + m(i - 1));
  next(n - 1) = m(n - 1) + r * (m(n - 2) - m(n - 1));

  if (options.reinjection) {
    const double flow = trading_flow(state, grid).value;
    const double amount = flow * grid.dt() / grid.dp();
    const double centre = state.trading_price + trend_shift(state, grid, source);
    deposit(next, grid, centre - grid.reinjection_offset(), amount, options.deposit);
    deposit(next, grid, centre + grid.reinjection_offset(), -amount, options.deposit);
  }

  state.trading_price = locate_trading_price(next, grid);
  state.density = std::move(next);
  state.time += grid.dt();
  state.price_history.push_back(state.trading_price);
}

BookState step(const BookState& state, const BookGrid& grid, const TrendFollowerSource& source,
               const StepOptions& options) {
  BookState next = state;
  advance(next, grid, source, options);
  return next;
}

BookRun run_book(const BookState& initial, const BookGrid& grid, const TrendFollowerSource& source, long n_steps,
                 const StepOptions& options, long snapshot_every) {
  require(n_steps >= 0, "n_steps must be nonnegative");
  auto realized = [&](double p) {
    return grid.p_min() + std::round((p - grid.p_min()) / grid.dp()) * grid.dp();
  };
  BookRun run;
  run.final_state = initial;
  if (run.final_state.price_history.empty()) run.final_state.price_history.push_back(initial.trading_price);
  run.times.push_back(initial.time);
  run.trading_price.push_back(initial.trading_price);
  run.realized_price.push_back(realized(initial.trading_price));
  if (snapshot_every > 0) run.snapshots.push_back(initial.density);
  for (long s = 1; s <= n_steps; ++s) {
    try {
      advance(run.final_state, grid, source, options);
    } catch (const BookDepleted& e) {
      throw BookDepleted(std::string(e.what()) + " at step " + std::to_string(s), s);
    }
    run.times.push_back(run.final_state.time);
    run.trading_price.push_back(run.final_state.trading_price);
    run.realized_price.push_back(realized(run.final_state.trading_price));
    if (snapshot_every > 0 && s % snapshot_every == 0) run.snapshots.push_back(run.final_state.density);
  }
  return run;
}

Eigen::VectorXd linear_ramp(const BookGrid& grid, double centre, double slope) {
  return slope * (centre - grid.nodes().array());
}

Eigen::VectorXd gaussian_flank(const BookGrid& grid, double centre, double width, double bid_weight,
                               double ask_weight) {
  require(width > 0.0, "flank width must be positive");
  Eigen::VectorXd m(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i) - centre;
    const double w = x <= 0.0 ? bid_weight : ask_weight;
    m(i) = -w * x * std::exp(-x * x / (2.0 * width * width));
  }
  return m;
}

Eigen::VectorXd mirror(const Eigen::VectorXd& density) { return -density.reverse(); }

}  // namespace execlab::book
