#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "efhc/engine.hpp"

namespace efhc {

// Inclusive iteration range; values are indexed by k.
struct RateWindow {
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
};

// Second half of a trace of `length` rows, starting no earlier than k = 1.
RateWindow trailing_half(std::size_t length);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
  double residual_rms = 0.0;
};

// Least squares line through (ln k, ln v_k) for k in the window.
RateFit fit_rate(const std::vector<double>& values, RateWindow window);

// Median of the last ceil(tail_fraction * size) values.
double plateau_level(const std::vector<double>& values, double tail_fraction);

// prod_{r=s}^{k} (1 - zeta_r)^p <= 1 / (p * sum_{r=s}^{k} zeta_r).
bool bernoulli_bound_check(const std::vector<double>& zeta, double p, std::size_t s,
                           std::size_t k);

enum class TradeoffMetric { optimality_gap, mean_accuracy };

std::string metric_name(TradeoffMetric metric);
// Lower is better for the gap, higher for accuracy.
bool at_least_as_good(TradeoffMetric metric, double a, double b);

struct TradeoffInput {
  std::string policy;
  const MetricsTrace* trace = nullptr;
};

// best[p][t]: best metric policy p reached within transmission time time[t].
// The grid has `points` evenly spaced times on [0, T], T being the smallest
// final cumulative time among the inputs.
struct TradeoffTable {
  TradeoffMetric metric = TradeoffMetric::optimality_gap;
  std::vector<double> time;
  std::vector<std::string> policies;
  std::vector<std::vector<double>> best;
};

TradeoffTable tradeoff_table(const std::vector<TradeoffInput>& traces, TradeoffMetric metric,
                             int points = 50);

// Fraction of grid times where policy a is at least as good as policy b.
double matched_time_share(const TradeoffTable& table, std::size_t a, std::size_t b);

void write_tradeoff_csv(std::ostream& out, const TradeoffTable& table);

}  // namespace efhc
