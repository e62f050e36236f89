#include "efhc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "efhc/error.hpp"

namespace efhc {

RateWindow trailing_half(std::size_t length) {
  if (length < 2) throw InvalidArgument("trailing_half: trace too short");
  return {std::max<std::size_t>(1, length / 2), length - 1};
}

RateFit fit_rate(const std::vector<double>& values, RateWindow window) {
  if (window.k_lo < 1) throw InvalidArgument("fit_rate: window must start at k >= 1");
  if (window.k_hi >= values.size() || window.k_hi < window.k_lo) {
    throw InvalidArgument("fit_rate: window outside the trace");
  }
  const std::size_t count = window.k_hi - window.k_lo + 1;
  if (count < 10) throw InvalidArgument("fit_rate: window needs at least 10 samples");

  std::vector<double> x(count);
  std::vector<double> y(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t k = window.k_lo + s;
    const double v = values[k];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(fmt::format("fit_rate: value at k={} is not positive and finite", k));
    }
    x[s] = std::log(static_cast<double>(k));
    y[s] = std::log(v);
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    mx += x[s];
    my += y[s];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    sxx += (x[s] - mx) * (x[s] - mx);
    sxy += (x[s] - mx) * (y[s] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.k_lo = window.k_lo;
  fit.k_hi = window.k_hi;
  double sse = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const double e = y[s] - (fit.intercept + fit.slope * x[s]);
    sse += e * e;
  }
  fit.residual_rms = std::sqrt(sse / count);
  return fit;
}

double plateau_level(const std::vector<double>& values, double tail_fraction) {
  if (values.empty()) throw InvalidArgument("plateau_level: empty trace");
  if (!(tail_fraction > 0.0 && tail_fraction <= 0.5)) {
    throw InvalidArgument("plateau_level: tail_fraction must lie in (0, 0.5]");
  }
  const auto n = values.size();
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  std::vector<double> tail(values.end() - static_cast<std::ptrdiff_t>(take), values.end());
  const auto mid = tail.size() / 2;
  std::nth_element(tail.begin(), tail.begin() + mid, tail.end());
  const double upper = tail[mid];
  if (tail.size() % 2 == 1) return upper;
  const double lower = *std::max_element(tail.begin(), tail.begin() + mid);
  return 0.5 * (lower + upper);
}

bool bernoulli_bound_check(const std::vector<double>& zeta, double p, std::size_t s,
                           std::size_t k) {
  if (!(p >= 1.0)) throw InvalidArgument("bernoulli_bound_check: p must be >= 1");
  if (s > k || k >= zeta.size()) throw InvalidArgument("bernoulli_bound_check: bad range");
  double log_product = 0.0;
  double sum = 0.0;
  for (std::size_t r = s; r <= k; ++r) {
    const double z = zeta[r];
    if (!(z > 0.0 && z <= 1.0)) {
      throw InvalidArgument("bernoulli_bound_check: zeta values must lie in (0, 1]");
    }
    if (z == 1.0) return true;  // product is exactly zero
    log_product += p * std::log1p(-z);
    sum += z;
  }
  // Compare in logs; the product underflows long before the bound does.
  return log_product <= -std::log(p * sum);
}

std::string metric_name(TradeoffMetric metric) {
  return metric == TradeoffMetric::optimality_gap ? "optimality_gap" : "mean_accuracy";
}

bool at_least_as_good(TradeoffMetric metric, double a, double b) {
  return metric == TradeoffMetric::optimality_gap ? a <= b : a >= b;
}

namespace {

const std::vector<double>& metric_column(const MetricsTrace& t, TradeoffMetric metric) {
  return metric == TradeoffMetric::optimality_gap ? t.optimality_gap : t.mean_accuracy;
}

}  // namespace

TradeoffTable tradeoff_table(const std::vector<TradeoffInput>& traces, TradeoffMetric metric,
                             int points) {
  if (traces.empty()) throw InvalidArgument("tradeoff_table: no traces");
  if (points < 1) throw InvalidArgument("tradeoff_table: need at least one grid point");
  double horizon = std::numeric_limits<double>::infinity();
  for (const auto& in : traces) {
    if (!in.trace || in.trace->size() == 0) {
      throw InvalidArgument(fmt::format("tradeoff_table: empty trace for {}", in.policy));
    }
    horizon = std::min(horizon, in.trace->cumulative_time.back());
  }

  TradeoffTable table;
  table.metric = metric;
  const int n = horizon > 0.0 ? points : 1;
  for (int t = 0; t < n; ++t) {
    table.time.push_back(n == 1 ? 0.0 : horizon * t / (n - 1));
  }
  if (n > 1) table.time.back() = horizon;

  for (const auto& in : traces) {
    const auto& t = *in.trace;
    const auto& column = metric_column(t, metric);
    std::vector<double> best(table.time.size(), std::numeric_limits<double>::quiet_NaN());
    double running = std::numeric_limits<double>::quiet_NaN();
    std::size_t row = 0;
    for (std::size_t g = 0; g < table.time.size(); ++g) {
      // Row k's state exists once iterations 0..k-1 have been paid for.
      while (row < t.size() && t.cumulative_time[row] - t.transmission_score[row] <= table.time[g]) {
        const double v = column[row];
        if (!std::isnan(v) && (std::isnan(running) || !at_least_as_good(metric, running, v))) {
          running = v;
        }
        ++row;
      }
      best[g] = running;
    }
    table.policies.push_back(in.policy);
    table.best.push_back(std::move(best));
  }
  return table;
}

double matched_time_share(const TradeoffTable& table, std::size_t a, std::size_t b) {
  if (a >= table.best.size() || b >= table.best.size()) {
    throw InvalidArgument("matched_time_share: policy index out of range");
  }
  std::size_t counted = 0;
  std::size_t good = 0;
  for (std::size_t g = 0; g < table.time.size(); ++g) {
    const double x = table.best[a][g];
    const double y = table.best[b][g];
    if (std::isnan(x) || std::isnan(y)) continue;
    ++counted;
    if (at_least_as_good(table.metric, x, y)) ++good;
  }
  if (counted == 0) throw InvalidArgument("matched_time_share: no comparable grid points");
  return static_cast<double>(good) / static_cast<double>(counted);
}

void write_tradeoff_csv(std::ostream& out, const TradeoffTable& table) {
  out << "time";
  for (const auto& p : table.policies) out << ',' << p << '_' << metric_name(table.metric);
  out << '\n';
  for (std::size_t g = 0; g < table.time.size(); ++g) {
    out << fmt::format("{:.17g}", table.time[g]);
    for (const auto& col : table.best) {
      out << ',' << (std::isnan(col[g]) ? std::string("nan") : fmt::format("{:.17g}", col[g]));
    }
    out << '\n';
  }
}

}  // namespace efhc
