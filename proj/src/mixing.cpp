#include "efhc/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "efhc/error.hpp"
#include "efhc/kernels.hpp"

namespace efhc {

bool TriggerVector::link_used(const GraphSnapshot& g, int i, int j) const {
  if (!g.has_edge(i, j)) return false;
  if (broadcast.at(i) || broadcast.at(j)) return true;
  return std::find(connection_exchanges.begin(), connection_exchanges.end(), Edge(i, j)) !=
         connection_exchanges.end();
}

GraphSnapshot TriggerVector::used_edges(const GraphSnapshot& g) const {
  if (g.size() != devices()) {
    throw InvalidArgument(fmt::format("trigger vector has {} devices, graph has {}",
                                      devices(), g.size()));
  }
  std::vector<Edge> used;
  for (const auto& e : g.edges()) {
    if (link_used(g, e.a, e.b)) used.push_back(e);
  }
  return GraphSnapshot(g.size(), std::move(used));
}

double metropolis_weight(int d_i, int d_j) {
  if (d_i < 1 || d_j < 1) {
    throw InvalidArgument(fmt::format(
        "metropolis_weight: degrees ({}, {}) must be >= 1 for an existing edge", d_i, d_j));
  }
  return std::min(1.0 / (1.0 + d_i), 1.0 / (1.0 + d_j));
}

TransitionMatrix build_transition(const GraphSnapshot& g, const TriggerVector& triggers) {
  const int m = g.size();
  const auto used = triggers.used_edges(g);
  const auto degree = g.degrees();

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
  for (const auto& e : used.edges()) {
    const double beta = metropolis_weight(degree[e.a], degree[e.b]);
    p(e.a, e.b) = beta;
    p(e.b, e.a) = beta;
  }
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) off += p(i, j);
    }
    p(i, i) = 1.0 - off;
  }
  return TransitionMatrix(std::move(p));
}

bool validate_stochasticity(const TransitionMatrix& P, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("validate_stochasticity: tol must be positive");
  const auto& p = P.matrix();
  const auto m = p.rows();
  if (p.cols() != m) return false;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(p(i, i) > 0.0)) return false;
    double row = 0.0;
    double col = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!std::isfinite(p(i, j)) || p(i, j) < -tol) return false;
      if (std::abs(p(i, j) - p(j, i)) > tol) return false;
      row += p(i, j);
      col += p(j, i);
    }
    if (std::abs(row - 1.0) > tol || std::abs(col - 1.0) > tol) return false;
  }
  return true;
}

TransitionMatrix window_product(const std::vector<TransitionMatrix>& newest_first) {
  if (newest_first.empty()) throw InvalidArgument("window_product: empty window");
  const int m = newest_first.front().size();
  for (const auto& P : newest_first) {
    if (P.size() != m || P.matrix().cols() != m) {
      throw InvalidArgument(fmt::format("window_product: expected {}x{} matrices", m, m));
    }
  }
  // Accumulate from the oldest factor so the product reads P^(k) ... P^(s).
  Eigen::MatrixXd acc = newest_first.back().matrix();
  Eigen::MatrixXd next;
  const auto exec = kernels::default_exec();
  for (auto it = std::next(newest_first.rbegin()); it != newest_first.rend(); ++it) {
    kernels::matmul(exec, it->matrix(), acc, next);
    acc.swap(next);
  }
  return TransitionMatrix(std::move(acc));
}

double consensus_spectral_norm(const TransitionMatrix& P, SpectralOptions options) {
  const auto& p = P.matrix();
  const auto m = p.rows();
  if (m == 0 || p.cols() != m) throw InvalidArgument("spectral norm needs a square matrix");

  // D = P - (1/m) 11^T. Power iteration on D^T D gives sigma_max(D)^2.
  const Eigen::MatrixXd d = p - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  const Eigen::MatrixXd gram = d.transpose() * d;

  // Fixed, non-symmetric start vector so no singular direction is missed by
  // construction; projected off the consensus direction.
  Eigen::VectorXd x(m);
  for (Eigen::Index i = 0; i < m; ++i) x(i) = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
  auto deflate = [m](Eigen::VectorXd& v) { v.array() -= v.sum() / static_cast<double>(m); };
  deflate(x);
  if (x.norm() == 0.0) return 0.0;
  x.normalize();

  double estimate = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    Eigen::VectorXd y = gram * x;
    deflate(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    const double next = std::sqrt(x.dot(y));
    x = y / norm;
    if (it > 0 && std::abs(next - estimate) <= options.tolerance * std::max(next, 1e-300)) {
      return next;
    }
    estimate = next;
  }
  throw NumericFailure(fmt::format(
      "consensus_spectral_norm: power iteration did not converge in {} iterations",
      options.max_iterations));
}

void write_csv(std::ostream& out, const TransitionMatrix& P) {
  const auto& p = P.matrix();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (j > 0) out << ',';
      out << fmt::format("{:.17g}", p(i, j));
    }
    out << '\n';
  }
}

}  // namespace efhc
