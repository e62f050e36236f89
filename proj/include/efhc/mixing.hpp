#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "efhc/topology.hpp"

namespace efhc {

// Broadcast indicators for one iteration. `broadcast[i]` is v_i; edges in
// `connection_exchanges` carried a neighbor-connection exchange and count as
// used regardless of v_i. Link usage is derived: v_ij = max(v_i, v_j) on
// physical edges, or 1 for a connection exchange.
struct TriggerVector {
  std::vector<bool> broadcast;
  std::vector<Edge> connection_exchanges;

  explicit TriggerVector(int m = 0) : broadcast(m, false) {}

  int devices() const { return static_cast<int>(broadcast.size()); }
  bool link_used(const GraphSnapshot& g, int i, int j) const;
  // Physical edges with v_ij = 1, i.e. the info-flow edge set E'^(k).
  GraphSnapshot used_edges(const GraphSnapshot& g) const;
};

// Row i holds the weights device i applies to every device's parameters.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {}

  static TransitionMatrix identity(int m) {
    return TransitionMatrix(Eigen::MatrixXd::Identity(m, m));
  }

  int size() const { return static_cast<int>(p_.rows()); }
  double operator()(int i, int j) const { return p_(i, j); }
  const Eigen::MatrixXd& matrix() const { return p_; }

 private:
  Eigen::MatrixXd p_;
};

// min(1/(1+d_i), 1/(1+d_j)).
double metropolis_weight(int d_i, int d_j);

TransitionMatrix build_transition(const GraphSnapshot& g,
                                  const TriggerVector& triggers);

// Row sums, column sums, symmetry within tol; diagonal strictly positive.
bool validate_stochasticity(const TransitionMatrix& P, double tol);

// P^(k) P^(k-1) ... P^(s), with `newest_first[0] = P^(k)`.
TransitionMatrix window_product(const std::vector<TransitionMatrix>& newest_first);

struct SpectralOptions {
  double tolerance = 1e-10;
  int max_iterations = 10'000;
};

// Largest singular value of P - (1/m) 11^T, by power iteration on the
// deflated operator.
double consensus_spectral_norm(const TransitionMatrix& P,
                               SpectralOptions options = {});

void write_csv(std::ostream& out, const TransitionMatrix& P);

}  // namespace efhc
