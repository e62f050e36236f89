#include <algorithm>
#include <cstdlib>

#include "efhc/error.hpp"
#include "efhc/kernels.hpp"
#include "kernels_detail.hpp"

namespace efhc::kernels {

Exec default_exec() {
  static const Exec exec = std::getenv("EFHC_SERIAL") ? Exec::serial : Exec::parallel;
  return exec;
}

namespace detail {

void check_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
}

void check_hinge(const HingeBatch& batch, std::span<const double> weights,
                 std::span<double> grad) {
  if (batch.features == nullptr) throw InvalidArgument("hinge: no feature matrix");
  const auto dim = static_cast<std::size_t>(batch.features->cols());
  const auto expected = dim * static_cast<std::size_t>(batch.classes);
  if (weights.size() != expected || grad.size() != expected) {
    throw InvalidArgument("hinge: weight size must be classes * feature dimension");
  }
}

// Per-sample score margins: coefficient on w_c for each selected sample.
// Row s of `coef` holds +scale for each violating wrong class and minus the
// violator count times scale for the true class.
double sample_coefficients(const HingeBatch& batch, std::span<const double> weights,
                           std::size_t s, double* coef) {
  const auto& x = *batch.features;
  const int dim = static_cast<int>(x.cols());
  const int row = batch.rows[s];
  const int y = batch.labels[row];
  const int classes = batch.classes;

  double true_score = 0.0;
  for (int f = 0; f < dim; ++f) true_score += weights[static_cast<std::size_t>(y) * dim + f] * x(row, f);

  double loss = 0.0;
  int violators = 0;
  for (int c = 0; c < classes; ++c) {
    coef[c] = 0.0;
    if (c == y) continue;
    double score = 0.0;
    for (int f = 0; f < dim; ++f) score += weights[static_cast<std::size_t>(c) * dim + f] * x(row, f);
    const double margin = 1.0 + score - true_score;
    // Exact ties take the zero subgradient.
    if (margin > 0.0) {
      loss += margin;
      coef[c] = batch.scale;
      ++violators;
    }
  }
  coef[y] = -batch.scale * violators;
  return batch.scale * loss;
}

}  // namespace detail

namespace serial {

void matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& out) {
  detail::check_matmul(a, b);
  out.resize(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index l = 0; l < a.cols(); ++l) acc += a(i, l) * b(l, j);
      out(i, j) = acc;
    }
  }
}

double hinge_loss_grad(const HingeBatch& batch, std::span<const double> weights,
                       std::span<double> grad) {
  detail::check_hinge(batch, weights, grad);
  const auto& x = *batch.features;
  const int dim = static_cast<int>(x.cols());
  const int classes = batch.classes;
  const std::size_t n = batch.rows.size();

  Eigen::MatrixXd coef(classes, static_cast<Eigen::Index>(n));
  std::vector<double> losses(n);
  for (std::size_t s = 0; s < n; ++s) {
    losses[s] = detail::sample_coefficients(batch, weights, s, coef.col(s).data());
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  for (int c = 0; c < classes; ++c) {
    for (int f = 0; f < dim; ++f) {
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) acc += coef(c, s) * x(batch.rows[s], f);
      grad[static_cast<std::size_t>(c) * dim + f] = acc;
    }
  }

  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss;
}

}  // namespace serial
}  // namespace efhc::kernels
