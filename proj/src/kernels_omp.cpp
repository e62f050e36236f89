#include <algorithm>
#include <vector>

#include <omp.h>

#include "efhc/kernels.hpp"
#include "kernels_detail.hpp"

namespace efhc::kernels::omp {

void matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& out) {
  detail::check_matmul(a, b);
  out.resize(a.rows(), b.cols());
  const auto cols = static_cast<long>(b.cols());
#pragma omp parallel for schedule(static)
  for (long j = 0; j < cols; ++j) {
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
  const auto n = static_cast<long>(batch.rows.size());

  Eigen::MatrixXd coef(classes, n);
  std::vector<double> losses(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (long s = 0; s < n; ++s) {
    losses[s] = detail::sample_coefficients(batch, weights, static_cast<std::size_t>(s),
                                            coef.col(s).data());
  }

  const long outputs = static_cast<long>(classes) * dim;
#pragma omp parallel for schedule(static)
  for (long o = 0; o < outputs; ++o) {
    const int c = static_cast<int>(o / dim);
    const int f = static_cast<int>(o % dim);
    double acc = 0.0;
    for (long s = 0; s < n; ++s) acc += coef(c, s) * x(batch.rows[s], f);
    grad[static_cast<std::size_t>(o)] = acc;
  }

  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss;
}

}  // namespace efhc::kernels::omp
