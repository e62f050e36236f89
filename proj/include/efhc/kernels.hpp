#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP version; the OpenMP versions split work over independent outputs
// and keep every reduction in the serial order, so both produce identical
// bits for any thread count.
namespace efhc::kernels {

enum class Exec { serial, parallel };

// Multiclass hinge (Crammer-Singer style sum over wrong classes):
//   sum_s scale * sum_{c != y_s} max(0, 1 + w_c.x_s - w_{y_s}.x_s)
// over the rows of `features` selected by `rows`. `weights` is classes x dim
// row-major. Returns the loss and writes d(loss)/d(weights) into `grad`.
struct HingeBatch {
  const Eigen::MatrixXd* features = nullptr;  // samples x dim
  std::span<const int> labels;                 // one per sample
  std::span<const int> rows;                   // selected sample indices
  int classes = 0;
  double scale = 1.0;
};

namespace serial {
void matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& out);
double hinge_loss_grad(const HingeBatch& batch, std::span<const double> weights,
                       std::span<double> grad);
}  // namespace serial

namespace omp {
void matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& out);
double hinge_loss_grad(const HingeBatch& batch, std::span<const double> weights,
                       std::span<double> grad);
}  // namespace omp

inline void matmul(Exec exec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                   Eigen::MatrixXd& out) {
  exec == Exec::parallel ? omp::matmul(a, b, out) : serial::matmul(a, b, out);
}

inline double hinge_loss_grad(Exec exec, const HingeBatch& batch,
                              std::span<const double> weights, std::span<double> grad) {
  return exec == Exec::parallel ? omp::hinge_loss_grad(batch, weights, grad)
                                : serial::hinge_loss_grad(batch, weights, grad);
}

// Process-wide default used by library entry points that do not take an
// explicit Exec. Parallel unless EFHC_SERIAL is set in the environment.
Exec default_exec();

}  // namespace efhc::kernels
