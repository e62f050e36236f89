#pragma once

#include "efhc/kernels.hpp"

namespace efhc::kernels::detail {

void check_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
void check_hinge(const HingeBatch& batch, std::span<const double> weights,
                 std::span<double> grad);
double sample_coefficients(const HingeBatch& batch, std::span<const double> weights,
                           std::size_t s, double* coef);

}  // namespace efhc::kernels::detail
