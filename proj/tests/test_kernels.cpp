#include <doctest.h>

#include <cstring>
#include <vector>

#include "efhc/error.hpp"
#include "efhc/kernels.hpp"
#include "efhc/rng.hpp"
#include "oracles.hpp"

using namespace efhc;
using namespace efhc::kernels;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = standard_normal(rng);
  }
  return m;
}

bool bitwise_equal(const double* a, const double* b, std::size_t n) {
  return std::memcmp(a, b, n * sizeof(double)) == 0;
}

// Direct transcription of the hinge definition, one class pair at a time.
double hinge_oracle(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                    const std::vector<int>& rows, int classes, double scale,
                    const std::vector<double>& w, std::vector<double>& grad) {
  const int dim = static_cast<int>(x.cols());
  grad.assign(w.size(), 0.0);
  double loss = 0.0;
  for (int s : rows) {
    const int y = labels[s];
    auto score = [&](int c) {
      double v = 0.0;
      for (int d = 0; d < dim; ++d) v += w[c * dim + d] * x(s, d);
      return v;
    };
    for (int c = 0; c < classes; ++c) {
      if (c == y) continue;
      const double margin = 1.0 + score(c) - score(y);
      if (margin > 0.0) {
        loss += scale * margin;
        for (int d = 0; d < dim; ++d) {
          grad[c * dim + d] += scale * x(s, d);
          grad[y * dim + d] -= scale * x(s, d);
        }
      }
    }
  }
  return loss;
}

}  // namespace

TEST_CASE("matmul: serial and OpenMP agree bitwise and match a triple loop") {
  Rng rng = make_rng({11});
  for (int trial = 0; trial < 40; ++trial) {
    const int r = 1 + trial % 17, k = 1 + (trial * 7) % 23, c = 1 + (trial * 5) % 19;
    const auto a = random_matrix(r, k, rng);
    const auto b = random_matrix(k, c, rng);
    Eigen::MatrixXd s, p;
    serial::matmul(a, b, s);
    omp::matmul(a, b, p);
    REQUIRE(s.rows() == r);
    REQUIRE(s.cols() == c);
    CHECK(bitwise_equal(s.data(), p.data(), s.size()));
    CHECK((s - oracle::naive_product(a, b)).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::MatrixXd out;
  CHECK_THROWS_AS(serial::matmul(Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 3), out), InvalidArgument);
  CHECK_THROWS_AS(omp::matmul(Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 3), out), InvalidArgument);
}

TEST_CASE("hinge: serial and OpenMP agree bitwise and match the definition") {
  Rng rng = make_rng({12});
  for (int trial = 0; trial < 30; ++trial) {
    const int samples = 5 + trial * 3, classes = 2 + trial % 5, dim = 1 + trial % 9;
    Eigen::MatrixXd x(samples, dim);
    std::vector<int> labels(samples);
    for (int s = 0; s < samples; ++s) {
      for (int d = 0; d < dim; ++d) x(s, d) = uniform01(rng);
      labels[s] = static_cast<int>(uniform01(rng) * classes);
    }
    std::vector<int> rows;
    for (int s = 0; s < samples; s += 1 + trial % 3) rows.push_back(s);
    std::vector<double> w(static_cast<std::size_t>(classes * dim));
    for (auto& v : w) v = standard_normal(rng);

    HingeBatch batch{&x, labels, rows, classes, 0.5};
    std::vector<double> gs(w.size()), gp(w.size()), go;
    const double ls = serial::hinge_loss_grad(batch, w, gs);
    const double lp = omp::hinge_loss_grad(batch, w, gp);
    CHECK(std::memcmp(&ls, &lp, sizeof(double)) == 0);
    CHECK(bitwise_equal(gs.data(), gp.data(), gs.size()));

    const double lo = hinge_oracle(x, labels, rows, classes, 0.5, w, go);
    CHECK(ls == doctest::Approx(lo).epsilon(1e-12));
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(gs[i] == doctest::Approx(go[i]).epsilon(1e-12));
  }
}

TEST_CASE("hinge rejects mismatched weights") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 3);
  std::vector<int> labels{0, 1}, rows{0, 1};
  HingeBatch batch{&x, labels, rows, 2, 1.0};
  std::vector<double> w(5), g(5);
  CHECK_THROWS_AS(serial::hinge_loss_grad(batch, w, g), InvalidArgument);
}
