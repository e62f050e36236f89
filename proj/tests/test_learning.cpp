#include <doctest.h>

#include <cmath>
#include <memory>

#include "efhc/data.hpp"
#include "efhc/error.hpp"
#include "efhc/learning.hpp"
#include "efhc/rng.hpp"

using namespace efhc;

namespace {

QuadraticTask random_quadratic(int rows, int n, Rng& rng) {
  QuadraticTask q{Eigen::MatrixXd(rows, n), Eigen::VectorXd(rows)};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < n; ++c) q.A(r, c) = standard_normal(rng);
    q.b(r) = standard_normal(rng);
  }
  return q;
}

HingeTask random_hinge(int samples, int classes, int dim, double lambda, Rng& rng) {
  auto data = std::make_shared<SampleSet>();
  data->features.resize(samples, dim);
  data->classes = classes;
  for (int s = 0; s < samples; ++s) {
    for (int c = 0; c < dim; ++c) data->features(s, c) = uniform01(rng);
    data->labels.push_back(s % classes);
  }
  HingeTask h;
  h.data = data;
  for (int s = 0; s < samples; ++s) h.rows.push_back(s);
  h.lambda = lambda;
  h.scale = 1.0 / samples;
  return h;
}

ModelParams random_point(int n, double scale, Rng& rng) {
  ModelParams w(n);
  for (int i = 0; i < n; ++i) w(i) = scale * standard_normal(rng);
  return w;
}

// Central differences of local_loss.
ModelParams numeric_grad(const LocalTask& task, const ModelParams& w, double h) {
  ModelParams g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    ModelParams hi = w, lo = w;
    hi(i) += h;
    lo(i) -= h;
    g(i) = (local_loss(task, hi) - local_loss(task, lo)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("quadratic loss and gradient examples") {
  const LocalTask q = QuadraticTask{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 2)};
  CHECK(local_loss(q, Eigen::Vector2d::Zero()) == doctest::Approx(2.5));
  CHECK(local_grad(q, Eigen::Vector2d::Zero()).isApprox(Eigen::Vector2d(-1, -2)));
  CHECK(local_loss(q, Eigen::Vector2d(1, 2)) == 0.0);
  CHECK_THROWS_AS(local_loss(q, Eigen::Vector3d::Zero()), InvalidArgument);
}

TEST_CASE("hinge loss and gradient example") {
  auto data = std::make_shared<SampleSet>();
  data->features = Eigen::MatrixXd(1, 2);
  data->features << 1.0, 0.0;
  data->labels = {0};
  data->classes = 2;
  HingeTask h{data, {0}, 0.0, 1.0};
  const LocalTask task = h;
  CHECK(model_dimension(task) == 4);
  CHECK(local_loss(task, ModelParams::Zero(4)) == doctest::Approx(1.0));
  Eigen::Vector4d expect(-1, 0, 1, 0);
  CHECK(local_grad(task, ModelParams::Zero(4)).isApprox(expect));
  // Margin satisfied: correct class ahead by more than one.
  Eigen::Vector4d w(2, 0, 0, 0);
  CHECK(local_loss(task, w) == 0.0);
  CHECK(local_grad(task, w).isZero());
}

TEST_CASE("gradients match finite differences") {
  Rng rng = make_rng({555});
  SUBCASE("quadratic") {
    const LocalTask task = random_quadratic(12, 5, rng);
    for (int t = 0; t < 100; ++t) {
      const auto w = random_point(5, 2.0, rng);
      const auto g = local_grad(task, w);
      const auto fd = numeric_grad(task, w, 1e-5);
      CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
    }
  }
  SUBCASE("hinge with regularization") {
    const LocalTask task = random_hinge(15, 3, 4, 0.01, rng);
    for (int t = 0; t < 100; ++t) {
      const auto w = random_point(12, 1.0, rng);
      const auto g = local_grad(task, w);
      const auto fd = numeric_grad(task, w, 1e-7);
      CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("stochastic_grad") {
  Rng rng = make_rng({556});
  const LocalTask task = random_quadratic(20, 4, rng);
  const auto w = random_point(4, 1.0, rng);

  SUBCASE("full batch is the exact gradient") {
    CHECK(stochastic_grad(task, w, 20, rng) == local_grad(task, w));
  }
  SUBCASE("batch size outside 1..N") {
    CHECK_THROWS_AS(stochastic_grad(task, w, 0, rng), InvalidArgument);
    CHECK_THROWS_AS(stochastic_grad(task, w, 21, rng), InvalidArgument);
  }
  SUBCASE("unbiased: Monte Carlo mean within 3 standard errors") {
    const int draws = 10000;
    const auto exact = local_grad(task, w);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sum2 = Eigen::VectorXd::Zero(4);
    for (int d = 0; d < draws; ++d) {
      const auto g = stochastic_grad(task, w, 5, rng);
      sum += g;
      sum2 += g.cwiseProduct(g);
    }
    const Eigen::VectorXd mean = sum / draws;
    const Eigen::VectorXd var = sum2 / draws - mean.cwiseProduct(mean);
    for (int i = 0; i < 4; ++i) {
      const double se = std::sqrt(var(i) / draws);
      CHECK(std::abs(mean(i) - exact(i)) <= 3.0 * se);
    }
  }
  SUBCASE("hinge minibatches are unbiased too") {
    const LocalTask h = random_hinge(12, 3, 3, 0.0, rng);
    const auto wh = random_point(9, 1.0, rng);
    const auto exact = local_grad(h, wh);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(9);
    const int draws = 4000;
    for (int d = 0; d < draws; ++d) sum += stochastic_grad(h, wh, 4, rng);
    CHECK((sum / draws - exact).norm() < 0.05 * std::max(1.0, exact.norm()));
  }
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  Rng rng = make_rng({3});
  const auto picks = sample_without_replacement(10, 10, rng);
  std::vector<int> sorted = picks;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);
  CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), InvalidArgument);
}

TEST_CASE("step_size") {
  const auto c = StepPolicy::constant(0.1);
  for (long long k : {0LL, 5LL, 1000000LL}) CHECK(step_size(c, k) == 0.1);
  CHECK(step_size(StepPolicy::diminishing(1.0, 1.0, 0.5), 0) == 1.0);
  CHECK(step_size(StepPolicy::diminishing(1.0, 1.0, 0.5), 3) == doctest::Approx(0.5));
  CHECK(step_size(StepPolicy::diminishing(1.0, 2.0, 1.0), 2) == doctest::Approx(0.5));
  CHECK(step_size(StepPolicy::diminishing(0.8, 1.0, 0.75), 15) == doctest::Approx(0.1));
  CHECK_THROWS_AS(step_size(c, -1), InvalidArgument);
  CHECK_THROWS_AS(validate(StepPolicy::diminishing(1.0, 1.0, 0.4)), InvalidArgument);
  CHECK_THROWS_AS(validate(StepPolicy::diminishing(1.0, 0.0, 0.5)), InvalidArgument);
  CHECK_THROWS_AS(validate(StepPolicy::constant(0.0)), InvalidArgument);
}

TEST_CASE("diminishing steps: sum diverges while the sum of squares converges") {
  // Sums over doubling blocks [2^j, 2^(j+1)): the plain sum's block totals do
  // not shrink, the squared sum's block totals shrink geometrically.
  for (double theta : {0.6, 0.75, 1.0}) {
    const auto policy = StepPolicy::diminishing(1.0, 1.0, theta);
    double prev_lin = 0.0, prev_sq = 1e300;
    for (int j = 4; j < 20; ++j) {
      double lin = 0.0, sq = 0.0;
      for (long long k = 1LL << j; k < (1LL << (j + 1)); ++k) {
        const double a = step_size(policy, k);
        lin += a;
        sq += a * a;
      }
      CHECK(lin >= 0.99 * prev_lin);
      CHECK(sq < prev_sq);
      if (j > 8) CHECK(sq / prev_sq == doctest::Approx(std::pow(2.0, 1 - 2 * theta)).epsilon(0.01));
      prev_lin = lin;
      prev_sq = sq;
    }
  }
}

TEST_CASE("global_optimum") {
  SUBCASE("single device") {
    const std::vector<LocalTask> t{QuadraticTask{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 2)}};
    CHECK(global_optimum(t).isApprox(Eigen::Vector2d(1, 2)));
  }
  SUBCASE("two devices seeing different coordinates") {
    Eigen::MatrixXd a1(1, 2), a2(1, 2);
    a1 << 1, 0;
    a2 << 0, 1;
    const std::vector<LocalTask> t{QuadraticTask{a1, Eigen::VectorXd::Constant(1, 1.0)},
                                   QuadraticTask{a2, Eigen::VectorXd::Constant(1, 3.0)}};
    CHECK(global_optimum(t).isApprox(Eigen::Vector2d(1, 3)));
  }
  SUBCASE("agrees with gradient descent and zeroes the summed gradient") {
    Rng rng = make_rng({557});
    std::vector<LocalTask> tasks;
    for (int i = 0; i < 5; ++i) tasks.push_back(random_quadratic(8, 4, rng));
    const auto w_star = global_optimum(tasks);

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& t : tasks) H += std::get<QuadraticTask>(t).A.transpose() * std::get<QuadraticTask>(t).A;
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    ModelParams w = ModelParams::Zero(4);
    for (int it = 0; it < 200000; ++it) {
      ModelParams g = ModelParams::Zero(4);
      for (const auto& t : tasks) g += local_grad(t, w);
      w -= g / L;
    }
    CHECK((w - w_star).norm() < 1e-6);

    ModelParams sum = ModelParams::Zero(4);
    for (const auto& t : tasks) sum += local_grad(t, w_star);
    CHECK(sum.norm() <= 1e-8 * tasks.size());
  }
  SUBCASE("errors") {
    Rng rng = make_rng({1});
    CHECK_THROWS_AS(global_optimum({}), InvalidArgument);
    CHECK_THROWS_AS(global_optimum({random_hinge(4, 2, 2, 0.0, rng)}), Unsupported);
    CHECK_THROWS_AS(global_optimum({QuadraticTask{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)}}),
                    NumericFailure);
  }
}

TEST_CASE("estimate_constants") {
  const std::vector<ModelParams> probes{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                        Eigen::Vector2d(0, 2), Eigen::Vector2d(-1, 3)};
  SUBCASE("scaled identity: smoothness and convexity both c^2") {
    const std::vector<LocalTask> t{QuadraticTask{3.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 1)}};
    const auto c = estimate_constants(t, probes);
    CHECK(c.smoothness == doctest::Approx(9.0));
    CHECK(c.strong_convexity == doctest::Approx(9.0));
    CHECK(*c.spectral_smoothness == doctest::Approx(9.0));
    CHECK(*c.spectral_convexity == doctest::Approx(9.0));
    CHECK(c.heterogeneity == 0.0);
  }
  SUBCASE("identical devices have zero heterogeneity") {
    const QuadraticTask q{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 2)};
    CHECK(estimate_constants({q, q, q}, probes).heterogeneity == 0.0);
  }
  SUBCASE("shifted minimizers") {
    const std::vector<LocalTask> t{QuadraticTask{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0, 0)},
                                   QuadraticTask{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(2, 0)}};
    CHECK(estimate_constants(t, probes).heterogeneity == doctest::Approx(1.0));
  }
  SUBCASE("non-iid synthetic instance matches a brute-force maximum") {
    QuadraticSpec spec;
    const auto tasks = synth_quadratic(spec);
    Rng rng = make_rng({2});
    std::vector<ModelParams> p;
    for (int i = 0; i < 5; ++i) p.push_back(random_point(spec.dimension, 1.0, rng));
    const auto c = estimate_constants(tasks, p);
    double brute = 0.0;
    for (const auto& w : p) {
      ModelParams mean = ModelParams::Zero(w.size());
      for (const auto& t : tasks) mean += local_grad(t, w);
      mean /= static_cast<double>(tasks.size());
      for (const auto& t : tasks) brute = std::max(brute, (local_grad(t, w) - mean).norm());
    }
    CHECK(c.heterogeneity > 0.0);
    CHECK(c.heterogeneity == doctest::Approx(brute).epsilon(1e-12));
    CHECK(c.smoothness <= *c.spectral_smoothness * (1 + 1e-9));
    CHECK(c.strong_convexity >= *c.spectral_convexity * (1 - 1e-9));
  }
  CHECK_THROWS_AS(estimate_constants({QuadraticTask{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0, 0)}},
                                     {Eigen::Vector2d(0, 0)}),
                  InvalidArgument);
}

TEST_CASE("classification_accuracy") {
  SampleSet s;
  s.features = Eigen::MatrixXd::Identity(2, 2);
  s.labels = {0, 1};
  s.classes = 2;
  CHECK(classification_accuracy(Eigen::Vector4d(1, 0, 0, 1), s) == 1.0);
  CHECK(classification_accuracy(Eigen::Vector4d(0, 1, 1, 0), s) == 0.0);
  CHECK_THROWS_AS(classification_accuracy(Eigen::Vector3d(0, 1, 1), s), InvalidArgument);
}
