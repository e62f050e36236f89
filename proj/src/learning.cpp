#include "efhc/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "efhc/error.hpp"

namespace efhc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_dimension(const LocalTask& task, const ModelParams& w) {
  const int n = model_dimension(task);
  if (w.size() != n) {
    throw InvalidArgument(
        fmt::format("model has dimension {}, task expects {}", w.size(), n));
  }
}

double hinge_eval(const HingeTask& task, std::span<const int> rows, double sample_scale,
                  const ModelParams& w, ModelParams* grad, kernels::Exec exec) {
  kernels::HingeBatch batch;
  batch.features = &task.data->features;
  batch.labels = task.data->labels;
  batch.rows = rows;
  batch.classes = task.data->classes;
  batch.scale = sample_scale;

  ModelParams g = ModelParams::Zero(w.size());
  const double loss = kernels::hinge_loss_grad(
      exec, batch, std::span<const double>(w.data(), w.size()),
      std::span<double>(g.data(), g.size()));
  if (grad) *grad = g + task.lambda * w;
  return loss + 0.5 * task.lambda * w.squaredNorm();
}

}  // namespace

int model_dimension(const LocalTask& task) {
  return std::visit(Overloaded{
                        [](const QuadraticTask& q) { return static_cast<int>(q.A.cols()); },
                        [](const HingeTask& h) { return h.dimension(); },
                    },
                    task);
}

int data_point_count(const LocalTask& task) {
  return std::visit(Overloaded{
                        [](const QuadraticTask& q) { return static_cast<int>(q.A.rows()); },
                        [](const HingeTask& h) { return static_cast<int>(h.rows.size()); },
                    },
                    task);
}

double local_loss(const LocalTask& task, const ModelParams& w, kernels::Exec exec) {
  check_dimension(task, w);
  return std::visit(Overloaded{
                        [&](const QuadraticTask& q) {
                          return 0.5 * (q.A * w - q.b).squaredNorm();
                        },
                        [&](const HingeTask& h) {
                          return hinge_eval(h, h.rows, h.scale, w, nullptr, exec);
                        },
                    },
                    task);
}

ModelParams local_grad(const LocalTask& task, const ModelParams& w, kernels::Exec exec) {
  check_dimension(task, w);
  return std::visit(Overloaded{
                        [&](const QuadraticTask& q) -> ModelParams {
                          return q.A.transpose() * (q.A * w - q.b);
                        },
                        [&](const HingeTask& h) -> ModelParams {
                          ModelParams g;
                          hinge_eval(h, h.rows, h.scale, w, &g, exec);
                          return g;
                        },
                    },
                    task);
}

std::vector<int> sample_without_replacement(int n, int count, Rng& rng) {
  if (count < 0 || count > n) {
    throw InvalidArgument(fmt::format("cannot draw {} of {} without replacement", count, n));
  }
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < count; ++i) {
    const int span = n - i;
    const int pick = i + std::min(span - 1, static_cast<int>(uniform01(rng) * span));
    std::swap(idx[i], idx[pick]);
  }
  idx.resize(count);
  return idx;
}

ModelParams stochastic_grad(const LocalTask& task, const ModelParams& w, int batch_size,
                            Rng& rng, kernels::Exec exec) {
  check_dimension(task, w);
  const int count = data_point_count(task);
  if (count == 0) throw InvalidArgument("stochastic_grad: empty local dataset");
  if (batch_size < 1 || batch_size > count) {
    throw InvalidArgument(
        fmt::format("batch size {} outside 1..{}", batch_size, count));
  }
  if (batch_size == count) return local_grad(task, w, exec);

  const auto picks = sample_without_replacement(count, batch_size, rng);
  const double weight = static_cast<double>(count) / batch_size;

  return std::visit(
      Overloaded{
          [&](const QuadraticTask& q) -> ModelParams {
            ModelParams g = ModelParams::Zero(w.size());
            for (int r : picks) {
              const double residual = q.A.row(r).dot(w) - q.b(r);
              g += residual * q.A.row(r).transpose();
            }
            return weight * g;
          },
          [&](const HingeTask& h) -> ModelParams {
            std::vector<int> rows(picks.size());
            for (std::size_t s = 0; s < picks.size(); ++s) rows[s] = h.rows[picks[s]];
            ModelParams g;
            hinge_eval(h, rows, weight * h.scale, w, &g, exec);
            return g;
          },
      },
      task);
}

double classification_accuracy(const ModelParams& w, const SampleSet& data) {
  const auto samples = data.features.rows();
  if (samples == 0) return 0.0;
  const auto dim = data.features.cols();
  if (w.size() != data.classes * dim) {
    throw InvalidArgument("classification_accuracy: model size mismatch");
  }
  // Row-major classes x dim viewed as a matrix.
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      weights(w.data(), data.classes, dim);
  const Eigen::MatrixXd scores = data.features * weights.transpose();
  long correct = 0;
  for (Eigen::Index s = 0; s < samples; ++s) {
    Eigen::Index best = 0;
    scores.row(s).maxCoeff(&best);
    if (best == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples);
}

void validate(const StepPolicy& policy) {
  if (!(policy.alpha > 0.0)) throw InvalidArgument("step size alpha must be positive");
  if (policy.kind == StepPolicy::Kind::diminishing) {
    if (!(policy.gamma > 0.0)) throw InvalidArgument("step decay gamma must be positive");
    if (!(policy.theta >= 0.5 && policy.theta <= 1.0)) {
      throw InvalidArgument("step exponent theta must lie in [0.5, 1]");
    }
  }
}

double step_size(const StepPolicy& policy, long long k) {
  if (k < 0) throw InvalidArgument("step_size: iteration must be non-negative");
  if (policy.kind == StepPolicy::Kind::constant) return policy.alpha;
  const double base = 1.0 + static_cast<double>(k) / policy.gamma;
  if (policy.theta == 0.5) return policy.alpha / std::sqrt(base);
  if (policy.theta == 1.0) return policy.alpha / base;
  return policy.alpha / std::pow(base, policy.theta);
}

ModelParams global_optimum(const std::vector<LocalTask>& tasks) {
  if (tasks.empty()) throw InvalidArgument("global_optimum: no tasks");
  const int n = model_dimension(tasks.front());
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (const auto& task : tasks) {
    const auto* q = std::get_if<QuadraticTask>(&task);
    if (!q) throw Unsupported("global_optimum: closed form exists for quadratic tasks only");
    if (q->A.cols() != n) throw InvalidArgument("global_optimum: task dimensions differ");
    normal.noalias() += q->A.transpose() * q->A;
    rhs.noalias() += q->A.transpose() * q->b;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible()) throw NumericFailure("global_optimum: sum of A_i^T A_i is singular");
  return lu.solve(rhs);
}

double global_loss(const std::vector<LocalTask>& tasks, const ModelParams& w) {
  double total = 0.0;
  for (const auto& t : tasks) total += local_loss(t, w);
  return total / static_cast<double>(tasks.size());
}

ModelParams global_grad(const std::vector<LocalTask>& tasks, const ModelParams& w) {
  ModelParams g = ModelParams::Zero(w.size());
  for (const auto& t : tasks) g += local_grad(t, w);
  return g / static_cast<double>(tasks.size());
}

ProblemConstants estimate_constants(const std::vector<LocalTask>& tasks,
                                    const std::vector<ModelParams>& probes) {
  if (probes.size() < 2) throw InvalidArgument("estimate_constants needs >= 2 probe points");
  if (tasks.empty()) throw InvalidArgument("estimate_constants: no tasks");

  const std::size_t m = tasks.size();
  std::vector<std::vector<ModelParams>> grads(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& w : probes) grads[i].push_back(local_grad(tasks[i], w));
  }

  ProblemConstants out;
  out.strong_convexity = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < probes.size(); ++a) {
      for (std::size_t b = a + 1; b < probes.size(); ++b) {
        const ModelParams dw = probes[a] - probes[b];
        const double dist2 = dw.squaredNorm();
        if (dist2 == 0.0) continue;
        const ModelParams dg = grads[i][a] - grads[i][b];
        out.smoothness = std::max(out.smoothness, dg.norm() / std::sqrt(dist2));
        out.strong_convexity = std::min(out.strong_convexity, dg.dot(dw) / dist2);
      }
    }
  }
  if (!std::isfinite(out.strong_convexity)) {
    throw InvalidArgument("estimate_constants: probe points must not all coincide");
  }

  for (std::size_t p = 0; p < probes.size(); ++p) {
    ModelParams mean = ModelParams::Zero(probes[p].size());
    for (std::size_t i = 0; i < m; ++i) mean += grads[i][p];
    mean /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      out.heterogeneity = std::max(out.heterogeneity, (grads[i][p] - mean).norm());
    }
  }

  const bool all_quadratic = std::all_of(tasks.begin(), tasks.end(), [](const LocalTask& t) {
    return std::holds_alternative<QuadraticTask>(t);
  });
  if (all_quadratic) {
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& t : tasks) {
      const auto& q = std::get<QuadraticTask>(t);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A.transpose() * q.A);
      hi = std::max(hi, eig.eigenvalues().maxCoeff());
      lo = std::min(lo, eig.eigenvalues().minCoeff());
    }
    out.spectral_smoothness = hi;
    out.spectral_convexity = lo;
  }
  return out;
}

}  // namespace efhc
