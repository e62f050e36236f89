#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "efhc/kernels.hpp"
#include "efhc/rng.hpp"

namespace efhc {

using ModelParams = Eigen::VectorXd;

// F_i(w) = 1/2 ||A w - b||^2; each row of A is one data point.
struct QuadraticTask {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// Shared sample store for classification tasks; devices hold row indices.
struct SampleSet {
  Eigen::MatrixXd features;  // samples x dim, scaled to [0, 1]
  std::vector<int> labels;
  int classes = 0;
};

// Multiclass hinge over this device's rows plus lambda/2 ||w||^2. The model
// is classes x dim, flattened row-major. `scale` multiplies each sample's
// margin loss (1 gives the plain sum).
struct HingeTask {
  std::shared_ptr<const SampleSet> data;
  std::vector<int> rows;
  double lambda = 1e-3;
  double scale = 1.0;

  int dimension() const {
    return data->classes * static_cast<int>(data->features.cols());
  }
};

using LocalTask = std::variant<QuadraticTask, HingeTask>;

int model_dimension(const LocalTask& task);
int data_point_count(const LocalTask& task);

double local_loss(const LocalTask& task, const ModelParams& w,
                  kernels::Exec exec = kernels::default_exec());
ModelParams local_grad(const LocalTask& task, const ModelParams& w,
                       kernels::Exec exec = kernels::default_exec());

// Unbiased minibatch estimate of local_grad: the mean per-sample gradient over
// a uniform draw without replacement, times the local data-point count. A
// full batch returns local_grad exactly.
ModelParams stochastic_grad(const LocalTask& task, const ModelParams& w, int batch_size,
                            Rng& rng, kernels::Exec exec = kernels::default_exec());

// First `count` entries of a uniform random permutation of 0..n-1.
std::vector<int> sample_without_replacement(int n, int count, Rng& rng);

// Fraction of samples whose highest-scoring class is the label.
double classification_accuracy(const ModelParams& w, const SampleSet& data);

// --- step sizes -------------------------------------------------------------

struct StepPolicy {
  enum class Kind { constant, diminishing };
  Kind kind = Kind::diminishing;
  double alpha = 0.1;   // constant step, or alpha^(0) for diminishing
  double gamma = 1.0;   // decay scale in alpha0 / (1 + k/gamma)^theta
  double theta = 0.5;

  static StepPolicy constant(double a) { return {Kind::constant, a, 1.0, 0.5}; }
  static StepPolicy diminishing(double a0, double g, double th) {
    return {Kind::diminishing, a0, g, th};
  }
};

void validate(const StepPolicy& policy);
double step_size(const StepPolicy& policy, long long k);

// --- verification helpers ----------------------------------------------------

// Minimizer of (1/m) sum F_i for quadratic tasks via the normal equations.
ModelParams global_optimum(const std::vector<LocalTask>& tasks);

double global_loss(const std::vector<LocalTask>& tasks, const ModelParams& w);
ModelParams global_grad(const std::vector<LocalTask>& tasks, const ModelParams& w);

struct ProblemConstants {
  double smoothness = 0.0;         // L-hat
  double strong_convexity = 0.0;   // mu-hat
  double heterogeneity = 0.0;      // delta-hat
  // Extreme eigenvalues of A_i^T A_i over devices, quadratic tasks only.
  std::optional<double> spectral_smoothness;
  std::optional<double> spectral_convexity;
};

ProblemConstants estimate_constants(const std::vector<LocalTask>& tasks,
                                    const std::vector<ModelParams>& probes);

}  // namespace efhc
