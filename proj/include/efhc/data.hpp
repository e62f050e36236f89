#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "efhc/learning.hpp"

namespace efhc {

using LabeledDataset = SampleSet;

// --- synthetic quadratic tasks ----------------------------------------------

struct QuadraticSpec {
  int devices = 10;
  int dimension = 10;
  int rows_per_device = 20;     // data points per device, >= dimension
  double heterogeneity = 1.0;   // spread of local minimizers around w°
  double curvature = 2.0;       // largest eigenvalue of each A_i^T A_i
  double condition_cap = 100.0; // bound on cond(A_i^T A_i)
  std::uint64_t seed = 1;
};

// A_i is Gaussian with its singular values clamped so cond(A_i^T A_i) stays
// within the cap; b_i = A_i (w° + heterogeneity * u_i) for a shared w° and
// unit vectors u_i.
std::vector<LocalTask> synth_quadratic(const QuadraticSpec& spec);

// --- label partitioning ------------------------------------------------------

struct LabelPartition {
  std::vector<std::vector<int>> labels;  // label subset per device
  std::vector<std::vector<int>> rows;    // sample indices per device
};

// Shuffled label list dealt round-robin, labels_per_device consecutive labels
// per device; each label's samples split evenly among its owners in dataset
// order, with the remainder going to the lowest device ids.
LabelPartition label_partition(const LabeledDataset& ds, int devices, int labels_per_device,
                               std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& rows);

// Gaussian class clusters in [0, 1]^dim, for tests and demos without image files.
LabeledDataset synth_classification(int samples, int classes, int dim, double spread,
                                    std::uint64_t seed);

// --- IDX files ----------------------------------------------------------------

struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

inline constexpr std::uint32_t kIdxLabels = 0x00000801;
inline constexpr std::uint32_t kIdxImages = 0x00000803;

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
IdxArray read_idx(const std::string& path);
std::vector<std::uint8_t> encode_idx(const IdxArray& idx);
void write_idx(const std::string& path, const IdxArray& idx);

// Images flattened to rows, pixels scaled to [0, 1].
Eigen::MatrixXd idx_to_features(const IdxArray& images);
std::vector<int> idx_to_labels(const IdxArray& labels);

// Image + label files -> dataset; `limit` > 0 keeps the first samples only.
LabeledDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                int limit = 0);

// --- bandwidths ------------------------------------------------------------------

struct BandwidthProfile {
  std::vector<double> bandwidth;  // b_i, one per device, all outgoing links
  double mean = 0.0;              // b_M
  double normalized_std = 0.0;    // sigma_N
};

BandwidthProfile assign_bandwidths(int devices, double mean, double normalized_std,
                                   std::uint64_t seed);

}  // namespace efhc
