#include "efhc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "efhc/error.hpp"
#include "efhc/rng.hpp"

namespace efhc {

std::vector<LocalTask> synth_quadratic(const QuadraticSpec& spec) {
  if (spec.devices < 1 || spec.dimension < 1) {
    throw InvalidArgument("synth_quadratic: devices and dimension must be >= 1");
  }
  if (spec.rows_per_device < spec.dimension) {
    throw InvalidArgument("synth_quadratic: rows_per_device must be >= dimension");
  }
  if (spec.heterogeneity < 0.0) throw InvalidArgument("heterogeneity must be >= 0");
  if (!(spec.curvature > 0.0) || !(spec.condition_cap >= 1.0)) {
    throw InvalidArgument("synth_quadratic: curvature > 0 and condition cap >= 1 required");
  }

  const int n = spec.dimension;
  auto shared = make_rng({spec.seed, 0x71ull});
  ModelParams center(n);
  for (int j = 0; j < n; ++j) center(j) = standard_normal(shared);

  // Singular values of A_i live in [s_max / sqrt(cap), s_max].
  const double s_max = std::sqrt(spec.curvature);
  const double s_min = s_max / std::sqrt(spec.condition_cap);

  std::vector<LocalTask> tasks;
  tasks.reserve(spec.devices);
  for (int i = 0; i < spec.devices; ++i) {
    auto rng = make_rng({spec.seed, 0x72ull, static_cast<std::uint64_t>(i)});
    Eigen::MatrixXd g(spec.rows_per_device, n);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = standard_normal(rng);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    const double top = s.maxCoeff();
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      s(k) = std::max(s(k) / top * s_max, s_min);
    }
    QuadraticTask task;
    task.A = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();

    ModelParams u(n);
    for (int j = 0; j < n; ++j) u(j) = standard_normal(rng);
    u /= u.norm();
    task.b = task.A * (center + spec.heterogeneity * u);
    tasks.emplace_back(std::move(task));
  }
  return tasks;
}

LabelPartition label_partition(const LabeledDataset& ds, int devices, int labels_per_device,
                               std::uint64_t seed) {
  const int classes = ds.classes;
  if (devices < 1) throw InvalidArgument("label_partition: devices must be >= 1");
  if (labels_per_device < 1 || labels_per_device > classes) {
    throw InvalidArgument(fmt::format("labels_per_device must lie in 1..{}", classes));
  }
  if (static_cast<long>(devices) * labels_per_device < classes) {
    throw InvalidArgument(fmt::format(
        "{} devices x {} labels cannot cover {} classes", devices, labels_per_device, classes));
  }
  if (ds.labels.size() != static_cast<std::size_t>(ds.features.rows())) {
    throw InvalidArgument("label_partition: feature and label counts differ");
  }

  std::vector<int> order(classes);
  for (int c = 0; c < classes; ++c) order[c] = c;
  auto rng = make_rng({seed, 0x4c50ull});
  for (int c = classes - 1; c > 0; --c) {
    const int pick = std::min(c, static_cast<int>(uniform01(rng) * (c + 1)));
    std::swap(order[c], order[pick]);
  }

  LabelPartition part;
  part.labels.resize(devices);
  part.rows.resize(devices);
  std::vector<std::vector<int>> owners(classes);
  for (int i = 0; i < devices; ++i) {
    for (int t = 0; t < labels_per_device; ++t) {
      const int label = order[(static_cast<long>(i) * labels_per_device + t) % classes];
      part.labels[i].push_back(label);
      owners[label].push_back(i);
    }
    std::sort(part.labels[i].begin(), part.labels[i].end());
  }

  std::vector<std::vector<int>> by_label(classes);
  for (std::size_t s = 0; s < ds.labels.size(); ++s) {
    const int y = ds.labels[s];
    if (y < 0 || y >= classes) {
      throw InvalidArgument(fmt::format("sample {} has label {} outside 0..{}", s, y, classes - 1));
    }
    by_label[y].push_back(static_cast<int>(s));
  }

  for (int c = 0; c < classes; ++c) {
    auto& own = owners[c];
    std::sort(own.begin(), own.end());
    const auto count = by_label[c].size();
    const auto base = count / own.size();
    const auto extra = count % own.size();
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < own.size(); ++t) {
      const auto take = base + (t < extra ? 1 : 0);
      auto& dst = part.rows[own[t]];
      dst.insert(dst.end(), by_label[c].begin() + cursor, by_label[c].begin() + cursor + take);
      cursor += take;
    }
  }
  for (auto& r : part.rows) std::sort(r.begin(), r.end());
  return part;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& rows) {
  LabeledDataset out;
  out.classes = ds.classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    out.features.row(static_cast<Eigen::Index>(s)) = ds.features.row(rows[s]);
    out.labels.push_back(ds.labels.at(rows[s]));
  }
  return out;
}

LabeledDataset synth_classification(int samples, int classes, int dim, double spread,
                                    std::uint64_t seed) {
  if (samples < 1 || classes < 1 || dim < 1) {
    throw InvalidArgument("synth_classification: sizes must be positive");
  }
  auto rng = make_rng({seed, 0x5343ull});
  Eigen::MatrixXd centers(classes, dim);
  for (Eigen::Index c = 0; c < classes; ++c) {
    for (Eigen::Index f = 0; f < dim; ++f) centers(c, f) = 0.2 + 0.6 * uniform01(rng);
  }
  LabeledDataset ds;
  ds.classes = classes;
  ds.features.resize(samples, dim);
  ds.labels.resize(samples);
  for (int s = 0; s < samples; ++s) {
    const int y = s % classes;
    ds.labels[s] = y;
    for (int f = 0; f < dim; ++f) {
      ds.features(s, f) = std::clamp(centers(y, f) + spread * standard_normal(rng), 0.0, 1.0);
    }
  }
  return ds;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) {
    throw FormatError(fmt::format("idx: header truncated at byte offset {} (need 4 bytes)",
                                  bytes.size()));
  }
  IdxArray idx;
  idx.magic = read_be32(bytes, 0);
  std::size_t rank = 0;
  if (idx.magic == kIdxLabels) {
    rank = 1;
  } else if (idx.magic == kIdxImages) {
    rank = 3;
  } else {
    throw FormatError(fmt::format(
        "idx: bad magic 0x{:08x} at byte offset 0 (expected 0x{:08x} or 0x{:08x})", idx.magic,
        kIdxLabels, kIdxImages));
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw FormatError(fmt::format(
        "idx: dimension header truncated at byte offset {} (expected {} header bytes)",
        bytes.size(), header));
  }
  std::size_t total = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    idx.dims.push_back(read_be32(bytes, 4 + 4 * d));
    total *= idx.dims.back();
  }
  const std::size_t actual = bytes.size() - header;
  if (actual < total) {
    throw FormatError(fmt::format(
        "idx: payload truncated at byte offset {}: expected {} payload bytes, found {}",
        bytes.size(), total, actual));
  }
  if (actual > total) {
    throw FormatError(fmt::format(
        "idx: {} trailing bytes after payload at byte offset {}", actual - total, header + total));
  }
  idx.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return idx;
}

IdxArray read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open idx file {}", path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const IdxArray& idx) {
  std::vector<std::uint8_t> out;
  put_be32(out, idx.magic);
  for (auto d : idx.dims) put_be32(out, d);
  out.insert(out.end(), idx.payload.begin(), idx.payload.end());
  return out;
}

void write_idx(const std::string& path, const IdxArray& idx) {
  const auto bytes = encode_idx(idx);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument(fmt::format("cannot write idx file {}", path));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Eigen::MatrixXd idx_to_features(const IdxArray& images) {
  if (images.magic != kIdxImages) throw FormatError("idx: not an image file");
  const Eigen::Index count = images.dims[0];
  const Eigen::Index pixels = static_cast<Eigen::Index>(images.dims[1]) * images.dims[2];
  Eigen::MatrixXd features(count, pixels);
  for (Eigen::Index s = 0; s < count; ++s) {
    for (Eigen::Index p = 0; p < pixels; ++p) {
      features(s, p) = images.payload[static_cast<std::size_t>(s * pixels + p)] / 255.0;
    }
  }
  return features;
}

std::vector<int> idx_to_labels(const IdxArray& labels) {
  if (labels.magic != kIdxLabels) throw FormatError("idx: not a label file");
  return {labels.payload.begin(), labels.payload.end()};
}

LabeledDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                int limit) {
  auto features = idx_to_features(read_idx(images_path));
  auto labels = idx_to_labels(read_idx(labels_path));
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw FormatError(fmt::format("idx: {} images but {} labels", features.rows(), labels.size()));
  }
  if (limit > 0 && limit < features.rows()) {
    features.conservativeResize(limit, Eigen::NoChange);
    labels.resize(limit);
  }
  LabeledDataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.classes = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

BandwidthProfile assign_bandwidths(int devices, double mean, double normalized_std,
                                   std::uint64_t seed) {
  if (devices < 0) throw InvalidArgument("assign_bandwidths: negative device count");
  if (!(mean > 0.0)) throw InvalidArgument("assign_bandwidths: mean bandwidth must be positive");
  if (!(normalized_std >= 0.0 && normalized_std < 1.0)) {
    throw InvalidArgument("assign_bandwidths: sigma_N must lie in [0, 1) to keep bandwidths positive");
  }
  BandwidthProfile profile;
  profile.mean = mean;
  profile.normalized_std = normalized_std;
  const double lo = (1.0 - normalized_std) * mean;
  const double hi = (1.0 + normalized_std) * mean;
  auto rng = make_rng({seed, 0x4257ull});
  for (int i = 0; i < devices; ++i) {
    profile.bandwidth.push_back(normalized_std == 0.0 ? mean : lo + (hi - lo) * uniform01(rng));
  }
  return profile;
}

}  // namespace efhc
