#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nnwm/tensor.hpp"

namespace nnwm {

/// Labeled image set. Images are (N, C, H, W), scaled to [0,1] at ingest and
/// per-channel mean-centered by the normalization step of the producing
/// pipeline.
struct Dataset {
  TensorF images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string tag;

  int size() const { return images.empty() ? 0 : images.dim(0); }
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Synthetic task description. Each class is a procedural template (an
/// oriented grating plus a Gaussian blob with class-specific parameters)
/// rendered at image_size and replicated to 3 channels; samples add i.i.d.
/// pixel noise of standard deviation `noise`.
struct SynthSpec {
  int num_classes = 4;
  int per_class_train = 500;
  int per_class_test = 125;
  int image_size = 16;
  double noise = 0.3;
  std::uint64_t seed = 11;
};

/// Deterministic in the spec: templates come from stream kStreamTemplates,
/// train and test noise from disjoint streams. Images are clamped to [0,1]
/// and then mean-centered with train-split channel means.
TrainTest synth_dataset(const SynthSpec& spec);

/// Same generator family, different task: the seed is rerouted through
/// kStreamAltDomain, which yields a fresh set of class templates.
SynthSpec alt_domain(const SynthSpec& spec);

/// Reads the six standard CIFAR-10 binary batch files (data_batch_1..5.bin,
/// test_batch.bin) from `dir`. Each record is 3073 bytes: a label byte, then
/// 1024 red, 1024 green, 1024 blue bytes, each channel row-major 32x32.
/// Files whose size is not a multiple of 3073 are rejected with the byte
/// offset of the offending record. Pixels are scaled to [0,1]; centering is
/// left to the caller (normalize_pair).
TrainTest load_cifar10_binary(const std::filesystem::path& dir);

/// Per-channel means of a dataset's images.
std::vector<double> channel_means(const Dataset& ds);

/// Subtracts per-channel means (computed on `train`) from both splits.
void normalize_pair(Dataset& train, Dataset& test);

/// Seeded shuffle, contiguous split by fractions (must sum to 1), then
/// centering of every split with channel means taken from the first split
/// only. Throws ConfigError if any split would be empty.
std::vector<Dataset> split_and_normalize(const Dataset& ds, std::span<const double> fractions,
                                         std::uint64_t seed);

}  // namespace nnwm
