#include "nnwm/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "nnwm/error.hpp"
#include "nnwm/rng.hpp"

namespace nnwm {

namespace {

struct ClassTemplate {
  double fx, fy, phase;      // grating direction (cycles per image) and phase
  double grating_amp;
  double cx, cy, radius;     // blob center and spread, in pixels
  double blob_amp;
};

// One template per class, drawn sequentially from the template stream.
std::vector<ClassTemplate> make_templates(int num_classes, int size, SplitMix64& rng) {
  std::vector<ClassTemplate> ts;
  ts.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    ClassTemplate t{};
    const double theta = 2.0 * M_PI * rng.next_unit();
    const double freq = 1.5 + 2.5 * rng.next_unit();
    t.fx = freq * std::cos(theta);
    t.fy = freq * std::sin(theta);
    t.phase = 2.0 * M_PI * rng.next_unit();
    t.grating_amp = 0.25 + 0.15 * rng.next_unit();
    t.cx = rng.next_unit() * size;
    t.cy = rng.next_unit() * size;
    t.radius = size * (0.15 + 0.15 * rng.next_unit());
    const double sign = rng.next_unit() < 0.5 ? -1.0 : 1.0;
    t.blob_amp = sign * (0.25 + 0.20 * rng.next_unit());
    ts.push_back(t);
  }
  return ts;
}

double template_value(const ClassTemplate& t, int size, int y, int x) {
  const double u = static_cast<double>(x) / size;
  const double v = static_cast<double>(y) / size;
  const double grating = t.grating_amp * std::sin(2.0 * M_PI * (t.fx * u + t.fy * v) + t.phase);
  const double dx = x - t.cx;
  const double dy = y - t.cy;
  const double blob = t.blob_amp * std::exp(-(dx * dx + dy * dy) / (2.0 * t.radius * t.radius));
  return 0.5 + grating + blob;
}

Dataset render_split(const std::vector<ClassTemplate>& templates, const SynthSpec& spec,
                     int per_class, SplitMix64 noise_rng, const std::string& tag) {
  const int size = spec.image_size;
  const int n = spec.num_classes * per_class;
  Dataset ds;
  ds.images = TensorF({n, 3, size, size});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = spec.num_classes;
  ds.tag = tag;
  int row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < per_class; ++s, ++row) {
      ds.labels[static_cast<std::size_t>(row)] = c;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          double v = template_value(templates[static_cast<std::size_t>(c)], size, y, x);
          v += spec.noise * noise_rng.next_normal();
          v = std::clamp(v, 0.0, 1.0);
          const float fv = static_cast<float>(v);
          for (int ch = 0; ch < 3; ++ch) ds.images.at(row, ch, y, x) = fv;
        }
      }
    }
  }
  return ds;
}

void subtract_channel_means(Dataset& ds, const std::vector<double>& means) {
  const int c = ds.images.dim(1);
  const int plane = ds.images.dim(2) * ds.images.dim(3);
  for (int i = 0; i < ds.size(); ++i) {
    for (int ch = 0; ch < c; ++ch) {
      float* p = ds.images.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      const float m = static_cast<float>(means[static_cast<std::size_t>(ch)]);
      for (int k = 0; k < plane; ++k) p[k] -= m;
    }
  }
}

}  // namespace

std::vector<double> channel_means(const Dataset& ds) {
  const int c = ds.images.dim(1);
  const int plane = ds.images.dim(2) * ds.images.dim(3);
  std::vector<double> means(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < ds.size(); ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const float* p = ds.images.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      double sum = 0.0;
      for (int k = 0; k < plane; ++k) sum += p[k];
      means[static_cast<std::size_t>(ch)] += sum;
    }
  }
  const double denom = static_cast<double>(ds.size()) * plane;
  for (double& m : means) m /= denom;
  return means;
}

void normalize_pair(Dataset& train, Dataset& test) {
  const std::vector<double> means = channel_means(train);
  subtract_channel_means(train, means);
  subtract_channel_means(test, means);
}

TrainTest synth_dataset(const SynthSpec& spec) {
  if (spec.image_size < 8) throw ConfigError("synthetic image size must be >= 8");
  if (spec.num_classes < 2) throw ConfigError("synthetic task needs >= 2 classes");
  if (spec.per_class_train < 1 || spec.per_class_test < 1) {
    throw ConfigError("synthetic task needs at least one sample per class and split");
  }
  SplitMix64 template_rng(derive_stream(spec.seed, kStreamTemplates));
  const auto templates = make_templates(spec.num_classes, spec.image_size, template_rng);

  TrainTest tt;
  tt.train = render_split(templates, spec, spec.per_class_train,
                          SplitMix64(derive_stream(spec.seed, kStreamTrainNoise)), "synth-train");
  tt.test = render_split(templates, spec, spec.per_class_test,
                         SplitMix64(derive_stream(spec.seed, kStreamTestNoise)), "synth-test");
  normalize_pair(tt.train, tt.test);
  return tt;
}

SynthSpec alt_domain(const SynthSpec& spec) {
  SynthSpec alt = spec;
  alt.seed = derive_stream(spec.seed, kStreamAltDomain);
  return alt;
}

namespace {

constexpr int kCifarRecord = 3073;
constexpr int kCifarPlane = 1024;

void append_cifar_file(const std::filesystem::path& file, std::vector<unsigned char>& labels,
                       std::vector<unsigned char>& pixels) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = bytes.size();
  if (n % kCifarRecord != 0) {
    const std::size_t offset = (n / kCifarRecord) * kCifarRecord;
    throw DataError(file.string() + ": truncated record at byte offset " +
                    std::to_string(offset));
  }
  for (std::size_t r = 0; r < n; r += kCifarRecord) {
    const unsigned char label = static_cast<unsigned char>(bytes[r]);
    if (label > 9) {
      throw DataError(file.string() + ": invalid label at byte offset " + std::to_string(r));
    }
    labels.push_back(label);
    pixels.insert(pixels.end(), bytes.begin() + static_cast<long>(r) + 1,
                  bytes.begin() + static_cast<long>(r) + kCifarRecord);
  }
}

Dataset cifar_dataset(const std::vector<unsigned char>& labels,
                      const std::vector<unsigned char>& pixels, const std::string& tag) {
  const int n = static_cast<int>(labels.size());
  Dataset ds;
  ds.images = TensorF({n, 3, 32, 32});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = 10;
  ds.tag = tag;
  for (int i = 0; i < n; ++i) {
    ds.labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)];
    const unsigned char* rec = pixels.data() + static_cast<std::size_t>(i) * 3 * kCifarPlane;
    for (int ch = 0; ch < 3; ++ch) {
      for (int p = 0; p < kCifarPlane; ++p) {
        ds.images[((static_cast<std::size_t>(i) * 3 + ch) * kCifarPlane) + p] =
            static_cast<float>(rec[ch * kCifarPlane + p]) / 255.0f;
      }
    }
  }
  return ds;
}

}  // namespace

TrainTest load_cifar10_binary(const std::filesystem::path& dir) {
  std::vector<unsigned char> train_labels, train_pixels;
  for (int b = 1; b <= 5; ++b) {
    append_cifar_file(dir / ("data_batch_" + std::to_string(b) + ".bin"), train_labels,
                      train_pixels);
  }
  std::vector<unsigned char> test_labels, test_pixels;
  append_cifar_file(dir / "test_batch.bin", test_labels, test_pixels);

  TrainTest tt;
  tt.train = cifar_dataset(train_labels, train_pixels, "cifar10-train");
  tt.test = cifar_dataset(test_labels, test_pixels, "cifar10-test");
  return tt;
}

std::vector<Dataset> split_and_normalize(const Dataset& ds, std::span<const double> fractions,
                                         std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("need at least one split fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  const int n = ds.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(derive_stream(seed, kStreamSplit));
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  std::vector<int> counts;
  int assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    int c = i + 1 == fractions.size() ? n - assigned
                                      : static_cast<int>(std::floor(fractions[i] * n));
    counts.push_back(c);
    assigned += c;
  }
  for (int c : counts) {
    if (c <= 0) throw ConfigError("split would be empty");
  }

  const int ch = ds.images.dim(1);
  const int plane = ds.images.dim(2) * ds.images.dim(3);
  const std::size_t stride = static_cast<std::size_t>(ch) * plane;
  std::vector<Dataset> splits;
  int at = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    Dataset part;
    part.images = TensorF({counts[s], ch, ds.images.dim(2), ds.images.dim(3)});
    part.labels.resize(static_cast<std::size_t>(counts[s]));
    part.num_classes = ds.num_classes;
    part.tag = ds.tag + ":split" + std::to_string(s);
    for (int i = 0; i < counts[s]; ++i) {
      const int src = order[static_cast<std::size_t>(at + i)];
      std::copy_n(ds.images.data() + src * stride, stride, part.images.data() + i * stride);
      part.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    }
    at += counts[s];
    splits.push_back(std::move(part));
  }

  const std::vector<double> means = channel_means(splits[0]);
  for (Dataset& part : splits) subtract_channel_means(part, means);
  return splits;
}

}  // namespace nnwm
