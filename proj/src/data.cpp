#include "adalase/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "adalase/error.hpp"
#include "adalase/io.hpp"

namespace adalase {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

void Dataset::validate() const {
  if (images.size() != labels.size() * sample_shape.size()) {
    throw ValidationError("dataset: " + std::to_string(images.size()) + " pixels for " +
                          std::to_string(labels.size()) + " samples of size " +
                          std::to_string(sample_shape.size()));
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw ValidationError("dataset: label " + std::to_string(l) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
  for (float v : images) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError("dataset: pixel outside [0, 1]");
    }
  }
}

std::size_t Dataset::class_count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Batch gather(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t per = ds.sample_shape.size();
  Batch b{Tensor4(ds.sample_shape.with_batch(indices.size())), {}, {}};
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= ds.size()) throw RangeError("sample index " + std::to_string(src) + " out of range");
    auto dst = b.x.sample(i);
    for (std::size_t k = 0; k < per; ++k) dst[k] = static_cast<double>(ds.images[src * per + k]);
    b.labels.push_back(ds.labels[src]);
  }
  b.y = SoftLabels::one_hot(b.labels, ds.num_classes);
  return b;
}

// ---------------------------------------------------------------- IDX

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split) {
  const std::string ib = io::read_file(images);
  const std::string lb = io::read_file(labels);
  io::ByteReader ir(ib, "IDX images " + images.string());
  io::ByteReader lr(lb, "IDX labels " + labels.string());

  if (const auto magic = ir.u32be(); magic != 0x00000803) {
    throw FormatError("IDX images: bad magic " + std::to_string(magic) + " (expected 2051)");
  }
  const std::size_t n = ir.u32be(), rows = ir.u32be(), cols = ir.u32be();
  if (const auto magic = lr.u32be(); magic != 0x00000801) {
    throw FormatError("IDX labels: bad magic " + std::to_string(magic) + " (expected 2049)");
  }
  const std::size_t nl = lr.u32be();
  if (nl != n) {
    throw FormatError("IDX label count " + std::to_string(nl) + " does not match image count " +
                      std::to_string(n));
  }
  Dataset ds;
  ds.sample_shape = {1, rows, cols};
  ds.split = split;
  auto pixels = ir.take(n * rows * cols);
  auto raw_labels = lr.take(n);
  ds.images.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    ds.images[i] = static_cast<float>(static_cast<unsigned char>(pixels[i])) / 255.0f;
  }
  int max_label = 0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<unsigned char>(raw_labels[i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return ds;
}

// ---------------------------------------------------------------- CIFAR

Dataset load_cifar_bin(const std::filesystem::path& path, Split split) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  constexpr std::size_t kRecord = kPixels + 1;
  const std::string bytes = io::read_file(path);
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw FormatError("CIFAR binary " + path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a positive multiple of 3073");
  }
  const std::size_t n = bytes.size() / kRecord;
  Dataset ds;
  ds.sample_shape = {3, 32, 32};
  ds.split = split;
  ds.num_classes = 10;
  ds.images.resize(n * kPixels);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data() + i * kRecord);
    ds.labels[i] = rec[0];
    if (rec[0] >= 10) throw FormatError("CIFAR binary: label byte " + std::to_string(rec[0]) + " > 9");
    for (std::size_t k = 0; k < kPixels; ++k) {
      ds.images[i * kPixels + k] = static_cast<float>(rec[1 + k]) / 255.0f;
    }
  }
  return ds;
}

// ---------------------------------------------------------------- raw-with-header

void save_raw(const Dataset& ds, const std::filesystem::path& path) {
  nlohmann::json header = {
      {"format", "adalase-raw"},
      {"version", 1},
      {"shape", {ds.size(), ds.sample_shape.c, ds.sample_shape.h, ds.sample_shape.w}},
      {"dtype", "f32le"},
      {"num_classes", ds.num_classes},
      {"label_dtype", "i32le"},
  };
  std::string out = header.dump();
  out.push_back('\n');
  for (float v : ds.images) io::put_f32le(out, v);
  for (int l : ds.labels) io::put_u32le(out, static_cast<std::uint32_t>(l));
  io::write_file_atomic(path, out);
}

Dataset load_raw(const std::filesystem::path& path, Split split) {
  const std::string bytes = io::read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("raw dataset " + path.string() + ": missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("raw dataset header: " + std::string(e.what()));
  }
  Dataset ds;
  ds.split = split;
  std::size_t n = 0;
  try {
    if (header.at("format") != "adalase-raw") throw FormatError("raw dataset: unknown format tag");
    if (header.at("version") != 1) throw FormatError("raw dataset: unsupported version");
    if (header.at("dtype") != "f32le") throw FormatError("raw dataset: dtype must be f32le");
    if (header.value("label_dtype", "i32le") != "i32le") {
      throw FormatError("raw dataset: label_dtype must be i32le");
    }
    const auto shape = header.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 4) throw FormatError("raw dataset: shape must have 4 dims");
    n = shape[0];
    ds.sample_shape = {shape[1], shape[2], shape[3]};
    ds.num_classes = header.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("raw dataset header: " + std::string(e.what()));
  }
  io::ByteReader r(std::string_view(bytes).substr(nl + 1), "raw dataset " + path.string());
  ds.images.resize(n * ds.sample_shape.size());
  for (float& v : ds.images) v = r.f32le();
  ds.labels.resize(n);
  for (int& l : ds.labels) l = static_cast<int>(r.u32le());
  if (!r.done()) throw FormatError("raw dataset: trailing bytes after payload");
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------- synthetic

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "two_gaussians") return SyntheticKind::two_gaussians;
  if (name == "striped_patches") return SyntheticKind::striped_patches;
  throw ConfigError("unknown synthetic dataset '" + name + "'");
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed,
                      const SyntheticOptions& opts) {
  if (n < 2) throw RangeError("synthetic dataset needs n >= 2");
  Rng rng(seed, Stream::synthetic);
  const std::size_t side = opts.side;
  const std::size_t per = side * side;
  Dataset ds;
  ds.sample_shape = {1, side, side};
  ds.images.resize(n * per);
  ds.labels.resize(n);

  if (kind == SyntheticKind::two_gaussians) {
    ds.num_classes = 2;
    std::vector<double> dir(per);
    double norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    const double half = 0.5 * opts.separation_sigmas * opts.noise;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 2);
      const double sign = label == 0 ? -1.0 : 1.0;
      ds.labels[i] = label;
      for (std::size_t k = 0; k < per; ++k) {
        const double v = 0.5 + sign * half * dir[k] / norm + opts.noise * rng.normal();
        ds.images[i * per + k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    return ds;
  }

  // Sinusoidal stripes; the class is the stripe orientation.
  if (opts.classes != 2 && opts.classes != 4) {
    throw ConfigError("striped_patches supports 2 or 4 classes");
  }
  ds.num_classes = opts.classes;
  constexpr double kAngles[] = {0.0, 90.0, 45.0, 135.0};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % opts.classes);
    ds.labels[i] = label;
    const double theta = kAngles[label] * std::numbers::pi / 180.0;
    const double period = rng.uniform(3.0, 5.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double contrast = rng.uniform(0.2, 0.45);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        // Horizontal stripes vary along y.
        const double t = std::cos(theta) * static_cast<double>(y) + std::sin(theta) * static_cast<double>(x);
        const double v = 0.5 + contrast * std::cos(2.0 * std::numbers::pi * t / period + phase) +
                         opts.noise * rng.normal();
        ds.images[i * per + y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------- splits and batches

Dataset select(const Dataset& ds, std::span<const std::size_t> indices, Split split) {
  Dataset out;
  out.sample_shape = ds.sample_shape;
  out.num_classes = ds.num_classes;
  out.split = split;
  const std::size_t per = ds.sample_shape.size();
  out.images.reserve(indices.size() * per);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw RangeError("sample index out of range");
    out.images.insert(out.images.end(), ds.images.begin() + i * per, ds.images.begin() + (i + 1) * per);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

namespace {

std::vector<std::size_t> stratified_indices(const Dataset& ds, std::size_t count, Rng& rng) {
  if (count > ds.size()) {
    throw RangeError("subsample of " + std::to_string(count) + " from a set of " +
                     std::to_string(ds.size()));
  }
  const std::size_t k = ds.num_classes;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  // Largest-remainder quotas.
  std::vector<std::size_t> quota(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(count) * static_cast<double>(by_class[c].size()) /
                         static_cast<double>(ds.size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < count && r < remainders.size(); ++r) {
    const std::size_t c = remainders[r].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  for (std::size_t c = 0; c < k; ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + quota[c]);
  }
  std::shuffle(chosen.begin(), chosen.end(), rng.engine());
  return chosen;
}

}  // namespace

Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  Rng rng(seed, Stream::subsample);
  const auto idx = stratified_indices(ds, count, rng);
  return select(ds, idx, ds.split);
}

DataSplits make_splits(const Dataset& train_pool, const Dataset& test_pool, const SplitSpec& spec) {
  Rng rng(spec.seed, Stream::subsample);
  DataSplits out;
  if (spec.val_count + spec.train_count > train_pool.size()) {
    throw RangeError("train_count + val_count exceeds the " + std::to_string(train_pool.size()) +
                     " available training samples");
  }
  std::vector<std::size_t> rest(train_pool.size());
  std::iota(rest.begin(), rest.end(), std::size_t{0});
  if (spec.val_count > 0) {
    const auto val_idx = stratified_indices(train_pool, spec.val_count, rng);
    out.val = select(train_pool, val_idx, Split::val);
    std::vector<bool> taken(train_pool.size(), false);
    for (auto i : val_idx) taken[i] = true;
    std::erase_if(rest, [&](std::size_t i) { return taken[i]; });
  } else {
    out.val.sample_shape = train_pool.sample_shape;
    out.val.num_classes = train_pool.num_classes;
    out.val.split = Split::val;
  }
  Dataset remaining = select(train_pool, rest, Split::train);
  out.train = spec.train_count == 0 ? remaining
                                    : select(remaining, stratified_indices(remaining, spec.train_count, rng),
                                             Split::train);
  out.test = spec.test_count == 0
                 ? select(test_pool, [&] {
                     std::vector<std::size_t> all(test_pool.size());
                     std::iota(all.begin(), all.end(), std::size_t{0});
                     return all;
                   }(), Split::test)
                 : select(test_pool, stratified_indices(test_pool, spec.test_count, rng), Split::test);
  return out;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t dataset_size, std::size_t batch_size,
                                                 std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw RangeError("batch_size must be >= 1");
  Rng rng(seed, Stream::data_order, epoch);
  const auto order = rng.permutation(dataset_size);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

PseudoValBatch pseudo_val_batch(const Dataset& ds, std::size_t batch_size, const AugSpec& aug,
                                Rng& rng) {
  if (aug.mixes_labels()) {
    throw PolicyError("pseudo-validation batches need a label-preserving input augmentation, got " +
                      to_string(aug.kind));
  }
  if (ds.size() == 0) throw RangeError("pseudo-validation draw from an empty dataset");
  const std::size_t m = std::min(batch_size, ds.size());
  auto order = rng.permutation(ds.size());
  order.resize(m);
  PseudoValBatch out{gather(ds, order), {}};
  out.trace = sample_trace(aug, out.batch.x.shape(), rng);
  out.batch.x = apply_trace(out.trace, out.batch.x, out.batch.y).tensor;
  return out;
}

}  // namespace adalase
