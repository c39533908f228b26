#include "adalase/config.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "adalase/error.hpp"
#include "adalase/io.hpp"

namespace adalase {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Typed, strict view of one JSON object.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(label() + " must be an object", path_);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::size_t size(const std::string& key, std::size_t dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_number_unsigned()) fail(key, "must be a non-negative integer");
    return v->get<std::size_t>();
  }
  std::uint64_t u64(const std::string& key, std::uint64_t dflt) { return size(key, dflt); }
  double number(const std::string& key, double dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_number()) fail(key, "must be a number");
    return v->get<double>();
  }
  bool boolean(const std::string& key, bool dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_boolean()) fail(key, "must be true or false");
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& dflt) {
    const json* v = raw(key);
    if (!v) return dflt;
    if (!v->is_string()) fail(key, "must be a string");
    return v->get<std::string>();
  }
  std::optional<Reader> object(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    return Reader(*v, join(path_, key));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(join(path_, key) + " " + msg, join(path_, key));
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown key '" + join(path_, it.key()) + "'", join(path_, it.key()));
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto with_field_prefix(const std::string& prefix, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    if (e.field().empty()) throw ConfigError(prefix + ": " + e.what(), prefix);
    if (e.field().rfind(prefix, 0) == 0) throw;
    throw ConfigError(prefix + "." + e.what(), prefix + "." + e.field());
  }
}

AugSpec read_aug(Reader r, AugSpec spec) {
  if (r.has("kind")) {
    const std::string kind = r.string("kind", "");
    spec.kind = with_field_prefix(join(r.path(), "kind"), [&] { return aug_kind_from_string(kind); });
  }
  spec.alpha = r.number("alpha", spec.alpha);
  spec.mask_fraction = r.number("mask_fraction", spec.mask_fraction);
  spec.shift_fraction_max = r.number("shift_fraction_max", spec.shift_fraction_max);
  spec.degree_range = r.number("degree_range", spec.degree_range);
  spec.pad = r.size("pad", spec.pad);
  r.finish();
  with_field_prefix(r.path(), [&] { spec.validate(); });
  return spec;
}

json aug_json(const AugSpec& a) {
  return {{"kind", to_string(a.kind)},
          {"alpha", a.alpha},
          {"mask_fraction", a.mask_fraction},
          {"shift_fraction_max", a.shift_fraction_max},
          {"degree_range", a.degree_range},
          {"pad", a.pad}};
}

DataSource data_source_from_string(const std::string& s) {
  if (s == "synthetic") return DataSource::synthetic;
  if (s == "idx") return DataSource::idx;
  if (s == "cifar") return DataSource::cifar;
  if (s == "raw") return DataSource::raw;
  throw ConfigError("data.source must be one of synthetic, idx, cifar, raw (got '" + s + "')",
                    "data.source");
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::idx: return "idx";
    case DataSource::cifar: return "cifar";
    case DataSource::raw: return "raw";
  }
  return "synthetic";
}

std::string to_string(SyntheticKind k) {
  return k == SyntheticKind::two_gaussians ? "two_gaussians" : "striped_patches";
}

DataConfig read_data(Reader r) {
  DataConfig d;
  d.source = data_source_from_string(r.string("source", "synthetic"));
  const std::string gen = r.string("generator", "striped_patches");
  d.generator = with_field_prefix("data.generator", [&] { return synthetic_kind_from_string(gen); });
  d.synthetic.side = r.size("side", d.synthetic.side);
  d.synthetic.noise = r.number("noise", d.synthetic.noise);
  d.synthetic.separation_sigmas = r.number("separation_sigmas", d.synthetic.separation_sigmas);
  d.synthetic.classes = r.size("classes", d.synthetic.classes);
  d.train_pool = r.size("train_pool", d.train_pool);
  d.test_pool = r.size("test_pool", d.test_pool);
  d.data_seed = r.u64("data_seed", d.data_seed);
  d.train_images = r.string("train_images", "");
  d.train_labels = r.string("train_labels", "");
  d.test_images = r.string("test_images", "");
  d.test_labels = r.string("test_labels", "");
  d.train_count = r.size("train_count", 0);
  d.val_count = r.size("val_count", 0);
  d.test_count = r.size("test_count", 0);
  d.split_seed = r.u64("split_seed", 0);
  r.finish();

  if (d.source == DataSource::synthetic) {
    if (d.synthetic.side < 2) throw ConfigError("data.side must be >= 2", "data.side");
    if (!(d.synthetic.noise >= 0.0)) throw ConfigError("data.noise must be >= 0", "data.noise");
    if (d.train_pool < 2) throw ConfigError("data.train_pool must be >= 2", "data.train_pool");
    if (d.test_pool < 2) throw ConfigError("data.test_pool must be >= 2", "data.test_pool");
  } else {
    if (d.train_images.empty()) {
      throw ConfigError("data.train_images is required for source " + to_string(d.source),
                        "data.train_images");
    }
    if (d.test_images.empty()) {
      throw ConfigError("data.test_images is required for source " + to_string(d.source),
                        "data.test_images");
    }
    if (d.source == DataSource::idx && (d.train_labels.empty() || d.test_labels.empty())) {
      throw ConfigError("idx data needs train_labels and test_labels",
                        d.train_labels.empty() ? "data.train_labels" : "data.test_labels");
    }
  }
  return d;
}

ModelConfig read_model(Reader r) {
  ModelConfig m;
  const std::string arch = r.string("arch", "mlp");
  if (arch == "mlp") {
    m.arch = Arch::mlp;
  } else if (arch == "tiny_resnet") {
    m.arch = Arch::tiny_resnet;
  } else {
    throw ConfigError("model.arch must be mlp or tiny_resnet (got '" + arch + "')", "model.arch");
  }
  if (const json* h = r.raw("hidden")) {
    if (!h->is_array() || h->size() != 3 ||
        !std::all_of(h->begin(), h->end(), [](const json& v) { return v.is_number_unsigned(); })) {
      throw ConfigError("model.hidden must be [channels, height, width]", "model.hidden");
    }
    m.hidden = {(*h)[0].get<std::size_t>(), (*h)[1].get<std::size_t>(), (*h)[2].get<std::size_t>()};
    if (m.hidden.size() == 0) throw ConfigError("model.hidden must be non-empty", "model.hidden");
  }
  m.channels = r.size("channels", m.channels);
  if (m.channels == 0) throw ConfigError("model.channels must be >= 1", "model.channels");
  m.init_checkpoint = r.string("init_checkpoint", "");
  r.finish();
  return m;
}

void read_adalase(Reader r, AdaLaseConfig& a) {
  a.eta = r.number("eta", a.eta);
  a.avg_window = r.size("avg_window", a.avg_window);
  a.d_scale = r.number("d_scale", a.d_scale);
  const std::string norm = r.string("dot_normalization", "raw");
  if (norm == "raw") {
    a.dot_normalization = DotNormalization::raw;
  } else if (norm == "cosine") {
    a.dot_normalization = DotNormalization::cosine;
  } else {
    throw ConfigError("adalase.dot_normalization must be raw or cosine", "adalase.dot_normalization");
  }
  a.freeze = r.boolean("freeze", a.freeze);
  r.finish();
  a.validate();
}

void read_train(Reader r, TrainConfig& t) {
  t.epochs = r.size("epochs", t.epochs);
  t.batch_size = r.size("batch_size", t.batch_size);
  t.base_lr = r.number("base_lr", t.base_lr);
  t.momentum = r.number("momentum", t.momentum);
  if (r.has("schedule")) {
    const std::string s = r.string("schedule", "");
    t.schedule = with_field_prefix("train.schedule", [&] { return RatioSchedule::parse(s); });
  }
  if (r.has("reference")) t.reference = reference_source_from_string(r.string("reference", ""));
  t.standard_input_augs = r.boolean("standard_input_augs", t.standard_input_augs);
  t.probe = r.boolean("probe", t.probe);
  t.probe_batch = r.size("probe_batch", t.probe_batch);
  if (auto a = r.object("train_aug")) t.train_aug = read_aug(*a, t.train_aug);
  if (auto a = r.object("pseudo_val_aug")) t.pseudo_val_aug = read_aug(*a, t.pseudo_val_aug);
  r.finish();
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  Reader top(doc, "");
  ExperimentConfig cfg;
  cfg.preset = top.string("preset", "");
  cfg.seed = top.u64("seed", 0);
  cfg.output_dir = top.string("output_dir", cfg.output_dir.string());
  if (auto r = top.object("data")) cfg.data = read_data(*r);
  if (auto r = top.object("model")) cfg.model = read_model(*r);
  if (auto r = top.object("train")) read_train(*r, cfg.train);
  if (auto r = top.object("adalase")) read_adalase(*r, cfg.train.adalase);
  top.finish();
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  if (cfg.train.schedule.shape == ScheduleShape::fixed) {
    const std::size_t k = cfg.model.arch == Arch::mlp ? 2 : 4;
    if (cfg.train.schedule.fixed_index >= k) {
      throw ConfigError("train.schedule fixed index must be < " + std::to_string(k),
                        "train.schedule");
    }
  }
  if (cfg.train.reference == ReferenceSource::validation && cfg.data.val_count == 0) {
    throw ConfigError("train.reference 'validation' needs data.val_count > 0", "data.val_count");
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config_text(text);
}

json to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  const auto& t = cfg.train;
  const auto& a = t.adalase;
  json data = {{"source", to_string(d.source)},
               {"train_count", d.train_count},
               {"val_count", d.val_count},
               {"test_count", d.test_count},
               {"split_seed", d.split_seed}};
  if (d.source == DataSource::synthetic) {
    data["generator"] = to_string(d.generator);
    data["side"] = d.synthetic.side;
    data["noise"] = d.synthetic.noise;
    data["separation_sigmas"] = d.synthetic.separation_sigmas;
    data["classes"] = d.synthetic.classes;
    data["train_pool"] = d.train_pool;
    data["test_pool"] = d.test_pool;
    data["data_seed"] = d.data_seed;
  } else {
    data["train_images"] = d.train_images.string();
    data["test_images"] = d.test_images.string();
    if (d.source == DataSource::idx) {
      data["train_labels"] = d.train_labels.string();
      data["test_labels"] = d.test_labels.string();
    }
  }
  json model = {{"arch", cfg.model.arch == Arch::mlp ? "mlp" : "tiny_resnet"}};
  if (cfg.model.arch == Arch::mlp) {
    model["hidden"] = {cfg.model.hidden.c, cfg.model.hidden.h, cfg.model.hidden.w};
  } else {
    model["channels"] = cfg.model.channels;
  }
  if (!cfg.model.init_checkpoint.empty()) model["init_checkpoint"] = cfg.model.init_checkpoint.string();

  return {
      {"preset", cfg.preset},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir.string()},
      {"data", data},
      {"model", model},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"base_lr", t.base_lr},
        {"momentum", t.momentum},
        {"schedule", t.schedule.str()},
        {"reference", to_string(t.reference)},
        {"standard_input_augs", t.standard_input_augs},
        {"probe", t.probe},
        {"probe_batch", t.probe_batch},
        {"train_aug", aug_json(t.train_aug)},
        {"pseudo_val_aug", aug_json(t.pseudo_val_aug)}}},
      {"adalase",
       {{"eta", a.eta},
        {"avg_window", a.avg_window},
        {"d_scale", a.d_scale},
        {"dot_normalization", a.dot_normalization == DotNormalization::raw ? "raw" : "cosine"},
        {"freeze", a.freeze}}},
  };
}

void check_paths(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  auto need = [](const std::filesystem::path& p, const char* field) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw ConfigError(std::string(field) + ": no such file '" + p.string() + "'", field);
    }
  };
  if (d.source != DataSource::synthetic) {
    need(d.train_images, "data.train_images");
    need(d.test_images, "data.test_images");
    need(d.train_labels, "data.train_labels");
    need(d.test_labels, "data.test_labels");
  }
  need(cfg.model.init_checkpoint, "model.init_checkpoint");
}

DataSplits build_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  Dataset train_pool, test_pool;
  switch (d.source) {
    case DataSource::synthetic: {
      const Dataset all = gen_synthetic(d.generator, d.train_pool + d.test_pool, d.data_seed, d.synthetic);
      std::vector<std::size_t> tr(d.train_pool), te(d.test_pool);
      std::iota(tr.begin(), tr.end(), std::size_t{0});
      std::iota(te.begin(), te.end(), d.train_pool);
      train_pool = select(all, tr, Split::train);
      test_pool = select(all, te, Split::test);
      break;
    }
    case DataSource::idx:
      train_pool = load_idx(d.train_images, d.train_labels, Split::train);
      test_pool = load_idx(d.test_images, d.test_labels, Split::test);
      break;
    case DataSource::cifar:
      train_pool = load_cifar_bin(d.train_images, Split::train);
      test_pool = load_cifar_bin(d.test_images, Split::test);
      break;
    case DataSource::raw:
      train_pool = load_raw(d.train_images, Split::train);
      test_pool = load_raw(d.test_images, Split::test);
      break;
  }
  if (train_pool.sample_shape != test_pool.sample_shape) {
    throw ConfigError("train and test samples have different shapes", "data");
  }
  test_pool.num_classes = train_pool.num_classes = std::max(train_pool.num_classes, test_pool.num_classes);
  return make_splits(train_pool, test_pool,
                     SplitSpec{d.train_count, d.val_count, d.test_count, d.split_seed});
}

Network build_network(const ExperimentConfig& cfg, const MapShape& input, std::size_t classes) {
  Network net = cfg.model.arch == Arch::mlp ? make_mlp(input, cfg.model.hidden, classes)
                                            : make_tiny_resnet(input, cfg.model.channels, classes);
  return net;
}

}  // namespace adalase
