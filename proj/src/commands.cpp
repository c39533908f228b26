#include "adalase/commands.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "adalase/error.hpp"
#include "adalase/io.hpp"

namespace adalase {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Everything a run needs, resolved before any file is written.
struct Prepared {
  ExperimentConfig cfg;
  DataSplits data;
  std::uint64_t input_hash = 0;
};

std::uint64_t hash_dataset(const Dataset& ds, std::uint64_t h) {
  h = io::fnv1a({reinterpret_cast<const char*>(ds.images.data()), ds.images.size() * sizeof(float)}, h);
  return io::fnv1a({reinterpret_cast<const char*>(ds.labels.data()), ds.labels.size() * sizeof(int)}, h);
}

Prepared prepare(const std::filesystem::path& config_path, const CommandOptions& opts) {
  Prepared p;
  p.cfg = load_config(config_path);
  if (opts.seed) {
    p.cfg.seed = *opts.seed;
    p.cfg.train.seed = *opts.seed;
  }
  if (opts.out) p.cfg.output_dir = *opts.out;
  check_paths(p.cfg);
  try {
    p.data = build_data(p.cfg);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("data: ") + e.what(), "data");
  } catch (const RangeError& e) {
    throw ConfigError(std::string("data: ") + e.what(), "data");
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("data: ") + e.what(), "data");
  }
  std::uint64_t h = io::fnv1a(to_json(p.cfg).dump());
  h = hash_dataset(p.data.train, h);
  h = hash_dataset(p.data.val, h);
  p.input_hash = hash_dataset(p.data.test, h);
  return p;
}

Network make_network(const Prepared& p, TrainConfig& train_cfg) {
  Network net = build_network(p.cfg, p.data.train.sample_shape, p.data.train.num_classes);
  if (!p.cfg.model.init_checkpoint.empty()) {
    load_checkpoint(net, p.cfg.model.init_checkpoint);
    train_cfg.initialize = false;
  }
  return net;
}

/// Collects output files and commits them together with a manifest.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string contents) {
    files_.emplace_back(name, std::move(contents));
  }

  void commit(json manifest) {
    std::filesystem::create_directories(dir_);
    json outputs = json::object();
    for (const auto& [name, contents] : files_) {
      io::write_file_atomic(dir_ / name, contents);
      outputs[name] = io::hex64(io::fnv1a(contents));
    }
    manifest["outputs"] = outputs;
    io::write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

json base_manifest(const std::string& command, const Prepared& p) {
  return {{"command", command},
          {"effective_config", to_json(p.cfg)},
          {"seed", p.cfg.seed},
          {"input_hash", io::hex64(p.input_hash)},
          {"train_samples", p.data.train.size()},
          {"val_samples", p.data.val.size()},
          {"test_samples", p.data.test.size()}};
}

std::string checkpoint_bytes(const Network& net, const std::filesystem::path& dir) {
  // save_checkpoint writes atomically itself; stage through a temp path so
  // the checkpoint is committed together with the other outputs.
  const auto tmp = dir / ".checkpoint.staging";
  std::filesystem::create_directories(dir);
  save_checkpoint(net, tmp);
  std::string bytes = io::read_file(tmp);
  std::filesystem::remove(tmp);
  return bytes;
}

template <typename Body>
int guarded(std::ostream& err, Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what();
    if (!e.field().empty()) err << " [field: " << e.field() << "]";
    err << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

std::string metrics_csv(const TrainResult& result, std::size_t positions) {
  std::ostringstream os;
  os << "epoch,lr,L_train,L_DA,L_val,test_acc";
  for (std::size_t i = 0; i < positions; ++i) os << ",q_" << i;
  for (std::size_t i = 0; i < positions; ++i) os << ",probe_loss_" << i;
  os << "\n";
  for (const auto& m : result.epochs) {
    os << m.epoch << "," << num(m.lr) << "," << num(m.train_loss) << "," << num(m.reference_loss)
       << "," << num(m.val_loss) << "," << num(m.test_acc);
    for (double q : m.q) os << "," << num(q);
    for (std::size_t i = 0; i < positions; ++i) {
      os << "," << (i < m.probe_loss.size() ? num(m.probe_loss[i]) : "");
    }
    os << "\n";
  }
  return os.str();
}

std::string ratios_csv(const TrainResult& result, std::size_t positions) {
  std::ostringstream os;
  os << "epoch";
  for (std::size_t i = 0; i < positions; ++i) os << ",q_" << i;
  for (std::size_t i = 0; i < positions; ++i) os << ",hist_" << i;
  os << "\n";
  for (std::size_t e = 0; e < result.trajectory.size(); ++e) {
    os << e;
    for (double q : result.trajectory[e]) os << "," << num(q);
    for (std::size_t i = 0; i < positions; ++i) {
      os << "," << (e == 0 ? 0 : result.epochs[e - 1].histogram[i]);
    }
    os << "\n";
  }
  return os.str();
}

int cmd_train(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(config, opts);
    TrainConfig tc = p.cfg.train;
    Network net = make_network(p, tc);
    const TrainResult r = train(net, p.data, tc);

    OutputSet outputs(p.cfg.output_dir);
    outputs.add("metrics.csv", metrics_csv(r, net.num_taps()));
    outputs.add("ratios.csv", ratios_csv(r, net.num_taps()));
    outputs.add("checkpoint.adlw", checkpoint_bytes(net, outputs.dir()));
    json manifest = base_manifest("train", p);
    manifest["summary"] = {{"best_test_acc", r.best_test_acc},
                           {"best_epoch", r.best_epoch},
                           {"final_q", r.trajectory.back()},
                           {"param_hash", io::hex64(net.param_hash())}};
    outputs.commit(manifest);
    out << "best test accuracy " << num(r.best_test_acc) << " at epoch " << r.best_epoch
        << "; outputs in " << outputs.dir().string() << "\n";
    return 0;
  });
}

int cmd_audit(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(config, opts);
    if (!p.cfg.train.probe) throw ConfigError("audit needs train.probe = true", "train.probe");
    if (opts.runs < 1) throw ConfigError("--runs must be >= 1", "runs");

    std::ostringstream csv;
    csv << "seed,x_metric,y_metric,n_all,n_ada,n_uni\n";
    double x_sum = 0.0;
    json rows = json::array();
    for (std::size_t run = 0; run < opts.runs; ++run) {
      TrainConfig tc = p.cfg.train;
      tc.seed = p.cfg.seed + run;
      Network net = make_network(p, tc);
      const TrainResult r = train(net, p.data, tc);
      const AuditMetrics a = audit_worst_layer(r.audit);
      csv << tc.seed << "," << num(a.x) << "," << num(a.y) << "," << a.n_all << "," << a.n_ada
          << "," << a.n_uni << "\n";
      x_sum += a.x;
      rows.push_back({{"seed", tc.seed}, {"x", a.x}, {"y", a.y}});
    }
    OutputSet outputs(p.cfg.output_dir);
    outputs.add("audit.csv", csv.str());
    json manifest = base_manifest("audit", p);
    manifest["runs"] = opts.runs;
    manifest["summary"] = {{"mean_x", x_sum / static_cast<double>(opts.runs)}, {"rows", rows}};
    outputs.commit(manifest);
    out << "audit: " << opts.runs << " run(s), mean x = "
        << num(x_sum / static_cast<double>(opts.runs)) << "; outputs in "
        << outputs.dir().string() << "\n";
    return 0;
  });
}

namespace {

/// Trains once per value of one AdaLASE knob with shared seeds; writes one
/// ratio trajectory per value and a final-ratio table.
int sweep(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
          std::ostream& err, const std::string& command, const std::string& key,
          const std::vector<double>& values, double AdaLaseConfig::*knob) {
  return guarded(err, [&] {
    const Prepared p = prepare(config, opts);
    if (p.cfg.train.schedule.shape != ScheduleShape::adaptive) {
      throw ConfigError(command + " needs train.schedule = adaptive", "train.schedule");
    }
    OutputSet outputs(p.cfg.output_dir);
    std::ostringstream table;
    for (double v : values) {
      TrainConfig tc = p.cfg.train;
      tc.adalase.*knob = v;
      Network net = make_network(p, tc);
      const std::size_t positions = net.num_taps();
      const TrainResult r = train(net, p.data, tc);
      if (table.tellp() == 0) {
        table << key;
        for (std::size_t i = 0; i < positions; ++i) table << ",q_" << i;
        table << ",best_test_acc\n";
      }
      table << num(v);
      for (double q : r.trajectory.back()) table << "," << num(q);
      table << "," << num(r.best_test_acc) << "\n";
      outputs.add("ratios_" + key + num(v) + ".csv", ratios_csv(r, positions));
    }
    outputs.add("final_ratios.csv", table.str());
    json manifest = base_manifest(command, p);
    manifest[key + "_values"] = values;
    outputs.commit(manifest);
    out << table.str();
    return 0;
  });
}

}  // namespace

int cmd_sweep_lower_limit(const std::filesystem::path& config, const CommandOptions& opts,
                          std::ostream& out, std::ostream& err) {
  return sweep(config, opts, out, err, "sweep-kd", "kd", kSweepKd, &AdaLaseConfig::d_scale);
}

int cmd_sweep_eta(const std::filesystem::path& config, const CommandOptions& opts,
                  std::ostream& out, std::ostream& err) {
  return sweep(config, opts, out, err, "sweep-eta", "eta", kSweepEta, &AdaLaseConfig::eta);
}

int cmd_validate_config(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config);
    check_paths(cfg);
    out << to_json(cfg).dump(2) << "\n";
    return 0;
  });
}

}  // namespace adalase
