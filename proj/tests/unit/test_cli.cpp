#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "adalase/commands.hpp"
#include "adalase/io.hpp"

using namespace adalase;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = ADALASE_CONFIG_DIR;

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& tag)
      : root(fs::temp_directory_path() / ("adalase_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path write(const std::string& name, const json& doc) const {
    const fs::path p = root / name;
    io::write_file_atomic(p, doc.dump(2));
    return p;
  }
};

/// Small, fast variant of a shipped preset.
json shrink(json doc, const fs::path& out) {
  doc["output_dir"] = out.string();
  doc["data"]["train_pool"] = 128;
  doc["data"]["test_pool"] = 64;
  doc["train"]["epochs"] = 3;
  doc["train"]["batch_size"] = 32;
  return doc;
}

json preset(const std::string& name) {
  return json::parse(io::read_file(kConfigs / (name + ".json")));
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("validate") {
  Workspace ws("validate");
  std::ostringstream out, err;
  SUBCASE("minimal config") {
    CHECK(cmd_validate_config(ws.write("c.json", json::object()), out, err) == 0);
    CHECK(json::parse(out.str())["adalase"]["eta"] == 1.0);
  }
  SUBCASE("negative eta") {
    CHECK(cmd_validate_config(ws.write("c.json", {{"adalase", {{"eta", -1}}}}), out, err) == 2);
    CHECK(err.str().find("adalase.eta must be > 0") != std::string::npos);
  }
  SUBCASE("unknown key is named") {
    CHECK(cmd_validate_config(ws.write("c.json", {{"train", {{"epochz", 3}}}}), out, err) == 2);
    CHECK(err.str().find("train.epochz") != std::string::npos);
  }
  SUBCASE("wrong type names the field") {
    CHECK(cmd_validate_config(ws.write("c.json", {{"train", {{"epochs", "many"}}}}), out, err) == 2);
    CHECK(err.str().find("train.epochs") != std::string::npos);
  }
  SUBCASE("malformed JSON") {
    io::write_file_atomic(ws.root / "bad.json", "{\"seed\": 1,");
    CHECK(cmd_validate_config(ws.root / "bad.json", out, err) == 2);
  }
  SUBCASE("shipped presets are valid") {
    for (const char* name :
         {"mlp-fig3", "mlp-fig5", "sweep-kd", "uniform-baseline", "cnn-adalase", "cnn-uniform"}) {
      CAPTURE(name);
      std::ostringstream o, e;
      CHECK(cmd_validate_config(kConfigs / (std::string(name) + ".json"), o, e) == 0);
    }
  }
}

TEST_CASE("train writes metrics, ratios, checkpoint and manifest") {
  Workspace ws("train");
  const fs::path out = ws.root / "run";
  const fs::path cfg = ws.write("c.json", shrink(preset("mlp-fig3"), out));
  std::ostringstream o, e;
  REQUIRE(cmd_train(cfg, {}, o, e) == 0);
  CHECK(o.str().find("best test accuracy") != std::string::npos);

  const auto ratios = read_csv(out / "ratios.csv");
  CHECK(ratios[0] == std::vector<std::string>{"epoch", "q_0", "q_1", "hist_0", "hist_1"});
  CHECK(ratios.size() == 5);
  CHECK(ratios[1][1] == "0.5");
  const auto metrics = read_csv(out / "metrics.csv");
  CHECK(metrics[0].size() == 10);
  CHECK(metrics.size() == 4);

  const json manifest = json::parse(io::read_file(out / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["effective_config"]["train"]["epochs"] == 3);
  for (const char* f : {"metrics.csv", "ratios.csv", "checkpoint.adlw"}) {
    CHECK(manifest["outputs"][f] == io::hex64(io::fnv1a(io::read_file(out / f))));
  }
  for (const auto& entry : fs::directory_iterator(out)) {
    CHECK(entry.path().filename().string().front() != '.');
  }

  SUBCASE("same config and seed reproduce every output") {
    const fs::path out2 = ws.root / "run2";
    std::ostringstream o2, e2;
    CommandOptions opts;
    opts.out = out2;
    REQUIRE(cmd_train(cfg, opts, o2, e2) == 0);
    for (const char* f : {"metrics.csv", "ratios.csv", "checkpoint.adlw"}) {
      CHECK(io::read_file(out / f) == io::read_file(out2 / f));
    }
  }
  SUBCASE("the checkpoint can seed a new run") {
    json doc = shrink(preset("mlp-fig3"), ws.root / "resumed");
    doc["model"]["init_checkpoint"] = (out / "checkpoint.adlw").string();
    std::ostringstream o2, e2;
    CHECK(cmd_train(ws.write("r.json", doc), {}, o2, e2) == 0);
  }
}

TEST_CASE("missing dataset path exits 2 without outputs") {
  Workspace ws("missing");
  const fs::path out = ws.root / "run";
  json doc = shrink(preset("mlp-fig3"), out);
  doc["data"] = {{"source", "idx"},
                 {"train_images", (ws.root / "nope-images").string()},
                 {"train_labels", (ws.root / "nope-labels").string()},
                 {"test_images", (ws.root / "nope-images").string()},
                 {"test_labels", (ws.root / "nope-labels").string()}};
  const fs::path cfg = ws.write("c.json", doc);
  std::ostringstream o, e;
  CHECK(cmd_train(cfg, {}, o, e) == 2);
  CHECK(e.str().find("data.train_images") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  SUBCASE("through the executable") {
    const std::string cmd = std::string(ADALASE_CLI_PATH) + " train --config " + cfg.string() +
                            " > " + (ws.root / "log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK_FALSE(fs::exists(out));
  }
  SUBCASE("unreadable dataset contents") {
    io::write_file_atomic(ws.root / "nope-images", "garbage");
    io::write_file_atomic(ws.root / "nope-labels", "garbage");
    std::ostringstream o2, e2;
    CHECK(cmd_train(cfg, {}, o2, e2) == 2);
    CHECK_FALSE(fs::exists(out));
  }
}

TEST_CASE("uniform-baseline selection histogram is uniform") {
  // 10^4 selections: 200 samples, batch 2, 100 epochs.
  Workspace ws("uniform");
  const fs::path out = ws.root / "run";
  json doc = preset("uniform-baseline");
  doc["output_dir"] = out.string();
  doc["data"]["train_pool"] = 200;
  doc["data"]["test_pool"] = 20;
  doc["model"]["hidden"] = {1, 2, 2};
  doc["train"]["epochs"] = 100;
  doc["train"]["batch_size"] = 2;
  doc["train"]["probe"] = false;
  std::ostringstream o, e;
  REQUIRE(cmd_train(ws.write("c.json", doc), {}, o, e) == 0);
  const auto rows = read_csv(out / "ratios.csv");
  double n0 = 0, n1 = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    n0 += std::stod(rows[r][3]);
    n1 += std::stod(rows[r][4]);
  }
  REQUIRE(n0 + n1 == 10000);
  const double expected = (n0 + n1) / 2.0;
  const double chi2 = (n0 - expected) * (n0 - expected) / expected +
                      (n1 - expected) * (n1 - expected) / expected;
  // 99th percentile of chi-square with one degree of freedom.
  CHECK(chi2 < 6.635);
}

TEST_CASE("audit") {
  Workspace ws("audit");
  json doc = shrink(preset("mlp-fig5"), ws.root / "a");
  const fs::path cfg = ws.write("c.json", doc);
  CommandOptions opts;
  opts.runs = 2;
  opts.seed = 5;
  std::ostringstream o, e;
  REQUIRE(cmd_audit(cfg, opts, o, e) == 0);
  const auto rows = read_csv(ws.root / "a" / "audit.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"seed", "x_metric", "y_metric", "n_all", "n_ada", "n_uni"});
  CHECK(rows[1][0] == "5");
  CHECK(rows[2][0] == "6");
  for (std::size_t r = 1; r < 3; ++r) {
    const double x = std::stod(rows[r][1]), y = std::stod(rows[r][2]);
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }

  opts.out = ws.root / "b";
  opts.runs = 1;
  std::ostringstream o2, e2;
  REQUIRE(cmd_audit(cfg, opts, o2, e2) == 0);
  CHECK(read_csv(ws.root / "b" / "audit.csv")[1] == rows[1]);

  doc["train"]["probe"] = false;
  std::ostringstream o3, e3;
  CHECK(cmd_audit(ws.write("np.json", doc), {}, o3, e3) == 2);
}

TEST_CASE("sweep-kd") {
  Workspace ws("sweep");
  const fs::path out = ws.root / "s";
  const fs::path cfg = ws.write("c.json", shrink(preset("sweep-kd"), out));
  std::ostringstream o, e;
  REQUIRE(cmd_sweep_lower_limit(cfg, {}, o, e) == 0);
  for (const char* kd : {"0.1", "0.2", "0.3", "0.4", "0.5"}) {
    const fs::path f = out / (std::string("ratios_kd") + kd + ".csv");
    REQUIRE(fs::exists(f));
    const auto rows = read_csv(f);
    CHECK(rows[1][1] == "0.5");
    CHECK(rows[1][2] == "0.5");
    if (std::string(kd) == "0.5") {
      for (std::size_t r = 1; r < rows.size(); ++r) {
        for (std::size_t c = 1; c <= 2; ++c) {
          CHECK(std::stod(rows[r][c]) >= 0.25);
          CHECK(std::stod(rows[r][c]) <= 0.75);
        }
      }
    }
  }
  const auto table = read_csv(out / "final_ratios.csv");
  CHECK(table.size() == 6);
  CHECK(table[0] == std::vector<std::string>{"kd", "q_0", "q_1", "best_test_acc"});

  json uniform = shrink(preset("uniform-baseline"), ws.root / "u");
  std::ostringstream o2, e2;
  CHECK(cmd_sweep_lower_limit(ws.write("u.json", uniform), {}, o2, e2) == 2);
}

TEST_CASE("sweep-eta") {
  Workspace ws("eta");
  const fs::path out = ws.root / "e";
  std::ostringstream o, e;
  REQUIRE(cmd_sweep_eta(ws.write("c.json", shrink(preset("mlp-fig3"), out)), {}, o, e) == 0);
  for (const char* eta : {"0.1", "0.01", "0.001"}) {
    CHECK(fs::exists(out / (std::string("ratios_eta") + eta + ".csv")));
  }
  const auto table = read_csv(out / "final_ratios.csv");
  CHECK(table.size() == 4);
  CHECK(table[0][0] == "eta");
  CHECK(json::parse(io::read_file(out / "manifest.json"))["command"] == "sweep-eta");
}
