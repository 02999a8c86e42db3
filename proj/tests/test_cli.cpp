#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cogtree/data.hpp"
#include "cogtree/experiment.hpp"
#include "cogtree/model.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cogtree;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "cogtree_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(COGTREE_CLI_PATH) + " " + args + " >" +
                          (kRoot / "stdout.txt").string() + " 2>" + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string stderr_text() { return read_file(kRoot / "stderr.txt"); }

fs::path fresh(const std::string& name) {
  fs::create_directories(kRoot);
  const fs::path p = kRoot / name;
  fs::remove_all(p);
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small synthetic data set shared by most cases.
fs::path small_data() {
  const fs::path d = kRoot / "small";
  if (!fs::exists(d / "test.csv")) {
    fs::create_directories(kRoot);
    REQUIRE(run("gen-data --head-count 300 --tail-count 12 --seed 42 --out " + q(d)) == 0);
  }
  return d;
}

}  // namespace

TEST_CASE("gen-data writes three splits and provenance") {
  const auto out = fresh("gen");
  REQUIRE(run("gen-data --out " + q(out)) == 0);
  for (const char* f : {"train.csv", "val.csv", "test.csv", "config.ini", "manifest.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  CHECK(manifest["seed"] == 42);
  CHECK(manifest["input_digest"].get<std::string>().size() == 16);
  const auto again = fresh("gen2");
  REQUIRE(run("gen-data --out " + q(again)) == 0);
  for (const char* f : {"train.csv", "val.csv", "test.csv"}) {
    CHECK(read_file(out / f) == read_file(again / f));
  }
}

TEST_CASE("bad specs and flags are config errors") {
  CHECK(run("gen-data --sigma-off 0 --out " + q(fresh("bad"))) == 2);
  CHECK(stderr_text().find("sigma_off") != std::string::npos);
  CHECK(run("train --train x.csv --loss hinge") == 2);
  CHECK(run("pipeline --no-such-flag") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("missing inputs are data errors") {
  CHECK(run("train --train /nonexistent/train.csv --out " + q(fresh("missing"))) == 3);
  const auto d = small_data();
  CHECK(run("build-tree --train " + q(d / "train.csv") + " --out " + q(fresh("bt0"))) == 2);
  CHECK(run("build-tree --train " + q(d / "train.csv") + " --log /nonexistent.csv --out " +
            q(fresh("bt1"))) == 3);
}

TEST_CASE("a log with no confusion at all is a runtime error") {
  const auto d = small_data();
  const auto log = kRoot / "diag.csv";
  std::ofstream(log) << "ground_truth,predicted\nc0,c0\nc0_f0,c0_f0\n";
  CHECK(run("build-tree --train " + q(d / "train.csv") + " --log " + q(log) + " --out " +
            q(fresh("bt2"))) == 4);
  CHECK(stderr_text().find("no-valid-host") != std::string::npos);
  CHECK(run("build-tree --variant flat --train " + q(d / "train.csv") + " --log " + q(log) +
            " --out " + q(fresh("bt3"))) == 0);
  const auto flat = tree_from_json(read_file(kRoot / "bt3" / "tree.json"));
  for (ClassIndex c = 0; c < flat.num_classes(); ++c) CHECK(flat.depth(c) == 1);
}

TEST_CASE("train, build-tree, train, eval by hand") {
  const auto d = small_data();
  const auto p1 = fresh("p1"), tree = fresh("tree"), p2 = fresh("p2"), ev = fresh("ev");
  REQUIRE(run("train --loss ce --train " + q(d / "train.csv") + " --out " + q(p1)) == 0);
  CHECK(fs::exists(p1 / "checkpoint.json"));
  CHECK(fs::exists(p1 / "history.csv"));
  REQUIRE(run("build-tree --train " + q(d / "train.csv") + " --checkpoint " +
              q(p1 / "checkpoint.json") + " --predict-on " + q(d / "val.csv") + " --out " + q(tree)) ==
          0);
  CHECK(fs::exists(tree / "tree.dot"));
  // The biased model's tree recovers the planted concepts c<k>.
  const auto t = tree_from_json(read_file(tree / "tree.json"));
  CHECK(t.node(0).children.size() == 6);
  for (ClassIndex c = 0; c < t.num_classes(); ++c) {
    const auto path = t.path(c);
    const auto y1 = t.node(path[1]);
    const auto head = *t.node(y1.children[0]).class_index;
    CHECK(t.labels()[c].substr(0, 2) == t.labels()[head]);
  }
  CHECK(run("train --loss cogtree --train " + q(d / "train.csv") + " --out " + q(p2)) == 2);
  REQUIRE(run("train --loss cogtree --tree " + q(tree / "tree.json") + " --train " +
              q(d / "train.csv") + " --out " + q(p2)) == 0);
  REQUIRE(run("eval --train " + q(d / "train.csv") + " --checkpoint " + q(p2 / "checkpoint.json") +
              " --data " + q(d / "test.csv") + " --out " + q(ev)) == 0);
  const auto metrics = nlohmann::json::parse(read_file(ev / "metrics.json"));
  const double m1 = metrics["summary"]["mR@1"], m3 = metrics["summary"]["mR@3"],
               m5 = metrics["summary"]["mR@5"];
  CHECK(m1 <= m3);
  CHECK(m3 <= m5);
  CHECK(read_file(ev / "metrics.txt").find("mean") != std::string::npos);
}

TEST_CASE("zero learning rate writes the initial model") {
  const auto d = small_data();
  const auto out = fresh("lr0");
  REQUIRE(run("train --lr 0 --epochs 2 --seed 9 --train " + q(d / "train.csv") + " --out " + q(out)) == 0);
  const auto ck = checkpoint_from_json(read_file(out / "checkpoint.json"));
  ExperimentConfig cfg;
  cfg.seed = 9;
  const auto init = fresh_model(cfg, ck.model.input_dim(), ck.model.num_classes(), "phase2-init");
  CHECK(ck.model == init);
}

TEST_CASE("eval of a perfect model") {
  const auto dir = fresh("perfect");
  fs::create_directories(dir);
  const LabelSpace space({"a", "b", "c"}, {2, 2, 2});
  Dataset data;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> x(3, 0.0);
    x[i % 3] = 1.0;
    data.features.push_back(x);
    data.labels.push_back(i % 3);
  }
  write_dataset_csv(data, space, dir / "data.csv");
  auto m = Classifier::linear(3, 3);
  for (std::size_t i = 0; i < 3; ++i) m.parameters()[i * 3 + i] = 1.0;
  write_file_atomic(dir / "ck.json", checkpoint_to_json({m, 0, ""}));
  REQUIRE(run("eval --k 1,2 --train " + q(dir / "data.csv") + " --checkpoint " + q(dir / "ck.json") +
              " --data " + q(dir / "data.csv") + " --out " + q(dir / "out")) == 0);
  const auto metrics = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
  CHECK(metrics["summary"]["mR@1"] == 1.0);
  CHECK(metrics["ks"] == nlohmann::json::array({1, 2}));
  CHECK(run("eval --k 1,9 --train " + q(dir / "data.csv") + " --checkpoint " + q(dir / "ck.json") +
            " --data " + q(dir / "data.csv") + " --out " + q(dir / "out")) == 2);
}

TEST_CASE("pipeline outputs are complete and reproducible from the echoed config") {
  const auto a = fresh("pipe_a"), b = fresh("pipe_b");
  const std::string flags = "--head-count 200 --tail-count 10 --epochs 5 --seed 3";
  REQUIRE(run("pipeline " + flags + " --out " + q(a)) == 0);
  for (const char* f : {"tree.json", "tree.dot", "checkpoint.json", "metrics.json", "metrics.txt",
                        "summary.csv", "config.ini", "manifest.json", "comparison.txt"}) {
    CHECK(fs::exists(a / f));
  }
  const std::string config = read_file(a / "config.ini");
  CHECK(config.rfind("[pipeline]\n", 0) == 0);
  CHECK(config.find("epochs=5") != std::string::npos);
  REQUIRE(run("pipeline --config " + q(a / "config.ini") + " --out " + q(b)) == 0);
  for (const char* f : {"tree.json", "checkpoint.json", "metrics.json", "metrics.txt", "summary.csv"}) {
    CHECK(read_file(a / f) == read_file(b / f));
  }
  const auto ma = nlohmann::json::parse(read_file(a / "manifest.json"));
  const auto mb = nlohmann::json::parse(read_file(b / "manifest.json"));
  CHECK(ma["input_digest"] == mb["input_digest"]);
  CHECK(ma["config_digest"] == mb["config_digest"]);
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(e.path().extension() != ".tmp");
  }
}

TEST_CASE("command-line flags override the config file") {
  const auto dir = fresh("override");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[pipeline]\nepochs=2\nseed=5\nhead-count=100\ntail-count=5\n";
  REQUIRE(run("pipeline --config " + q(dir / "run.ini") + " --seed 6 --out " + q(dir / "out")) == 0);
  const std::string echoed = read_file(dir / "out" / "config.ini");
  CHECK(echoed.find("seed=6") != std::string::npos);
  CHECK(echoed.find("epochs=2") != std::string::npos);
  std::ofstream(dir / "bad.ini") << "[pipeline]\nepochz=2\n";
  CHECK(run("pipeline --config " + q(dir / "bad.ini") + " --out " + q(dir / "out2")) == 2);
}

TEST_CASE("pipeline ablation writes one summary row per grid entry") {
  const auto out = fresh("ablate");
  REQUIRE(run("pipeline --ablate --head-count 100 --tail-count 5 --epochs 2 --out " + q(out)) == 0);
  const std::string csv = read_file(out / "summary.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 13);
  CHECK(csv.find("\nfuse-subtree,") != std::string::npos);
  CHECK(csv.find("\ncluster-tree,") != std::string::npos);
}
