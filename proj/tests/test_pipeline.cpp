#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "labseq/pipeline.hpp"
#include "support.hpp"

using namespace labseq;
using testing::error_code;

namespace fs = std::filesystem;

namespace {

RunConfig small_run(const std::string& name) {
  auto cfg = config_from_text(
      "synth.n_patients = 240\n"
      "model.hidden_dim = 6\n"
      "train.max_epochs = 3\n"
      "eval.resamples = 200\n"
      "tsne.iterations = 300\n"
      "report.timeline_patients = 4\n");
  cfg.out = fs::temp_directory_path() / name;
  fs::remove_all(cfg.out);
  return cfg;
}

std::string stage_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const StageError& e) {
    return e.stage() + ":" + e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("config text round-trips and rejects bad input") {
  RunConfig cfg;
  const auto text = config_to_text(cfg);
  CHECK(config_to_text(config_from_text(text)) == text);
  CHECK(text.find("cohort.window_days = 30") != std::string::npos);
  CHECK(text.find("encode.max_len = 100") != std::string::npos);
  CHECK(text.find("eval.resamples = 2000") != std::string::npos);
  CHECK(text.find("eval.threshold = 0.5") != std::string::npos);

  auto changed = config_from_text("# comment\nseed = 7\ntrain.learning_rate = 0.01  # inline\n");
  CHECK(changed.seed == 7);
  CHECK(changed.train.learning_rate == 0.01);

  CHECK(error_code([] { config_from_text("no.such.key = 1\n"); }) == "config_error");
  CHECK(error_code([] { config_from_text("seed = banana\n"); }) == "config_error");
  CHECK(error_code([] { config_from_text("split.fractions = 0.5,0.5,0.0\n").validate(); }) == "config_error");
  CHECK(stage_of([] { run_all(config_from_text("split.fractions = 0.5,0.5,0.0\n")); }) == "config:config_error");
}

TEST_CASE("stage seeds and config hashes") {
  RunConfig cfg;
  CHECK(stage_seed(42, "train") == stage_seed(42, "train"));
  CHECK(stage_seed(42, "train") != stage_seed(42, "eval"));
  CHECK(stage_seed(42, "train") != stage_seed(43, "train"));

  auto other = cfg;
  other.tsne.iterations = 10;
  CHECK(stage_config_hash(cfg, "eval") == stage_config_hash(other, "eval"));
  CHECK(stage_config_hash(cfg, "tsne") != stage_config_hash(other, "tsne"));
  other = cfg;
  other.cohort.window_days = 20;
  CHECK(stage_config_hash(cfg, "synth") == stage_config_hash(other, "synth"));
  CHECK(stage_config_hash(cfg, "train") != stage_config_hash(other, "train"));
  other = cfg;
  other.out = "/elsewhere";
  for (const auto& s : stage_names()) CHECK(stage_config_hash(cfg, s) == stage_config_hash(other, s));
}

TEST_CASE("small end-to-end run, manifests and stale-input detection") {
  auto cfg = small_run("labseq_pipeline_test");
  run_all(cfg);
  for (const char* f : {"metrics.json", "roc.csv", "confusion.json", "tsne.csv", "kl_trace.csv", "history.json",
                        "checkpoint.json", "run-manifest.json", "timeline.svg", "roc.svg", "confusion.svg",
                        "tsne.svg", "stages/report.json"}) {
    CHECK(fs::exists(cfg.out / f));
  }
  const auto cohort_manifest = nlohmann::json::parse(read_file(cfg.out / "stages/cohort.json"));
  CHECK(cohort_manifest.at("summary").contains("exclusions"));

  // Report contracts.
  const auto roc_csv = read_file(cfg.out / "roc.csv");
  const auto rows = std::count(roc_csv.begin(), roc_csv.end(), '\n') - 1;
  const auto roc_svg = read_file(cfg.out / "roc.svg");
  const auto poly = roc_svg.substr(roc_svg.find("points=\""));
  const auto points = poly.substr(8, poly.find('"', 8) - 8);
  CHECK(std::count(points.begin(), points.end(), ',') == rows);
  const auto timeline = read_file(cfg.out / "timeline.svg");
  std::size_t groups = 0;
  for (auto p = timeline.find("class=\"patient\""); p != std::string::npos; p = timeline.find("class=\"patient\"", p + 1)) ++groups;
  CHECK(groups == 4);
  const auto confusion = nlohmann::json::parse(read_file(cfg.out / "confusion.json"));
  const auto confusion_svg = read_file(cfg.out / "confusion.svg");
  for (const char* cell : {"tp", "fp", "tn", "fn"}) {
    CHECK(confusion_svg.find(std::string(cell) + " = " + std::to_string(confusion.at(cell).at("count").get<long>())) !=
          std::string::npos);
  }

  // Re-running a stage with unchanged inputs succeeds.
  CHECK_NOTHROW(run_eval(cfg));

  SUBCASE("vocabulary change makes training inputs stale") {
    auto reordered = cfg;
    std::swap(reordered.markers[1], reordered.markers[2]);
    CHECK(error_code([&] { run_train(reordered); }) == "stale_input");
  }
  SUBCASE("tampered intermediate is detected") {
    auto text = read_file(cfg.out / "cohort.jsonl");
    text[text.find("\"label\":") + 8] ^= 1;  // flip a 0/1 label
    write_file_atomic(cfg.out / "cohort.jsonl", text);
    CHECK(error_code([&] { run_encode(cfg); }) == "stale_input");
  }
  SUBCASE("upstream config change is detected") {
    auto changed = cfg;
    changed.cohort.min_pre_window_days = 4;
    CHECK(error_code([&] { run_encode(changed); }) == "stale_input");
  }
  SUBCASE("missing upstream file names the path") {
    fs::remove(cfg.out / "encoded.jsonl");
    try {
      run_train(cfg);
      FAIL("expected missing_input");
    } catch (const Error& e) {
      CHECK(e.code() == "missing_input");
      CHECK(std::string(e.what()).find("encoded.jsonl") != std::string::npos);
    }
    CHECK(stage_of([&] { run_stage(cfg, "train"); }) == "train:missing_input");
  }
  fs::remove_all(cfg.out);
}

TEST_CASE("changing only the seed changes metrics but not the schema") {
  auto a = small_run("labseq_seed_a");
  auto b = small_run("labseq_seed_b");
  b.seed = 43;
  run_all(a);
  run_all(b);
  const auto ma = nlohmann::json::parse(read_file(a.out / "metrics.json"));
  const auto mb = nlohmann::json::parse(read_file(b.out / "metrics.json"));
  CHECK(ma.at("auc") != mb.at("auc"));
  std::vector<std::string> ka, kb;
  for (auto& [k, v] : ma.items()) ka.push_back(k);
  for (auto& [k, v] : mb.items()) kb.push_back(k);
  CHECK(ka == kb);
  CHECK(read_file(a.out / "roc.csv").substr(0, 18) == read_file(b.out / "roc.csv").substr(0, 18));
  fs::remove_all(a.out);
  fs::remove_all(b.out);
}
