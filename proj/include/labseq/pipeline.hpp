#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "labseq/cohort.hpp"
#include "labseq/encode.hpp"
#include "labseq/eval.hpp"
#include "labseq/synth.hpp"
#include "labseq/train.hpp"
#include "labseq/tsne.hpp"

namespace labseq {

struct RunConfig {
  std::filesystem::path patients;  // empty: use synthetic data in the output directory
  std::filesystem::path labs;
  std::filesystem::path out = "labseq_out";
  std::uint64_t seed = 42;

  std::vector<std::string> markers = MarkerVocabulary::default_paediatric().codes();
  std::string creatinine = "creatinine";
  CohortRules cohort;
  int max_len = kMaxSequenceLength;
  SplitFractions split = kDefaultSplit;

  SynthConfig synth;
  TrainConfig train;
  int resamples = 2000;
  double threshold = 0.5;
  TsneConfig tsne;
  int timeline_patients = 10;

  bool synthetic() const { return patients.empty() && labs.empty(); }
  MarkerVocabulary vocabulary() const { return MarkerVocabulary(markers, creatinine); }

  /// Throws Error{"config_error"} on out-of-range values, e.g. an empty split.
  void validate() const;
};

/// Flat "key = value" text, one entry per line in a fixed key order.
std::string config_to_text(const RunConfig& cfg);

/// Applies "key = value" lines on top of defaults. '#' starts a comment.
/// Throws Error{"config_error"} naming the key or line.
RunConfig config_from_text(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"synth", "cohort", "encode", "train", "eval", "tsne", "report"};
  return names;
}

/// Seed for one stage, derived from the master seed and the stage name.
std::uint64_t stage_seed(std::uint64_t master, std::string_view stage);

/// SHA-256 over the config entries a stage depends on (its own section and
/// every upstream section).
std::string stage_config_hash(const RunConfig& cfg, std::string_view stage);

// Each stage reads its inputs from cfg.out (or the configured data paths),
// verifies upstream manifests, writes its outputs atomically, and records
// stages/<stage>.json with input and output hashes.
void run_synth(const RunConfig& cfg);
void run_cohort(const RunConfig& cfg);
void run_encode(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_eval(const RunConfig& cfg);
void run_tsne(const RunConfig& cfg);
void run_report(const RunConfig& cfg);

/// Runs every stage in order (synth only when no data paths are configured).
/// Errors are rethrown as StageError naming the stage.
void run_all(const RunConfig& cfg);

void run_stage(const RunConfig& cfg, std::string_view stage);

class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// SVG renderers; inputs are the parsed stage outputs.
struct TimelineRow {
  std::string patient_id;
  std::vector<Date> event_dates;  // all lab dates, ascending
  Window window;
  int label = 0;
};

std::string render_timeline_svg(const std::vector<TimelineRow>& rows);
std::string render_roc_svg(const std::vector<RocPoint>& curve, double auc);
std::string render_confusion_svg(const ConfusionMatrix& m);
std::string render_tsne_svg(const std::vector<std::string>& ids, const Eigen::MatrixXd& coords,
                            const std::vector<int>& labels);

}  // namespace labseq
