#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "labseq/cohort.hpp"
#include "labseq/ingest.hpp"
#include "labseq/vocabulary.hpp"

namespace labseq {

/// Generator settings. Per-marker vectors follow the vocabulary order.
///
/// Each patient has a long-run severity level; the latent severity is a
/// mean-reverting walk sampled once per visit. Visits are separated by
/// geometric gaps, creatinine is measured at every visit and other markers
/// with their own inclusion probability. Marker m is flagged abnormal with
/// probability logistic(informativeness[m] * severity + offset[m]).
struct SynthConfig {
  std::size_t n_patients = 1250;
  std::uint64_t seed = 0;
  MarkerVocabulary vocabulary = MarkerVocabulary::default_paediatric();

  double severity_drift = 0.35;      // sd of the per-visit innovation
  double severity_reversion = 0.25;  // pull towards the patient level per visit, in (0,1]
  double severity_level_sd = 1.0;    // spread of patient levels
  double visit_gap_days = 14.0;      // mean of the geometric inter-visit gap
  std::vector<double> informativeness{1.4, 1.25, 0.7, 0.85, 0.4, 0.85, 0.7, 1.0,
                                      0.55, 0.85, 0.7, 0.4, 0.4, 0.55, 0.3};
  std::vector<double> offset{-1.0, -0.8, -1.5, -1.2, -1.8, -1.0, -1.2, -0.9,
                             -1.6, -1.0, -0.6, -1.4, -1.5, -1.0, -1.3};
  std::vector<double> inclusion{1.0, 0.9, 0.9, 0.9, 0.6, 0.6, 0.7, 0.7,
                                0.5, 0.6, 0.8, 0.8, 0.8, 0.5, 0.4};
  double death_hazard_scale = 3.5e-4;  // per-visit death probability is scale * exp(severity)
  int death_delay_max_days = 45;       // death falls 1..max days after the last visit
  double long_follow_up_fraction = 0.7;
  Date study_start = Date::from_ymd(2019, 1, 1);
  Date study_end = Date::from_ymd(2025, 12, 31);

  /// Sets all informativeness to zero (no learnable signal).
  SynthConfig& without_signal();

  void validate() const;  // throws Error{"config_error"}
};

struct SeverityPoint {
  Date date;
  double severity;
};

struct SynthTruth {
  std::map<std::string, std::vector<SeverityPoint>> trajectories;
  std::map<std::string, double> bayes_score;  // for the natural follow-up window
  double creatinine_weight = 0.0;
  double creatinine_offset = 0.0;
};

struct SynthOutput {
  std::vector<PatientDemographics> patients;
  std::vector<LabEvent> labs;
  SynthTruth truth;
};

/// Deterministic in config.seed. Throws Error{"config_error"} for n_patients == 0.
SynthOutput generate_cohort(const SynthConfig& config);

/// Probability of at least one abnormal creatinine in each eligible entry's
/// window under the generator's law, given the latent trajectory:
///   1 - prod_{visits v in window} (1 - logistic(weight * s_v + offset)).
/// Throws Error{"unknown_patient"} for entries missing from the truth.
std::map<std::string, double> bayes_scores(const SynthTruth& truth, const std::vector<CohortEntry>& cohort);

double window_probability(const SynthTruth& truth, const std::vector<SeverityPoint>& trajectory,
                          const Window& window);

void write_synth_files(const SynthOutput& out, const std::filesystem::path& patients,
                       const std::filesystem::path& labs, const std::filesystem::path& truth);
std::string truth_to_jsonl(const SynthTruth& truth);
SynthTruth read_truth(const std::filesystem::path& path);

}  // namespace labseq
