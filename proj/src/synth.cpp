#include "labseq/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace labseq {

using json = nlohmann::json;

SynthConfig& SynthConfig::without_signal() {
  std::fill(informativeness.begin(), informativeness.end(), 0.0);
  return *this;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("config_error", what); };
  if (n_patients == 0) fail("n_patients must be positive");
  const auto m = vocabulary.size();
  if (informativeness.size() != m || offset.size() != m || inclusion.size() != m) {
    fail("per-marker settings must have one entry per vocabulary marker");
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (!(informativeness[k] >= 0.0) || !std::isfinite(offset[k])) fail("marker coupling must be finite and non-negative");
    if (!(inclusion[k] > 0.0 && inclusion[k] <= 1.0)) fail("marker inclusion probabilities must lie in (0,1]");
  }
  if (!(severity_drift > 0) || !(severity_level_sd > 0)) fail("severity spreads must be positive");
  if (!(severity_reversion > 0 && severity_reversion <= 1)) fail("severity_reversion must lie in (0,1]");
  if (!(visit_gap_days >= 1)) fail("visit_gap_days must be at least 1");
  if (!(death_hazard_scale > 0)) fail("death_hazard_scale must be positive");
  if (death_delay_max_days < 1) fail("death_delay_max_days must be positive");
  if (!(long_follow_up_fraction >= 0 && long_follow_up_fraction <= 1)) fail("long_follow_up_fraction must lie in [0,1]");
  if (!(study_start < study_end)) fail("study_start must precede study_end");
}

namespace {

std::string patient_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%06zu", index + 1);
  return buf;
}

struct PatientDraw {
  PatientDemographics demographics;
  std::vector<LabEvent> labs;
  std::vector<SeverityPoint> trajectory;
};

PatientDraw draw_patient(const SynthConfig& cfg, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::geometric_distribution<int> gap(1.0 / cfg.visit_gap_days);

  PatientDraw d;
  auto& demo = d.demographics;
  demo.patient_id = patient_id(index);
  demo.sex = unit(rng) < 0.5 ? Sex::female : Sex::male;

  const int enrolment_span = std::max(1, (cfg.study_end - cfg.study_start) / 2);
  const Date first = cfg.study_start + static_cast<int>(unit(rng) * enrolment_span);
  const double age_years = 0.1 + unit(rng) * 15.9;
  demo.birth_date = first - static_cast<int>(age_years * kDaysPerYear);

  const bool long_follow_up = unit(rng) < cfg.long_follow_up_fraction;
  const int span = long_follow_up ? 365 + static_cast<int>(unit(rng) * 5 * 365)
                                  : 10 + static_cast<int>(unit(rng) * 140);
  const Date last_allowed = std::min(first + span, cfg.study_end);

  const double level = cfg.severity_level_sd * normal(rng);
  const double keep = 1.0 - cfg.severity_reversion;
  const double stationary_sd = cfg.severity_drift / std::sqrt(1.0 - keep * keep + 1e-12);
  double severity = level + stationary_sd * normal(rng);

  const auto& codes = cfg.vocabulary.codes();
  for (Date date = first; date <= last_allowed; date = date + 1 + gap(rng)) {
    d.trajectory.push_back({date, severity});
    for (std::size_t m = 0; m < codes.size(); ++m) {
      const bool measured = m == cfg.vocabulary.creatinine_index() || unit(rng) < cfg.inclusion[m];
      const double p_abnormal = logistic(cfg.informativeness[m] * severity + cfg.offset[m]);
      const bool abnormal = unit(rng) < p_abnormal;
      if (measured) d.labs.push_back({demo.patient_id, date, codes[m], abnormal});
    }
    if (unit(rng) < std::min(1.0, cfg.death_hazard_scale * std::exp(severity))) {
      demo.death_date = date + 1 + static_cast<int>(unit(rng) * cfg.death_delay_max_days);
      break;
    }
    severity += cfg.severity_reversion * (level - severity) + cfg.severity_drift * normal(rng);
  }
  return d;
}

}  // namespace

double window_probability(const SynthTruth& truth, const std::vector<SeverityPoint>& trajectory,
                          const Window& window) {
  double none = 1.0;
  for (const auto& pt : trajectory) {
    if (window.contains(pt.date)) {
      none *= 1.0 - logistic(truth.creatinine_weight * pt.severity + truth.creatinine_offset);
    }
  }
  return 1.0 - none;
}

SynthOutput generate_cohort(const SynthConfig& config) {
  config.validate();
  SynthOutput out;
  const auto c = config.vocabulary.creatinine_index();
  out.truth.creatinine_weight = config.informativeness[c];
  out.truth.creatinine_offset = config.offset[c];
  for (std::size_t i = 0; i < config.n_patients; ++i) {
    auto d = draw_patient(config, i);
    const auto& id = d.demographics.patient_id;
    // Creatinine is drawn at every visit, so the last visit is the last creatinine.
    const Date end = d.demographics.death_date.value_or(d.trajectory.back().date);
    out.truth.bayes_score[id] = window_probability(out.truth, d.trajectory, Window::ending_at(end));
    out.truth.trajectories[id] = std::move(d.trajectory);
    out.patients.push_back(std::move(d.demographics));
    out.labs.insert(out.labs.end(), std::make_move_iterator(d.labs.begin()),
                    std::make_move_iterator(d.labs.end()));
  }
  return out;
}

std::map<std::string, double> bayes_scores(const SynthTruth& truth, const std::vector<CohortEntry>& cohort) {
  std::map<std::string, double> out;
  for (const auto& e : cohort) {
    if (!e.eligible()) continue;
    auto it = truth.trajectories.find(e.patient_id);
    if (it == truth.trajectories.end()) {
      throw Error("unknown_patient", "patient " + e.patient_id + " not present in synthetic truth");
    }
    out[e.patient_id] = window_probability(truth, it->second, e.window);
  }
  return out;
}

std::string truth_to_jsonl(const SynthTruth& truth) {
  std::string text;
  for (const auto& [id, traj] : truth.trajectories) {
    json points = json::array();
    for (const auto& pt : traj) points.push_back({pt.date.iso(), pt.severity});
    json j = {{"patient_id", id},
              {"bayes_score", truth.bayes_score.at(id)},
              {"creatinine_weight", truth.creatinine_weight},
              {"creatinine_offset", truth.creatinine_offset},
              {"trajectory", std::move(points)}};
    text += j.dump();
    text.push_back('\n');
  }
  return text;
}

void write_synth_files(const SynthOutput& out, const std::filesystem::path& patients,
                       const std::filesystem::path& labs, const std::filesystem::path& truth) {
  std::string text;
  for (const auto& p : out.patients) text += patient_to_jsonl(p) + "\n";
  write_file_atomic(patients, text);
  text.clear();
  for (const auto& e : out.labs) text += lab_to_jsonl(e) + "\n";
  write_file_atomic(labs, text);
  write_file_atomic(truth, truth_to_jsonl(out.truth));
}

SynthTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_input", "cannot open " + path.string());
  SynthTruth truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto id = j.at("patient_id").get<std::string>();
    truth.bayes_score[id] = j.at("bayes_score").get<double>();
    truth.creatinine_weight = j.at("creatinine_weight").get<double>();
    truth.creatinine_offset = j.at("creatinine_offset").get<double>();
    auto& traj = truth.trajectories[id];
    for (const auto& pt : j.at("trajectory")) {
      traj.push_back({Date::parse(pt.at(0).get<std::string>()), pt.at(1).get<double>()});
    }
  }
  return truth;
}

}  // namespace labseq
