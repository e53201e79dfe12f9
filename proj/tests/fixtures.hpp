#pragma once

// Hand-built timelines exercising every eligibility and labelling branch.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "labseq/cohort.hpp"
#include "labseq/ingest.hpp"

namespace fixtures {

struct Expected {
  std::string id;
  std::optional<labseq::Exclusion> exclusion;
  int label;  // ignored when excluded
};

struct CohortFixture {
  std::vector<labseq::PatientDemographics> patients;
  std::vector<labseq::LabEvent> labs;
  std::vector<Expected> expected;
};

inline CohortFixture twelve_timelines() {
  using labseq::Date;
  using labseq::Exclusion;
  using labseq::Sex;
  const Date born = Date::from_ymd(2012, 5, 1);
  const Date T = Date::from_ymd(2021, 6, 30);  // last creatinine of the living patients
  const Date D = Date::from_ymd(2021, 8, 1);   // date of death
  const Date pre[] = {Date::from_ymd(2021, 1, 10), Date::from_ymd(2021, 2, 10), Date::from_ymd(2021, 3, 10)};

  CohortFixture f;
  auto patient = [&](const std::string& id, std::optional<Date> death = std::nullopt) {
    f.patients.push_back({id, Sex::female, born, death});
  };
  auto cr = [&](const std::string& id, Date d, bool abnormal = false) {
    f.labs.push_back({id, d, "creatinine", abnormal});
  };
  auto three_pre = [&](const std::string& id) {
    for (Date d : pre) cr(id, d);
  };

  patient("A01");  // plain eligible, normal window
  three_pre("A01");
  cr("A01", T);
  f.expected.push_back({"A01", std::nullopt, 0});

  patient("A02");  // abnormal last creatinine
  three_pre("A02");
  cr("A02", T, true);
  f.expected.push_back({"A02", std::nullopt, 1});

  patient("A03");  // three results on one day only
  for (int k = 0; k < 3; ++k) cr("A03", pre[0]);
  cr("A03", T);
  f.expected.push_back({"A03", Exclusion::too_few_pre_window_days, 0});

  patient("A04");  // no creatinine at all
  f.labs.push_back({"A04", T, "urea", true});
  f.expected.push_back({"A04", Exclusion::no_creatinine, 0});

  patient("A05", D);  // deceased, last creatinine 61 days before death
  three_pre("A05");
  cr("A05", Date::from_ymd(2021, 6, 1));
  f.expected.push_back({"A05", Exclusion::deceased_no_window_measurement, 0});

  patient("A06", D);  // deceased with an abnormal result in the last 30 days
  three_pre("A06");
  cr("A06", D - 12, true);
  f.expected.push_back({"A06", std::nullopt, 1});

  patient("A07", D);  // deceased, only window result sits on the first window day
  three_pre("A07");
  cr("A07", D - 30);
  f.expected.push_back({"A07", std::nullopt, 0});

  patient("A08");  // enough days overall, but one of them is inside the window
  cr("A08", pre[0]);
  cr("A08", pre[1]);
  cr("A08", T - 10);
  cr("A08", T);
  f.expected.push_back({"A08", Exclusion::too_few_pre_window_days, 0});

  patient("A09");  // abnormal non-creatinine marker in the window
  three_pre("A09");
  f.labs.push_back({"A09", T - 3, "urea", true});
  cr("A09", T);
  f.expected.push_back({"A09", std::nullopt, 0});

  patient("A10");  // abnormal creatinine the day before the window opens
  three_pre("A10");
  cr("A10", T - 31, true);
  cr("A10", T);
  f.expected.push_back({"A10", std::nullopt, 0});

  patient("A11");  // abnormal creatinine on the first window day
  three_pre("A11");
  cr("A11", T - 30, true);
  cr("A11", T);
  f.expected.push_back({"A11", std::nullopt, 1});

  patient("A12", D);  // deceased, too few days and nothing in the window
  cr("A12", pre[0]);
  cr("A12", pre[1]);
  f.expected.push_back({"A12", Exclusion::too_few_pre_window_days, 0});

  return f;
}

/// Straight scan over raw (unmerged) events, written without the library's
/// window or timeline helpers.
inline Expected brute_force_label(const labseq::PatientDemographics& p, const std::vector<labseq::LabEvent>& labs) {
  std::vector<labseq::LabEvent> mine;
  for (const auto& e : labs) {
    if (e.patient_id == p.patient_id && e.marker == "creatinine") mine.push_back(e);
  }
  if (mine.empty()) return {p.patient_id, labseq::Exclusion::no_creatinine, 0};
  int end = mine[0].date.days;
  for (const auto& e : mine) end = std::max(end, e.date.days);
  if (p.death_date) end = p.death_date->days;
  const int start = end - 30;

  std::set<int> days;
  bool any_in_window = false;
  int label = 0;
  for (const auto& e : mine) {
    if (e.date.days < start) days.insert(e.date.days);
    if (e.date.days >= start && e.date.days <= end) {
      any_in_window = true;
      if (e.abnormal) label = 1;
    }
  }
  if (days.size() < 3) return {p.patient_id, labseq::Exclusion::too_few_pre_window_days, 0};
  if (p.death_date && !any_in_window) return {p.patient_id, labseq::Exclusion::deceased_no_window_measurement, 0};
  return {p.patient_id, std::nullopt, label};
}

}  // namespace fixtures

#include <random>

namespace fixtures {

/// Random timeline with at least three creatinine days before its window.
/// Events use a handful of markers, repeat dates, and random flags.
inline std::pair<labseq::PatientTimeline, labseq::Window> random_patient(std::mt19937_64& rng, const std::string& id,
                                                                         int max_dates = 160) {
  const auto vocab = labseq::MarkerVocabulary::default_paediatric();
  const labseq::Date born = labseq::Date::from_ymd(2005, 1, 1) + static_cast<int>(rng() % 3000);
  const labseq::Date first = born + 400 + static_cast<int>(rng() % 2000);
  const int n_dates = 3 + static_cast<int>(rng() % static_cast<unsigned>(max_dates - 2));
  std::vector<labseq::LabEvent> labs;
  labseq::Date d = first;
  for (int k = 0; k < n_dates; ++k) {
    labs.push_back({id, d, "creatinine", rng() % 3 == 0});
    const int extra = static_cast<int>(rng() % 4);
    for (int j = 0; j < extra; ++j) {
      labs.push_back({id, d, vocab.codes()[rng() % vocab.size()], rng() % 2 == 0});
    }
    d = d + 1 + static_cast<int>(rng() % 20);
  }
  const auto sex = rng() % 2 ? labseq::Sex::male : labseq::Sex::female;
  labseq::PatientDemographics p{id, sex, born, std::nullopt};
  auto tl = labseq::build_timelines({p}, labs).timelines.at(id);
  // Window starts after the third distinct date so eligibility holds.
  return {tl, labseq::Window::ending_at(d + 30)};
}

}  // namespace fixtures
