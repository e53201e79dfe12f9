#include "labseq/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

namespace labseq {

using json = nlohmann::json;

Window Window::ending_at(Date end, int length_days) { return Window{end - length_days, end}; }

std::string_view to_string(Exclusion e) {
  switch (e) {
    case Exclusion::no_creatinine: return "no_creatinine";
    case Exclusion::too_few_pre_window_days: return "too_few_pre_window_days";
    case Exclusion::deceased_no_window_measurement: return "deceased_no_window_measurement";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

Exclusion parse_exclusion(std::string_view s) {
  for (auto e : {Exclusion::no_creatinine, Exclusion::too_few_pre_window_days,
                 Exclusion::deceased_no_window_measurement}) {
    if (to_string(e) == s) return e;
  }
  throw Error("parse_error", "unknown exclusion reason '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (auto v : {Split::train, Split::validation, Split::test}) {
    if (to_string(v) == s) return v;
  }
  throw Error("parse_error", "unknown split '" + std::string(s) + "'");
}

Date follow_up_end(const PatientTimeline& timeline, std::string_view creatinine) {
  std::optional<Date> last;
  for (const auto& e : timeline.events) {
    if (e.marker == creatinine && (!last || e.date > *last)) last = e.date;
  }
  if (!last) {
    throw Error("no_creatinine",
                "patient " + timeline.demographics.patient_id + " has no creatinine results");
  }
  return timeline.demographics.death_date.value_or(*last);
}

std::optional<Exclusion> check_eligibility(const PatientTimeline& timeline, const Window& window,
                                           std::string_view creatinine,
                                           int min_pre_window_days) {
  std::set<Date> pre_window_days;
  bool in_window = false;
  for (const auto& e : timeline.events) {
    if (e.marker != creatinine) continue;
    if (e.date < window.start) pre_window_days.insert(e.date);
    if (window.contains(e.date)) in_window = true;
  }
  if (pre_window_days.size() < static_cast<std::size_t>(min_pre_window_days)) {
    return Exclusion::too_few_pre_window_days;
  }
  if (timeline.demographics.death_date && !in_window) {
    return Exclusion::deceased_no_window_measurement;
  }
  return std::nullopt;
}

int label(const PatientTimeline& timeline, const Window& window, std::string_view creatinine) {
  return std::any_of(timeline.events.begin(), timeline.events.end(),
                     [&](const LabEvent& e) {
                       return e.marker == creatinine && e.abnormal && window.contains(e.date);
                     })
             ? 1
             : 0;
}

std::vector<CohortEntry> build_cohort(const TimelineSet& timelines, const CohortRules& rules) {
  std::vector<CohortEntry> out;
  out.reserve(timelines.timelines.size());
  for (const auto& [id, tl] : timelines.timelines) {
    CohortEntry entry;
    entry.patient_id = id;
    Date end;
    try {
      end = follow_up_end(tl, rules.creatinine);
    } catch (const Error& e) {
      if (e.code() != "no_creatinine") throw;
      entry.exclusion = Exclusion::no_creatinine;
      out.push_back(std::move(entry));
      continue;
    }
    entry.window = Window::ending_at(end, rules.window_days);
    entry.exclusion = check_eligibility(tl, entry.window, rules.creatinine, rules.min_pre_window_days);
    if (entry.eligible()) entry.label = label(tl, entry.window, rules.creatinine);
    out.push_back(std::move(entry));
  }
  return out;
}

std::array<std::size_t, 3> largest_remainder_counts(std::size_t n, const SplitFractions& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double quota = static_cast<double>(n) * fractions[k];
    counts[k] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    remainder[k] = quota - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

std::vector<CohortEntry> stratified_split(std::vector<CohortEntry> entries,
                                          const SplitFractions& fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0) || f > 1.0) throw Error("config_error", "split fractions must lie in [0,1]");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw Error("config_error", "split fractions must sum to 1");
  }
  std::sort(entries.begin(), entries.end(),
            [](const CohortEntry& a, const CohortEntry& b) { return a.patient_id < b.patient_id; });

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].eligible() && entries[i].label) by_class[*entries[i].label == 1].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw Error("validation_error", "stratified split needs at least one entry of each label");
  }

  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = by_class[cls];
    Rng rng(derive_seed(seed, cls == 1 ? "positive" : "negative"));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = largest_remainder_counts(idx.size(), fractions);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t c = 0; c < counts[k]; ++c) entries[idx[pos++]].split = static_cast<Split>(k);
    }
  }
  return entries;
}

std::string cohort_entry_to_jsonl(const CohortEntry& e) {
  json j;
  j["patient_id"] = e.patient_id;
  if (e.exclusion == Exclusion::no_creatinine) {
    j["window_start"] = nullptr;
    j["window_end"] = nullptr;
  } else {
    j["window_start"] = e.window.start.iso();
    j["window_end"] = e.window.end.iso();
  }
  j["label"] = e.label ? json(*e.label) : json(nullptr);
  j["split"] = e.split ? json(std::string(to_string(*e.split))) : json(nullptr);
  j["exclusion_reason"] = e.exclusion ? json(std::string(to_string(*e.exclusion))) : json(nullptr);
  return j.dump();
}

CohortEntry cohort_entry_from_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", std::string("malformed cohort record: ") + e.what());
  }
  CohortEntry e;
  e.patient_id = j.at("patient_id").get<std::string>();
  if (!j.at("window_start").is_null()) {
    e.window = Window{Date::parse(j.at("window_start").get<std::string>()),
                      Date::parse(j.at("window_end").get<std::string>())};
  }
  if (!j.at("label").is_null()) e.label = j.at("label").get<int>();
  if (!j.at("split").is_null()) e.split = parse_split(j.at("split").get<std::string>());
  if (!j.at("exclusion_reason").is_null()) {
    e.exclusion = parse_exclusion(j.at("exclusion_reason").get<std::string>());
  }
  return e;
}

}  // namespace labseq
