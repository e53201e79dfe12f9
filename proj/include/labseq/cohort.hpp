#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labseq/common.hpp"
#include "labseq/ingest.hpp"

namespace labseq {

inline constexpr int kWindowDays = 30;
inline constexpr int kMinPreWindowDays = 3;

/// Prediction window, inclusive on both ends; end - start == length days.
struct Window {
  Date start;
  Date end;

  static Window ending_at(Date end, int length_days = kWindowDays);
  bool contains(Date d) const { return start <= d && d <= end; }
  bool operator==(const Window&) const = default;
};

enum class Exclusion { no_creatinine, too_few_pre_window_days, deceased_no_window_measurement };
enum class Split { train, validation, test };

std::string_view to_string(Exclusion e);
std::string_view to_string(Split s);
Exclusion parse_exclusion(std::string_view s);
Split parse_split(std::string_view s);

struct CohortEntry {
  std::string patient_id;
  Window window;
  std::optional<int> label;  // present iff exclusion absent
  std::optional<Split> split;
  std::optional<Exclusion> exclusion;

  bool eligible() const { return !exclusion.has_value(); }
  bool operator==(const CohortEntry&) const = default;
};

struct CohortRules {
  std::string creatinine = "creatinine";
  int window_days = kWindowDays;
  int min_pre_window_days = kMinPreWindowDays;
};

/// Death date if present, else the last creatinine date.
/// Throws Error{"no_creatinine"} when the timeline has no creatinine.
Date follow_up_end(const PatientTimeline& timeline, std::string_view creatinine);

/// nullopt means eligible.
std::optional<Exclusion> check_eligibility(const PatientTimeline& timeline, const Window& window,
                                           std::string_view creatinine,
                                           int min_pre_window_days = kMinPreWindowDays);

/// 1 iff a creatinine event inside the window is flagged abnormal.
int label(const PatientTimeline& timeline, const Window& window, std::string_view creatinine);

/// Applies follow-up, eligibility and labelling to every timeline. Excluded
/// patients are kept with their exclusion reason. Output ordered by patient_id.
std::vector<CohortEntry> build_cohort(const TimelineSet& timelines, const CohortRules& rules);

using SplitFractions = std::array<double, 3>;
inline constexpr SplitFractions kDefaultSplit{0.7, 0.1, 0.2};

/// Per-class split sizes from largest-remainder rounding of n * fractions.
/// Remainder ties go to the earlier split.
std::array<std::size_t, 3> largest_remainder_counts(std::size_t n, const SplitFractions& fractions);

/// Stratified split over the labelled entries. Each class is sorted by
/// patient_id, shuffled with the seed and cut into largest-remainder counts.
/// Excluded entries are returned unchanged. Output ordered by patient_id.
std::vector<CohortEntry> stratified_split(std::vector<CohortEntry> entries,
                                          const SplitFractions& fractions, std::uint64_t seed);

std::string cohort_entry_to_jsonl(const CohortEntry& e);
CohortEntry cohort_entry_from_jsonl(std::string_view line);

}  // namespace labseq
