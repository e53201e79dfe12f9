#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labseq/common.hpp"
#include "labseq/vocabulary.hpp"

namespace labseq {

enum class Sex { female, male };

std::string_view to_string(Sex sex);

struct PatientDemographics {
  std::string patient_id;
  Sex sex = Sex::female;
  Date birth_date;
  std::optional<Date> death_date;

  bool operator==(const PatientDemographics&) const = default;
};

struct LabEvent {
  std::string patient_id;
  Date date;
  std::string marker;
  bool abnormal = false;

  bool operator==(const LabEvent&) const = default;
};

/// Events sorted by (date, marker) with no repeated (date, marker) pair.
struct PatientTimeline {
  PatientDemographics demographics;
  std::vector<LabEvent> events;

  bool operator==(const PatientTimeline&) const = default;
};

struct LabLoadResult {
  std::vector<LabEvent> events;
  std::size_t discarded_unknown_marker = 0;
};

struct TimelineSet {
  std::map<std::string, PatientTimeline> timelines;  // keyed and ordered by patient_id
  std::size_t orphan_events = 0;        // lab rows without demographics
  std::size_t out_of_range_events = 0;  // dated before birth or after death
  std::size_t merged_duplicates = 0;
};

// JSON-lines readers. Errors name the 1-based line number. Blank lines are skipped.
std::vector<PatientDemographics> parse_patients(std::istream& in);
std::vector<PatientDemographics> load_patients(const std::filesystem::path& path);

LabLoadResult parse_labs(std::istream& in, const MarkerVocabulary& vocabulary);
LabLoadResult load_labs(const std::filesystem::path& path, const MarkerVocabulary& vocabulary);

/// Groups labs per patient, sorts them, and OR-merges duplicate (date, marker)
/// rows. Result is independent of the order of `labs`.
TimelineSet build_timelines(const std::vector<PatientDemographics>& patients,
                            const std::vector<LabEvent>& labs);

std::string patient_to_jsonl(const PatientDemographics& p);
std::string lab_to_jsonl(const LabEvent& e);

}  // namespace labseq
