#pragma once

#include <functional>
#include <string>
#include <vector>

#include "labseq/common.hpp"
#include "labseq/ingest.hpp"

namespace testing {

inline labseq::Date day(const char* iso) { return labseq::Date::parse(iso); }

// Code of the labseq::Error thrown by fn, or "" if nothing was thrown.
inline std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const labseq::Error& e) {
    return e.code();
  }
  return "";
}

inline labseq::LabEvent lab(const std::string& id, labseq::Date date, const std::string& marker,
                            bool abnormal = false) {
  return {id, date, marker, abnormal};
}

// Timeline with creatinine on each listed date, plus optional extra events.
inline labseq::PatientTimeline timeline(const std::string& id, labseq::Date birth,
                                        std::optional<labseq::Date> death,
                                        std::vector<labseq::LabEvent> events) {
  labseq::PatientDemographics p{id, labseq::Sex::female, birth, death};
  auto set = labseq::build_timelines({p}, events);
  return set.timelines.at(id);
}

}  // namespace testing
