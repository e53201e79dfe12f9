#include "labseq/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace labseq {

using json = nlohmann::json;

namespace {

Error line_error(std::size_t line, const std::string& what) {
  return Error("parse_error", "line " + std::to_string(line) + ": " + what);
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw line_error(line, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) throw line_error(line, "record is not a JSON object");
    fn(record, line);
  }
}

const json& require(const json& record, const char* field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) {
    throw line_error(line, std::string("missing field '") + field + "'");
  }
  return *it;
}

std::string require_string(const json& record, const char* field, std::size_t line) {
  const auto& v = require(record, field, line);
  if (!v.is_string()) throw line_error(line, std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

Date require_date(const json& record, const char* field, std::size_t line) {
  auto s = require_string(record, field, line);
  try {
    return Date::parse(s);
  } catch (const Error& e) {
    throw line_error(line, std::string("field '") + field + "': " + e.what());
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_input", "cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view to_string(Sex sex) { return sex == Sex::male ? "male" : "female"; }

std::vector<PatientDemographics> parse_patients(std::istream& in) {
  std::vector<PatientDemographics> out;
  std::unordered_set<std::string> seen;
  for_each_record(in, [&](const json& r, std::size_t line) {
    PatientDemographics p;
    p.patient_id = require_string(r, "patient_id", line);
    if (p.patient_id.empty()) throw line_error(line, "empty patient_id");
    const auto sex = require_string(r, "sex", line);
    if (sex == "female") {
      p.sex = Sex::female;
    } else if (sex == "male") {
      p.sex = Sex::male;
    } else {
      throw line_error(line, "sex must be \"female\" or \"male\"");
    }
    p.birth_date = require_date(r, "birth_date", line);
    if (auto it = r.find("death_date"); it != r.end() && !it->is_null()) {
      p.death_date = require_date(r, "death_date", line);
      if (*p.death_date < p.birth_date) {
        throw Error("validation_error",
                    "line " + std::to_string(line) + ": death_date precedes birth_date");
      }
    }
    if (!seen.insert(p.patient_id).second) {
      throw Error("validation_error",
                  "line " + std::to_string(line) + ": duplicate patient_id " + p.patient_id);
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<PatientDemographics> load_patients(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_patients(in);
}

LabLoadResult parse_labs(std::istream& in, const MarkerVocabulary& vocabulary) {
  LabLoadResult out;
  for_each_record(in, [&](const json& r, std::size_t line) {
    LabEvent e;
    e.patient_id = require_string(r, "patient_id", line);
    e.date = require_date(r, "date", line);
    e.marker = require_string(r, "marker", line);
    const auto& flag = require(r, "abnormal", line);
    if (flag.is_boolean()) {
      e.abnormal = flag.get<bool>();
    } else if (flag.is_string() && (flag == "true" || flag == "false")) {
      e.abnormal = flag == "true";
    } else {
      throw line_error(line, "field 'abnormal' must be a boolean");
    }
    if (!vocabulary.contains(e.marker)) {
      ++out.discarded_unknown_marker;
      return;
    }
    out.events.push_back(std::move(e));
  });
  return out;
}

LabLoadResult load_labs(const std::filesystem::path& path, const MarkerVocabulary& vocabulary) {
  auto in = open_or_throw(path);
  return parse_labs(in, vocabulary);
}

TimelineSet build_timelines(const std::vector<PatientDemographics>& patients,
                            const std::vector<LabEvent>& labs) {
  TimelineSet set;
  for (const auto& p : patients) set.timelines.emplace(p.patient_id, PatientTimeline{p, {}});

  for (const auto& e : labs) {
    auto it = set.timelines.find(e.patient_id);
    if (it == set.timelines.end()) {
      ++set.orphan_events;
      continue;
    }
    const auto& demo = it->second.demographics;
    if (e.date < demo.birth_date || (demo.death_date && e.date > *demo.death_date)) {
      ++set.out_of_range_events;
      continue;
    }
    it->second.events.push_back(e);
  }

  for (auto& [id, tl] : set.timelines) {
    auto& ev = tl.events;
    std::sort(ev.begin(), ev.end(), [](const LabEvent& a, const LabEvent& b) {
      return std::tie(a.date, a.marker) < std::tie(b.date, b.marker);
    });
    std::vector<LabEvent> merged;
    merged.reserve(ev.size());
    for (auto& e : ev) {
      if (!merged.empty() && merged.back().date == e.date && merged.back().marker == e.marker) {
        merged.back().abnormal = merged.back().abnormal || e.abnormal;
        ++set.merged_duplicates;
      } else {
        merged.push_back(std::move(e));
      }
    }
    ev = std::move(merged);
  }
  return set;
}

std::string patient_to_jsonl(const PatientDemographics& p) {
  json j = {{"patient_id", p.patient_id},
            {"sex", std::string(to_string(p.sex))},
            {"birth_date", p.birth_date.iso()}};
  if (p.death_date) j["death_date"] = p.death_date->iso();
  return j.dump();
}

std::string lab_to_jsonl(const LabEvent& e) {
  json j = {{"patient_id", e.patient_id},
            {"date", e.date.iso()},
            {"marker", e.marker},
            {"abnormal", e.abnormal}};
  return j.dump();
}

}  // namespace labseq
