#include "labseq/encode.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace labseq {

using json = nlohmann::json;

std::vector<Date> event_dates(const PatientTimeline& timeline, const Window& window,
                              std::string_view creatinine, int min_dates) {
  std::vector<Date> dates;
  for (const auto& e : timeline.events) {
    if (e.marker == creatinine && e.date < window.start) dates.push_back(e.date);
  }
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  if (dates.size() < static_cast<std::size_t>(min_dates)) {
    throw Error("validation_error", "patient " + timeline.demographics.patient_id + " has only " +
                                        std::to_string(dates.size()) +
                                        " pre-window creatinine dates");
  }
  return dates;
}

Eigen::VectorXd features_at(const PatientTimeline& timeline, Date date,
                            const MarkerVocabulary& vocabulary) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocabulary.feature_dim()));
  auto first = std::lower_bound(timeline.events.begin(), timeline.events.end(), date,
                                [](const LabEvent& e, Date d) { return e.date < d; });
  for (auto it = first; it != timeline.events.end() && it->date == date; ++it) {
    auto k = vocabulary.index_of(it->marker);
    if (!k) continue;
    const auto col = static_cast<Eigen::Index>(2 * *k);
    x[col] = 1.0;
    if (it->abnormal) x[col + 1] = 1.0;
  }
  return x;
}

std::array<double, kStaticDim> static_features(const PatientDemographics& demographics,
                                               const Window& window) {
  const double age_years = (window.start - demographics.birth_date) / kDaysPerYear;
  return {age_years / kAgeScaleYears, demographics.sex == Sex::male ? 1.0 : 0.0};
}

EncodedSequence encode_sequence(const PatientTimeline& timeline, const Window& window,
                                const MarkerVocabulary& vocabulary, int max_len) {
  if (max_len < 1) throw Error("config_error", "max_len must be positive");
  auto dates = event_dates(timeline, window, vocabulary.creatinine());
  if (dates.size() > static_cast<std::size_t>(max_len)) {
    dates.erase(dates.begin(), dates.end() - max_len);
  }
  EncodedSequence seq;
  seq.patient_id = timeline.demographics.patient_id;
  seq.valid_length = static_cast<int>(dates.size());
  seq.matrix = Eigen::MatrixXd::Zero(max_len, static_cast<Eigen::Index>(vocabulary.feature_dim()));
  const int offset = max_len - seq.valid_length;
  for (int i = 0; i < seq.valid_length; ++i) {
    seq.matrix.row(offset + i) = features_at(timeline, dates[static_cast<std::size_t>(i)], vocabulary).transpose();
  }
  seq.statics = static_features(timeline.demographics, window);
  return seq;
}

std::vector<Eigen::VectorXd> decode_rows(const EncodedSequence& seq) {
  std::vector<Eigen::VectorXd> rows;
  const auto n = seq.matrix.rows();
  for (auto r = n - seq.valid_length; r < n; ++r) rows.emplace_back(seq.matrix.row(r).transpose());
  return rows;
}

std::vector<EncodedSequence> encode_cohort(const TimelineSet& timelines,
                                           const std::vector<CohortEntry>& cohort,
                                           const MarkerVocabulary& vocabulary, int max_len) {
  std::vector<EncodedSequence> out;
  for (const auto& entry : cohort) {
    if (!entry.eligible()) continue;
    auto it = timelines.timelines.find(entry.patient_id);
    if (it == timelines.timelines.end()) {
      throw Error("stale_input", "cohort patient " + entry.patient_id + " missing from timelines");
    }
    auto seq = encode_sequence(it->second, entry.window, vocabulary, max_len);
    seq.label = entry.label.value_or(0);
    seq.split = entry.split;
    out.push_back(std::move(seq));
  }
  std::sort(out.begin(), out.end(), [](const EncodedSequence& a, const EncodedSequence& b) {
    return a.patient_id < b.patient_id;
  });
  return out;
}

std::string encoded_to_jsonl(const EncodedSequence& seq) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < seq.matrix.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < seq.matrix.cols(); ++c) row.push_back(seq.matrix(r, c) != 0.0 ? 1 : 0);
    rows.push_back(std::move(row));
  }
  json j = {{"patient_id", seq.patient_id},
            {"split", seq.split ? json(std::string(to_string(*seq.split))) : json(nullptr)},
            {"label", seq.label},
            {"valid_length", seq.valid_length},
            {"statics", {seq.statics[0], seq.statics[1]}},
            {"matrix", std::move(rows)}};
  return j.dump();
}

EncodedSequence encoded_from_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", std::string("malformed encoded record: ") + e.what());
  }
  EncodedSequence seq;
  seq.patient_id = j.at("patient_id").get<std::string>();
  if (!j.at("split").is_null()) seq.split = parse_split(j.at("split").get<std::string>());
  seq.label = j.at("label").get<int>();
  seq.valid_length = j.at("valid_length").get<int>();
  seq.statics = {j.at("statics").at(0).get<double>(), j.at("statics").at(1).get<double>()};
  const auto& rows = j.at("matrix");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = n_rows > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  seq.matrix = Eigen::MatrixXd::Zero(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw Error("parse_error", "ragged matrix for patient " + seq.patient_id);
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) seq.matrix(r, c) = row.at(static_cast<std::size_t>(c)).get<int>();
  }
  return seq;
}

std::vector<EncodedSequence> read_encoded(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_input", "cannot open " + path.string());
  std::vector<EncodedSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(encoded_from_jsonl(line));
  }
  return out;
}

}  // namespace labseq
