#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "labseq/cohort.hpp"
#include "labseq/ingest.hpp"
#include "labseq/vocabulary.hpp"

namespace labseq {

inline constexpr int kMaxSequenceLength = 100;
inline constexpr int kStaticDim = 2;
inline constexpr double kAgeScaleYears = 18.0;

/// Model input for one patient. Rows [0, rows - valid_length) are zero padding;
/// the remaining rows are event time points in ascending date order.
struct EncodedSequence {
  std::string patient_id;
  Eigen::MatrixXd matrix;  // max_len x (2 * markers), entries 0/1
  int valid_length = 0;
  std::array<double, kStaticDim> statics{};  // (age / 18 at window start, sex: female 0, male 1)
  int label = 0;
  std::optional<Split> split;
};

/// Distinct creatinine dates strictly before window.start, ascending.
/// Throws Error{"validation_error"} with fewer than kMinPreWindowDays dates.
std::vector<Date> event_dates(const PatientTimeline& timeline, const Window& window,
                              std::string_view creatinine,
                              int min_dates = kMinPreWindowDays);

/// Presence/abnormal indicators for every marker measured on `date`.
Eigen::VectorXd features_at(const PatientTimeline& timeline, Date date,
                            const MarkerVocabulary& vocabulary);

std::array<double, kStaticDim> static_features(const PatientDemographics& demographics,
                                               const Window& window);

/// Keeps the most recent `max_len` event dates and left-pads with zero rows.
EncodedSequence encode_sequence(const PatientTimeline& timeline, const Window& window,
                                const MarkerVocabulary& vocabulary,
                                int max_len = kMaxSequenceLength);

/// Valid (non-padding) rows in order.
std::vector<Eigen::VectorXd> decode_rows(const EncodedSequence& seq);

/// Encodes every eligible cohort entry; output ordered by patient_id.
std::vector<EncodedSequence> encode_cohort(const TimelineSet& timelines,
                                           const std::vector<CohortEntry>& cohort,
                                           const MarkerVocabulary& vocabulary,
                                           int max_len = kMaxSequenceLength);

std::string encoded_to_jsonl(const EncodedSequence& seq);
EncodedSequence encoded_from_jsonl(std::string_view line);

std::vector<EncodedSequence> read_encoded(const std::filesystem::path& path);

}  // namespace labseq
