#include "labseq/vocabulary.hpp"

#include "labseq/common.hpp"

namespace labseq {

MarkerVocabulary::MarkerVocabulary(std::vector<std::string> codes, std::string creatinine)
    : codes_(std::move(codes)) {
  if (codes_.size() != kMarkerCount) {
    throw Error("config_error", "marker vocabulary must have exactly " +
                                    std::to_string(kMarkerCount) + " codes, got " +
                                    std::to_string(codes_.size()));
  }
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (codes_[i].empty()) throw Error("config_error", "empty marker code");
    if (!index_.emplace(codes_[i], i).second) {
      throw Error("config_error", "duplicate marker code " + codes_[i]);
    }
  }
  auto it = index_.find(creatinine);
  if (it == index_.end()) {
    throw Error("config_error", "creatinine code '" + creatinine + "' not in vocabulary");
  }
  creatinine_index_ = it->second;
}

MarkerVocabulary MarkerVocabulary::default_paediatric() {
  return MarkerVocabulary({"creatinine", "urea", "sodium", "potassium", "chloride", "bicarbonate",
                           "calcium", "phosphate", "magnesium", "albumin", "haemoglobin",
                           "white_cell_count", "platelets", "crp", "alkaline_phosphatase"},
                          "creatinine");
}

std::optional<std::size_t> MarkerVocabulary::index_of(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string MarkerVocabulary::hash() const {
  std::string joined;
  for (const auto& c : codes_) {
    joined += c;
    joined.push_back('\n');
  }
  joined += "creatinine=" + creatinine();
  return sha256_hex(joined);
}

}  // namespace labseq
