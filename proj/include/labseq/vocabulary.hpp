#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace labseq {

inline constexpr std::size_t kMarkerCount = 15;

/// Ordered set of laboratory marker codes. Column 2k of the feature vector is
/// presence of marker k, column 2k+1 its abnormal flag.
class MarkerVocabulary {
 public:
  /// Throws Error if codes are not exactly kMarkerCount unique entries or if
  /// `creatinine` is not among them.
  MarkerVocabulary(std::vector<std::string> codes, std::string creatinine);

  static MarkerVocabulary default_paediatric();

  const std::vector<std::string>& codes() const { return codes_; }
  std::size_t size() const { return codes_.size(); }
  std::size_t feature_dim() const { return 2 * codes_.size(); }
  const std::string& creatinine() const { return codes_[creatinine_index_]; }
  std::size_t creatinine_index() const { return creatinine_index_; }

  std::optional<std::size_t> index_of(std::string_view code) const;
  bool contains(std::string_view code) const { return index_of(code).has_value(); }

  /// SHA-256 over the ordered codes and the creatinine designation.
  std::string hash() const;

 private:
  std::vector<std::string> codes_;
  std::size_t creatinine_index_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace labseq
