#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "labseq/ingest.hpp"
#include "support.hpp"

using namespace labseq;
using testing::day;
using testing::error_code;

namespace {

std::vector<PatientDemographics> patients_from(const std::string& text) {
  std::istringstream in(text);
  return parse_patients(in);
}

LabLoadResult labs_from(const std::string& text) {
  std::istringstream in(text);
  return parse_labs(in, MarkerVocabulary::default_paediatric());
}

}  // namespace

TEST_CASE("patients: empty file and a single record") {
  CHECK(patients_from("").empty());
  auto ps = patients_from(R"({"patient_id":"A","sex":"male","birth_date":"2015-03-02"})" "\n");
  REQUIRE(ps.size() == 1);
  CHECK(ps[0].patient_id == "A");
  CHECK(ps[0].sex == Sex::male);
  CHECK(ps[0].birth_date == Date::from_ymd(2015, 3, 2));
  CHECK_FALSE(ps[0].death_date.has_value());
}

TEST_CASE("patients: validation errors") {
  CHECK(error_code([] {
          patients_from(R"({"patient_id":"A","sex":"female","birth_date":"2020-01-01","death_date":"2019-01-01"})");
        }) == "validation_error");
  CHECK(error_code([] {
          patients_from(R"({"patient_id":"A","sex":"female","birth_date":"2020-01-01"})" "\n"
                        R"({"patient_id":"A","sex":"male","birth_date":"2020-01-02"})");
        }) == "validation_error");

  try {
    patients_from(R"({"patient_id":"A","sex":"female","birth_date":"2020-01-01"})" "\n{not json\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == "parse_error");
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(error_code([] { patients_from(R"({"patient_id":"A","sex":"female","birth_date":"2020-13-01"})"); }) ==
        "parse_error");
}

TEST_CASE("labs: vocabulary filter, pass-through duplicates, string flags") {
  auto r = labs_from(R"({"patient_id":"A","date":"2020-01-01","marker":"troponin","abnormal":true})" "\n"
                     R"({"patient_id":"A","date":"2020-01-01","marker":"creatinine","abnormal":"true"})" "\n"
                     R"({"patient_id":"A","date":"2020-01-01","marker":"creatinine","abnormal":"true"})" "\n");
  CHECK(r.discarded_unknown_marker == 1);
  REQUIRE(r.events.size() == 2);
  CHECK(r.events[0].abnormal);
  CHECK(r.events[0] == r.events[1]);

  CHECK(error_code([] { labs_from(R"({"patient_id":"A","marker":"urea","abnormal":false})"); }) == "parse_error");
}

TEST_CASE("timelines: OR-merge of duplicate results and empty timelines") {
  std::vector<PatientDemographics> ps{{"A", Sex::female, day("2010-01-01"), {}},
                                      {"B", Sex::male, day("2011-01-01"), {}}};
  std::vector<LabEvent> labs{{"A", day("2020-01-05"), "creatinine", false},
                             {"A", day("2020-01-05"), "creatinine", true}};
  auto set = build_timelines(ps, labs);
  REQUIRE(set.timelines.size() == 2);
  REQUIRE(set.timelines.at("A").events.size() == 1);
  CHECK(set.timelines.at("A").events[0].abnormal);
  CHECK(set.merged_duplicates == 1);
  CHECK(set.timelines.at("B").events.empty());
}

TEST_CASE("timelines: orphans and events outside life are tallied and dropped") {
  std::vector<PatientDemographics> ps{{"A", Sex::female, day("2010-01-01"), day("2020-06-01")}};
  std::vector<LabEvent> labs{{"A", day("2009-12-31"), "urea", false},
                             {"A", day("2020-06-02"), "urea", false},
                             {"A", day("2020-06-01"), "urea", false},
                             {"Z", day("2020-01-01"), "urea", false}};
  auto set = build_timelines(ps, labs);
  CHECK(set.orphan_events == 1);
  CHECK(set.out_of_range_events == 2);
  CHECK(set.timelines.at("A").events.size() == 1);
}

TEST_CASE("timelines: result is sorted and independent of input order") {
  std::mt19937_64 rng(11);
  const auto codes = MarkerVocabulary::default_paediatric().codes();
  std::vector<PatientDemographics> ps;
  std::vector<LabEvent> labs;
  for (int p = 0; p < 3; ++p) {
    const std::string id = "P" + std::to_string(p);
    ps.push_back({id, Sex::female, day("2005-01-01"), {}});
    for (int k = 0; k < 5; ++k) {
      labs.push_back({id, day("2020-01-01") + static_cast<int>(rng() % 20), codes[rng() % codes.size()],
                      rng() % 2 == 0});
    }
  }
  const auto reference = build_timelines(ps, labs);
  REQUIRE(reference.timelines.size() == 3);
  for (const auto& [id, tl] : reference.timelines) {
    for (std::size_t i = 1; i < tl.events.size(); ++i) {
      const auto& a = tl.events[i - 1];
      const auto& b = tl.events[i];
      CHECK(std::tie(a.date, a.marker) < std::tie(b.date, b.marker));
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(labs.begin(), labs.end(), rng);
    std::shuffle(ps.begin(), ps.end(), rng);
    CHECK(build_timelines(ps, labs).timelines == reference.timelines);
  }
}

TEST_CASE("records round-trip through their JSON-lines form") {
  PatientDemographics p{"Q1", Sex::male, day("2012-02-29"), day("2021-07-04")};
  std::istringstream in(patient_to_jsonl(p));
  CHECK(parse_patients(in).at(0) == p);
  LabEvent e{"Q1", day("2020-02-02"), "crp", true};
  std::istringstream lin(lab_to_jsonl(e));
  CHECK(parse_labs(lin, MarkerVocabulary::default_paediatric()).events.at(0) == e);
}

TEST_CASE("vocabulary shape") {
  auto v = MarkerVocabulary::default_paediatric();
  CHECK(v.size() == 15);
  CHECK(v.feature_dim() == 30);
  CHECK(v.creatinine() == "creatinine");
  auto codes = v.codes();
  codes.pop_back();
  CHECK(error_code([&] { MarkerVocabulary(codes, "creatinine"); }) != "");
  std::swap(codes[0], codes[1]);
  codes.push_back("alkaline_phosphatase");
  CHECK(MarkerVocabulary(codes, "creatinine").hash() != v.hash());
}
