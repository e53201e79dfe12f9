#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "labseq/pipeline.hpp"

namespace labseq {

namespace {

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error("config_error", "invalid value '" + std::string(value) + "' for " + std::string(key));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v);
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto comma = v.find(',', start);
    if (comma == std::string_view::npos) comma = v.size();
    auto item = v.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    parts.push_back(item);
    start = comma + 1;
  }
  return parts;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt_double(values[i]);
  return out;
}

std::vector<double> parse_doubles(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

// Typed accessors for one member.
Field dbl(const char* key, double RunConfig::*outer) {
  return {key, [=](const RunConfig& c) { return fmt_double(c.*outer); },
          [=](RunConfig& c, std::string_view v) { c.*outer = parse_double(key, v); }};
}

template <typename Section>
Field dbl(const char* key, Section RunConfig::*section, double Section::*member) {
  return {key, [=](const RunConfig& c) { return fmt_double(c.*section.*member); },
          [=](RunConfig& c, std::string_view v) { c.*section.*member = parse_double(key, v); }};
}

template <typename Section>
Field integer(const char* key, Section RunConfig::*section, int Section::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, std::string_view v) { c.*section.*member = parse_int<int>(key, v); }};
}

Field integer(const char* key, int RunConfig::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*member); },
          [=](RunConfig& c, std::string_view v) { c.*member = parse_int<int>(key, v); }};
}

Field list(const char* key, std::vector<double> SynthConfig::*member) {
  return {key, [=](const RunConfig& c) { return join_doubles(c.synth.*member); },
          [=](RunConfig& c, std::string_view v) { c.synth.*member = parse_doubles(key, v); }};
}

Field date(const char* key, Date SynthConfig::*member) {
  return {key, [=](const RunConfig& c) { return (c.synth.*member).iso(); },
          [=](RunConfig& c, std::string_view v) {
            try {
              c.synth.*member = Date::parse(v);
            } catch (const Error&) {
              bad_value(key, v);
            }
          }};
}

Field path(const char* key, std::filesystem::path RunConfig::*member) {
  return {key, [=](const RunConfig& c) { return (c.*member).string(); },
          [=](RunConfig& c, std::string_view v) { c.*member = std::filesystem::path(std::string(v)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      path("data.patients", &RunConfig::patients),
      path("data.labs", &RunConfig::labs),
      path("out", &RunConfig::out),
      {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, std::string_view v) { c.seed = parse_int<std::uint64_t>("seed", v); }},
      {"vocabulary.markers",
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.markers.size(); ++i) out += (i ? "," : "") + c.markers[i];
         return out;
       },
       [](RunConfig& c, std::string_view v) {
         c.markers.clear();
         for (auto item : split_list(v)) c.markers.emplace_back(item);
       }},
      {"vocabulary.creatinine", [](const RunConfig& c) { return c.creatinine; },
       [](RunConfig& c, std::string_view v) { c.creatinine = std::string(v); }},
      integer("cohort.window_days", &RunConfig::cohort, &CohortRules::window_days),
      integer("cohort.min_pre_window_days", &RunConfig::cohort, &CohortRules::min_pre_window_days),
      {"split.fractions",
       [](const RunConfig& c) { return join_doubles({c.split[0], c.split[1], c.split[2]}); },
       [](RunConfig& c, std::string_view v) {
         auto f = parse_doubles("split.fractions", v);
         if (f.size() != 3) bad_value("split.fractions", v);
         c.split = {f[0], f[1], f[2]};
       }},
      integer("encode.max_len", &RunConfig::max_len),
      {"synth.n_patients", [](const RunConfig& c) { return std::to_string(c.synth.n_patients); },
       [](RunConfig& c, std::string_view v) { c.synth.n_patients = parse_int<std::size_t>("synth.n_patients", v); }},
      dbl("synth.severity_drift", &RunConfig::synth, &SynthConfig::severity_drift),
      dbl("synth.severity_reversion", &RunConfig::synth, &SynthConfig::severity_reversion),
      dbl("synth.severity_level_sd", &RunConfig::synth, &SynthConfig::severity_level_sd),
      dbl("synth.visit_gap_days", &RunConfig::synth, &SynthConfig::visit_gap_days),
      list("synth.informativeness", &SynthConfig::informativeness),
      list("synth.offset", &SynthConfig::offset),
      list("synth.inclusion", &SynthConfig::inclusion),
      dbl("synth.death_hazard_scale", &RunConfig::synth, &SynthConfig::death_hazard_scale),
      integer("synth.death_delay_max_days", &RunConfig::synth, &SynthConfig::death_delay_max_days),
      dbl("synth.long_follow_up_fraction", &RunConfig::synth, &SynthConfig::long_follow_up_fraction),
      date("synth.study_start", &SynthConfig::study_start),
      date("synth.study_end", &SynthConfig::study_end),
      integer("model.hidden_dim", &RunConfig::train, &TrainConfig::hidden_dim),
      dbl("train.learning_rate", &RunConfig::train, &TrainConfig::learning_rate),
      dbl("train.beta1", &RunConfig::train, &TrainConfig::beta1),
      dbl("train.beta2", &RunConfig::train, &TrainConfig::beta2),
      dbl("train.epsilon", &RunConfig::train, &TrainConfig::epsilon),
      integer("train.batch_size", &RunConfig::train, &TrainConfig::batch_size),
      integer("train.max_epochs", &RunConfig::train, &TrainConfig::max_epochs),
      integer("train.patience", &RunConfig::train, &TrainConfig::patience),
      dbl("train.min_improvement", &RunConfig::train, &TrainConfig::min_improvement),
      integer("eval.resamples", &RunConfig::resamples),
      dbl("eval.threshold", &RunConfig::threshold),
      dbl("tsne.perplexity", &RunConfig::tsne, &TsneConfig::perplexity),
      integer("tsne.iterations", &RunConfig::tsne, &TsneConfig::iterations),
      dbl("tsne.exaggeration", &RunConfig::tsne, &TsneConfig::exaggeration),
      integer("tsne.exaggeration_iterations", &RunConfig::tsne, &TsneConfig::exaggeration_iterations),
      dbl("tsne.learning_rate", &RunConfig::tsne, &TsneConfig::learning_rate),
      dbl("tsne.initial_momentum", &RunConfig::tsne, &TsneConfig::initial_momentum),
      dbl("tsne.final_momentum", &RunConfig::tsne, &TsneConfig::final_momentum),
      integer("tsne.momentum_switch", &RunConfig::tsne, &TsneConfig::momentum_switch),
      integer("report.timeline_patients", &RunConfig::timeline_patients),
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Config sections each stage depends on, cumulative along the pipeline.
std::vector<std::string> stage_prefixes(std::string_view stage) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> own = {
      {"synth", {"seed", "vocabulary.", "synth."}},
      {"cohort", {"data.", "cohort.", "split."}},
      {"encode", {"encode."}},
      {"train", {"model.", "train."}},
      {"eval", {"eval."}},
      {"tsne", {"tsne."}},
      {"report", {"report."}},
  };
  std::vector<std::string> prefixes;
  for (const auto& [name, p] : own) {
    if (name == "tsne" && stage == "eval") continue;
    if (name == "eval" && stage == "tsne") continue;
    prefixes.insert(prefixes.end(), p.begin(), p.end());
    if (name == stage) return prefixes;
  }
  throw Error("config_error", "unknown stage '" + std::string(stage) + "'");
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("config_error", what); };
  (void)vocabulary();
  if (cohort.window_days < 1) fail("cohort.window_days must be positive");
  if (cohort.min_pre_window_days < 1) fail("cohort.min_pre_window_days must be positive");
  if (max_len < cohort.min_pre_window_days) fail("encode.max_len must be at least cohort.min_pre_window_days");
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(split[k] > 0.0)) {
      static const char* names[] = {"train", "validation", "test"};
      fail(std::string("split.fractions gives an empty ") + names[k] + " split");
    }
  }
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) fail("split.fractions must sum to 1");
  if (patients.empty() != labs.empty()) fail("data.patients and data.labs must be set together");
  if (synthetic()) synth.validate();
  train.validate();
  if (resamples < 1) fail("eval.resamples must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("eval.threshold must lie in [0,1]");
  if (tsne.iterations < 250) fail("tsne.iterations must be at least 250");
  if (timeline_patients < 1) fail("report.timeline_patients must be positive");
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

RunConfig config_from_text(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config_error", "line " + std::to_string(number) + ": expected 'key = value'");
    }
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    bool found = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(base, value);
        found = true;
        break;
      }
    }
    if (!found) throw Error("config_error", "line " + std::to_string(number) + ": unknown key '" + std::string(key) + "'");
  }
  base.synth.vocabulary = base.vocabulary();
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing_input", "config file not found: " + path.string());
  return config_from_text(read_file(path));
}

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  return derive_seed(master, "stage:" + std::string(stage));
}

std::string stage_config_hash(const RunConfig& cfg, std::string_view stage) {
  const auto prefixes = stage_prefixes(stage);
  std::string text;
  for (const auto& f : fields()) {
    const std::string_view key = f.key;
    for (const auto& p : prefixes) {
      if (key == p || (p.back() == '.' && key.substr(0, p.size()) == p)) {
        text += std::string(key) + " = " + f.get(cfg) + "\n";
        break;
      }
    }
  }
  return sha256_hex(text);
}

}  // namespace labseq
