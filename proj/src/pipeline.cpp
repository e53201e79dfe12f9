#include "labseq/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "labseq/eval.hpp"

namespace labseq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Which stage writes each file inside the output directory.
const std::map<std::string, std::string>& producers() {
  static const std::map<std::string, std::string> table = {
      {"patients.jsonl", "synth"},   {"labs.jsonl", "synth"},        {"truth.jsonl", "synth"},
      {"cohort.jsonl", "cohort"},    {"encoded.jsonl", "encode"},    {"manifest.json", "encode"},
      {"checkpoint.json", "train"},  {"history.json", "train"},      {"run-manifest.json", "train"},
      {"metrics.json", "eval"},      {"roc.csv", "eval"},            {"confusion.json", "eval"},
      {"scores.csv", "eval"},        {"tsne.csv", "tsne"},           {"kl_trace.csv", "tsne"},
      {"timeline.svg", "report"},    {"roc.svg", "report"},          {"confusion.svg", "report"},
      {"tsne.svg", "report"},
  };
  return table;
}

fs::path manifest_path(const RunConfig& cfg, std::string_view stage) {
  return cfg.out / "stages" / (std::string(stage) + ".json");
}

fs::path patients_path(const RunConfig& cfg) { return cfg.synthetic() ? cfg.out / "patients.jsonl" : cfg.patients; }
fs::path labs_path(const RunConfig& cfg) { return cfg.synthetic() ? cfg.out / "labs.jsonl" : cfg.labs; }

// Name used in manifests: relative for files in the output directory.
std::string record_name(const RunConfig& cfg, const fs::path& p) {
  if (p.parent_path() == cfg.out) return p.filename().string();
  return p.string();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw Error("parse_error", p.string() + ": " + e.what());
  }
}

/// Confirms each input exists and, for files produced by an earlier stage,
/// that the file and the config it was produced under are unchanged.
std::map<std::string, std::string> verify_inputs(const RunConfig& cfg, const std::vector<fs::path>& inputs) {
  std::map<std::string, std::string> hashes;
  for (const auto& p : inputs) {
    const auto name = record_name(cfg, p);
    auto producer = producers().find(name);
    if (!fs::exists(p)) {
      std::string hint = producer != producers().end() ? " (run the " + producer->second + " stage first)" : "";
      throw Error("missing_input", "missing input file " + p.string() + hint);
    }
    const auto digest = sha256_file(p);
    hashes[name] = digest;
    if (p.parent_path() != cfg.out || producer == producers().end()) continue;

    const auto mpath = manifest_path(cfg, producer->second);
    if (!fs::exists(mpath)) throw Error("missing_input", "missing stage manifest " + mpath.string());
    const auto manifest = read_json(mpath);
    const auto& outputs = manifest.at("outputs");
    if (!outputs.contains(name) || outputs.at(name).get<std::string>() != digest) {
      throw Error("stale_input", name + " does not match the hash recorded by the " + producer->second + " stage");
    }
    if (manifest.at("config_hash").get<std::string>() != stage_config_hash(cfg, producer->second)) {
      throw Error("stale_input", name + " was produced by the " + producer->second +
                                     " stage under a different configuration");
    }
  }
  return hashes;
}

void write_manifest(const RunConfig& cfg, std::string_view stage, const std::map<std::string, std::string>& inputs,
                    const std::vector<fs::path>& outputs, json summary = json::object()) {
  json out = json::object();
  for (const auto& p : outputs) out[record_name(cfg, p)] = sha256_file(p);
  json m = {{"stage", std::string(stage)},
            {"config_hash", stage_config_hash(cfg, stage)},
            {"seed", stage_seed(cfg.seed, stage)},
            {"inputs", inputs},
            {"outputs", std::move(out)},
            {"summary", std::move(summary)}};
  write_file_atomic(manifest_path(cfg, stage), m.dump(1) + "\n");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

TimelineSet load_timelines(const RunConfig& cfg, LabLoadResult* labs_out = nullptr) {
  const auto vocab = cfg.vocabulary();
  auto patients = load_patients(patients_path(cfg));
  auto labs = load_labs(labs_path(cfg), vocab);
  auto set = build_timelines(patients, labs.events);
  if (labs_out) *labs_out = std::move(labs);
  return set;
}

std::vector<CohortEntry> read_cohort(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("missing_input", "cannot open " + p.string());
  std::vector<CohortEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(cohort_entry_from_jsonl(line));
  }
  return out;
}

Checkpoint load_checked_checkpoint(const RunConfig& cfg) {
  auto ckpt = load_checkpoint(cfg.out / "checkpoint.json");
  if (ckpt.vocabulary_hash != cfg.vocabulary().hash()) {
    throw Error("stale_input", "checkpoint vocabulary hash does not match the configured vocabulary");
  }
  return ckpt;
}

std::vector<EncodedSequence> test_split(const std::vector<EncodedSequence>& all) {
  std::vector<EncodedSequence> out;
  for (const auto& s : all) {
    if (s.split == Split::test) out.push_back(s);
  }
  if (out.empty()) throw Error("validation_error", "test split is empty");
  return out;
}

}  // namespace

void run_synth(const RunConfig& cfg) {
  cfg.validate();
  auto synth = cfg.synth;
  synth.vocabulary = cfg.vocabulary();
  synth.seed = stage_seed(cfg.seed, "synth");
  const auto out = generate_cohort(synth);
  const auto patients = cfg.out / "patients.jsonl";
  const auto labs = cfg.out / "labs.jsonl";
  const auto truth = cfg.out / "truth.jsonl";
  write_synth_files(out, patients, labs, truth);
  std::size_t deaths = 0;
  for (const auto& p : out.patients) deaths += p.death_date.has_value();
  write_manifest(cfg, "synth", {}, {patients, labs, truth},
                 {{"patients", out.patients.size()}, {"lab_rows", out.labs.size()}, {"deaths", deaths}});
}

void run_cohort(const RunConfig& cfg) {
  cfg.validate();
  const auto inputs = verify_inputs(cfg, {patients_path(cfg), labs_path(cfg)});
  LabLoadResult labs;
  const auto timelines = load_timelines(cfg, &labs);
  CohortRules rules = cfg.cohort;
  rules.creatinine = cfg.creatinine;
  auto cohort = stratified_split(build_cohort(timelines, rules), cfg.split, stage_seed(cfg.seed, "cohort"));

  std::string text;
  json exclusions = json::object();
  std::map<std::string, std::size_t> labels{{"0", 0}, {"1", 0}};
  std::map<std::string, std::size_t> splits{{"train", 0}, {"validation", 0}, {"test", 0}};
  std::size_t eligible = 0;
  std::size_t deceased_eligible = 0;
  for (const auto& e : cohort) {
    text += cohort_entry_to_jsonl(e) + "\n";
    if (e.exclusion) {
      const std::string reason(to_string(*e.exclusion));
      exclusions[reason] = exclusions.value(reason, 0) + 1;
      continue;
    }
    ++eligible;
    if (timelines.timelines.at(e.patient_id).demographics.death_date) ++deceased_eligible;
    ++labels[std::to_string(*e.label)];
    ++splits[std::string(to_string(*e.split))];
  }
  const auto out = cfg.out / "cohort.jsonl";
  write_file_atomic(out, text);
  write_manifest(cfg, "cohort", inputs, {out},
                 {{"patients", timelines.timelines.size()},
                  {"eligible", eligible},
                  {"deceased_eligible", deceased_eligible},
                  {"exclusions", exclusions},
                  {"labels", labels},
                  {"splits", splits},
                  {"discarded_unknown_marker", labs.discarded_unknown_marker},
                  {"orphan_events", timelines.orphan_events},
                  {"out_of_range_events", timelines.out_of_range_events},
                  {"merged_duplicates", timelines.merged_duplicates}});
}

void run_encode(const RunConfig& cfg) {
  cfg.validate();
  const auto inputs = verify_inputs(cfg, {patients_path(cfg), labs_path(cfg), cfg.out / "cohort.jsonl"});
  const auto vocab = cfg.vocabulary();
  const auto timelines = load_timelines(cfg);
  const auto encoded = encode_cohort(timelines, read_cohort(cfg.out / "cohort.jsonl"), vocab, cfg.max_len);

  std::string text;
  for (const auto& s : encoded) text += encoded_to_jsonl(s) + "\n";
  const auto out = cfg.out / "encoded.jsonl";
  write_file_atomic(out, text);

  json columns = json::array();
  for (const auto& code : vocab.codes()) {
    columns.push_back(code + ":presence");
    columns.push_back(code + ":abnormal");
  }
  json manifest = {{"vocabulary", vocab.codes()},
                   {"creatinine", vocab.creatinine()},
                   {"vocabulary_hash", vocab.hash()},
                   {"feature_columns", std::move(columns)},
                   {"feature_dim", vocab.feature_dim()},
                   {"max_len", cfg.max_len},
                   {"truncation", "most_recent"},
                   {"padding", "left_zero"},
                   {"static_features", {"age_years_at_window_start / age_scale_years", "sex (female=0, male=1)"}},
                   {"age_scale_years", kAgeScaleYears},
                   {"days_per_year", kDaysPerYear},
                   {"sequences", encoded.size()}};
  const auto mpath = cfg.out / "manifest.json";
  write_file_atomic(mpath, manifest.dump(1) + "\n");
  write_manifest(cfg, "encode", inputs, {out, mpath}, {{"sequences", encoded.size()}});
}

void run_train(const RunConfig& cfg) {
  cfg.validate();
  const auto inputs = verify_inputs(cfg, {cfg.out / "encoded.jsonl", cfg.out / "manifest.json"});
  const auto vocab = cfg.vocabulary();
  const auto enc_manifest = read_json(cfg.out / "manifest.json");
  if (enc_manifest.at("vocabulary_hash").get<std::string>() != vocab.hash()) {
    throw Error("stale_input", "encoded data vocabulary hash does not match the configured vocabulary");
  }
  const auto data = read_encoded(cfg.out / "encoded.jsonl");
  auto tc = cfg.train;
  tc.seed = stage_seed(cfg.seed, "train");
  const auto result = run_training(data, tc);

  const auto ckpt_path = cfg.out / "checkpoint.json";
  save_checkpoint(ckpt_path, Checkpoint{result.best, vocab.hash(), tc.seed, result.history.best_epoch});
  const auto history_path = cfg.out / "history.json";
  write_file_atomic(history_path, history_to_json(result.history));

  json config = json::object();
  std::istringstream lines(config_to_text(cfg));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    const auto key = line.substr(0, eq);
    if (key != "out") config[key] = line.substr(eq + 3);
  }
  json seeds = json::object();
  for (const auto& s : stage_names()) seeds[s] = stage_seed(cfg.seed, s);
  json run = {{"config", std::move(config)},
              {"master_seed", cfg.seed},
              {"stage_seeds", std::move(seeds)},
              {"data_hashes", inputs},
              {"vocabulary_hash", vocab.hash()}};
  const auto run_path = cfg.out / "run-manifest.json";
  write_file_atomic(run_path, run.dump(1) + "\n");
  write_manifest(cfg, "train", inputs, {ckpt_path, history_path, run_path},
                 {{"epochs", result.history.epochs.size()},
                  {"best_epoch", result.history.best_epoch},
                  {"best_validation_auc", result.history.best_validation_auc},
                  {"stop_reason", result.history.stop_reason}});
}

void run_eval(const RunConfig& cfg) {
  cfg.validate();
  std::vector<fs::path> needed{cfg.out / "encoded.jsonl", cfg.out / "checkpoint.json"};
  if (cfg.synthetic()) {
    needed.push_back(cfg.out / "truth.jsonl");
    needed.push_back(cfg.out / "cohort.jsonl");
  }
  const auto inputs = verify_inputs(cfg, needed);
  const auto ckpt = load_checked_checkpoint(cfg);
  const auto data = read_encoded(cfg.out / "encoded.jsonl");
  const auto test = test_split(data);
  const auto seed = stage_seed(cfg.seed, "eval");

  ScoredSet scored;
  for (const auto& s : test) {
    scored.patient_ids.push_back(s.patient_id);
    scored.scores.push_back(predict_proba(forward(s.matrix, s.statics, ckpt.params).logit));
    scored.labels.push_back(s.label);
  }
  const double auc = auc_trapezoid(scored);
  const auto ci = bootstrap_auc_ci(scored, cfg.resamples, seed);
  const auto cm = confusion_at(scored, cfg.threshold, cfg.resamples, seed);
  const auto curve = roc_points(scored);

  const auto baseline = fit_last_event_logistic(select_split(data, Split::train));
  ScoredSet base_scored;
  for (const auto& s : test) {
    base_scored.scores.push_back(predict_proba(baseline.logit(s)));
    base_scored.labels.push_back(s.label);
  }

  auto cell = [](long n, const CellCi& c) { return json{{"count", n}, {"ci", {c.lo, c.hi}}}; };
  json confusion = {{"threshold", cm.threshold},
                    {"resamples", cm.resamples},
                    {"tp", cell(cm.tp, cm.tp_ci)},
                    {"fp", cell(cm.fp, cm.fp_ci)},
                    {"tn", cell(cm.tn, cm.tn_ci)},
                    {"fn", cell(cm.fn, cm.fn_ci)},
                    {"total", cm.total()}};
  json metrics = {{"test_size", scored.size()},
                  {"test_positives", std::count(scored.labels.begin(), scored.labels.end(), 1)},
                  {"auc", auc},
                  {"auc_pairwise", auc_pairwise(scored)},
                  {"ci", {ci.lo, ci.hi}},
                  {"ci_level", 0.95},
                  {"resamples_drawn", ci.drawn},
                  {"resamples_skipped", ci.skipped},
                  {"confusion", confusion},
                  {"baseline_last_event_auc", auc_trapezoid(base_scored)}};
  if (cfg.synthetic()) {
    const auto bayes = bayes_scores(read_truth(cfg.out / "truth.jsonl"), read_cohort(cfg.out / "cohort.jsonl"));
    ScoredSet oracle;
    for (const auto& s : test) {
      oracle.scores.push_back(bayes.at(s.patient_id));
      oracle.labels.push_back(s.label);
    }
    metrics["bayes_oracle_auc"] = auc_trapezoid(oracle);
  }

  std::string roc = "threshold,fpr,tpr\n";
  for (const auto& p : curve) roc += fmt(p.threshold) + "," + fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
  std::string scores = "patient_id,score,label\n";
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scores += scored.patient_ids[i] + "," + fmt(scored.scores[i]) + "," + std::to_string(scored.labels[i]) + "\n";
  }

  const auto metrics_path = cfg.out / "metrics.json";
  const auto roc_path = cfg.out / "roc.csv";
  const auto confusion_path = cfg.out / "confusion.json";
  const auto scores_path = cfg.out / "scores.csv";
  write_file_atomic(metrics_path, metrics.dump(1) + "\n");
  write_file_atomic(roc_path, roc);
  write_file_atomic(confusion_path, confusion.dump(1) + "\n");
  write_file_atomic(scores_path, scores);
  write_manifest(cfg, "eval", inputs, {metrics_path, roc_path, confusion_path, scores_path},
                 {{"auc", auc}, {"ci", {ci.lo, ci.hi}}});
}

void run_tsne(const RunConfig& cfg) {
  cfg.validate();
  const auto inputs = verify_inputs(cfg, {cfg.out / "encoded.jsonl", cfg.out / "checkpoint.json"});
  const auto ckpt = load_checked_checkpoint(cfg);
  const auto test = test_split(read_encoded(cfg.out / "encoded.jsonl"));

  Eigen::MatrixXd embeddings(static_cast<Eigen::Index>(test.size()), ckpt.params.hidden_dim());
  for (std::size_t i = 0; i < test.size(); ++i) {
    embeddings.row(static_cast<Eigen::Index>(i)) =
        forward(test[i].matrix, test[i].statics, ckpt.params).embedding().transpose();
  }
  auto tc = cfg.tsne;
  tc.seed = stage_seed(cfg.seed, "tsne");
  const auto result = labseq::run_tsne(embeddings, tc);

  std::string points = "patient_id,y1,y2,label\n";
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    points += test[i].patient_id + "," + fmt(result.embedding(r, 0)) + "," + fmt(result.embedding(r, 1)) + "," +
              std::to_string(test[i].label) + "\n";
  }
  std::string trace = "iteration,kl\n";
  for (const auto& k : result.kl_trace) trace += std::to_string(k.iteration) + "," + fmt(k.kl) + "\n";

  const auto tsne_path = cfg.out / "tsne.csv";
  const auto trace_path = cfg.out / "kl_trace.csv";
  write_file_atomic(tsne_path, points);
  write_file_atomic(trace_path, trace);
  write_manifest(cfg, "tsne", inputs, {tsne_path, trace_path},
                 {{"points", test.size()},
                  {"perplexity", tc.resolved_perplexity(embeddings.rows())},
                  {"final_kl", result.kl_trace.empty() ? 0.0 : result.kl_trace.back().kl}});
}

void run_report(const RunConfig& cfg) {
  cfg.validate();
  const auto inputs = verify_inputs(cfg, {patients_path(cfg), labs_path(cfg), cfg.out / "cohort.jsonl",
                                          cfg.out / "roc.csv", cfg.out / "metrics.json",
                                          cfg.out / "confusion.json", cfg.out / "tsne.csv"});
  const auto timelines = load_timelines(cfg);
  const auto cohort = read_cohort(cfg.out / "cohort.jsonl");

  std::vector<const CohortEntry*> eligible;
  for (const auto& e : cohort) {
    if (e.eligible()) eligible.push_back(&e);
  }
  std::vector<TimelineRow> rows;
  const auto n_rows = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(cfg.timeline_patients));
  for (std::size_t k = 0; k < n_rows; ++k) {
    const auto* e = eligible[k * eligible.size() / n_rows];
    TimelineRow row{e->patient_id, {}, e->window, e->label.value_or(0)};
    for (const auto& ev : timelines.timelines.at(e->patient_id).events) {
      if (row.event_dates.empty() || row.event_dates.back() != ev.date) row.event_dates.push_back(ev.date);
    }
    rows.push_back(std::move(row));
  }

  std::vector<RocPoint> curve;
  {
    std::ifstream in(cfg.out / "roc.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      RocPoint p{};
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.threshold, &p.fpr, &p.tpr) != 3) {
        throw Error("parse_error", "malformed roc.csv line: " + line);
      }
      curve.push_back(p);
    }
  }
  const auto metrics = read_json(cfg.out / "metrics.json");
  const auto cj = read_json(cfg.out / "confusion.json");
  ConfusionMatrix cm;
  auto load_cell = [&](const char* name, long& n, CellCi& ci) {
    n = cj.at(name).at("count").get<long>();
    ci = {cj.at(name).at("ci").at(0).get<long>(), cj.at(name).at("ci").at(1).get<long>()};
  };
  load_cell("tp", cm.tp, cm.tp_ci);
  load_cell("fp", cm.fp, cm.fp_ci);
  load_cell("tn", cm.tn, cm.tn_ci);
  load_cell("fn", cm.fn, cm.fn_ci);
  cm.threshold = cj.at("threshold").get<double>();

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::pair<double, double>> pts;
  {
    std::ifstream in(cfg.out / "tsne.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto c1 = line.find(',');
      char id[256];
      double y1 = 0, y2 = 0;
      int label = 0;
      if (c1 == std::string::npos || c1 >= sizeof id ||
          std::sscanf(line.c_str() + c1 + 1, "%lf,%lf,%d", &y1, &y2, &label) != 3) {
        throw Error("parse_error", "malformed tsne.csv line: " + line);
      }
      line.copy(id, c1);
      id[c1] = '\0';
      ids.emplace_back(id);
      pts.emplace_back(y1, y2);
      labels.push_back(label);
    }
  }
  Eigen::MatrixXd coords(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    coords(static_cast<Eigen::Index>(i), 0) = pts[i].first;
    coords(static_cast<Eigen::Index>(i), 1) = pts[i].second;
  }

  const std::vector<std::pair<fs::path, std::string>> outputs = {
      {cfg.out / "timeline.svg", render_timeline_svg(rows)},
      {cfg.out / "roc.svg", render_roc_svg(curve, metrics.at("auc").get<double>())},
      {cfg.out / "confusion.svg", render_confusion_svg(cm)},
      {cfg.out / "tsne.svg", render_tsne_svg(ids, coords, labels)},
  };
  std::vector<fs::path> written;
  for (const auto& [p, svg] : outputs) {
    write_file_atomic(p, svg);
    written.push_back(p);
  }
  write_manifest(cfg, "report", inputs, written, {{"timeline_patients", rows.size()}});
}

void run_stage(const RunConfig& cfg, std::string_view stage) {
  try {
    if (stage == "synth") return run_synth(cfg);
    if (stage == "cohort") return run_cohort(cfg);
    if (stage == "encode") return run_encode(cfg);
    if (stage == "train") return run_train(cfg);
    if (stage == "eval") return run_eval(cfg);
    if (stage == "tsne") return run_tsne(cfg);
    if (stage == "report") return run_report(cfg);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(std::string(stage), e);
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), Error("internal", e.what()));
  }
  throw Error("usage_error", "unknown stage '" + std::string(stage) + "'");
}

void run_all(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw StageError("config", e);
  }
  for (const auto& stage : stage_names()) {
    if (stage == "synth" && !cfg.synthetic()) continue;
    run_stage(cfg, stage);
  }
}

}  // namespace labseq
