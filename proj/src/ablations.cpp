#include "dexseg/ablations.hpp"

#include <cstdio>

using nlohmann::json;

namespace dexseg {

bool is_regime_tag(const std::string& tag) {
  for (const char* t : kRegimeTags)
    if (tag == t) return true;
  return false;
}

SegmenterModel train_regime(const std::string& tag, const Dataset& train,
                            const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                            const TrainConfig& tcfg, TrainLog* log, int threads) {
  FeatureKind kind = FeatureKind::Engineered;
  bool with_temporal = true;
  std::vector<TrainPhase> phases;

  if (tag == "dexskills" || tag == "raw_haptic" || tag == "calculated_only") {
    if (tag == "raw_haptic") kind = FeatureKind::Raw;
    if (tag == "calculated_only") kind = FeatureKind::Calculated;
    phases.push_back({tcfg.epochs, true, true, true, true});
  } else if (tag == "pretrained_ae_ld") {
    phases.push_back({tcfg.epochs, true, false, true, true});
    phases.push_back({tcfg.epochs, false, true, false, true});
  } else if (tag == "recovery_ae_ld") {
    phases.push_back({tcfg.epochs, true, true, true, false});
  } else if (tag == "encoder_ld") {
    with_temporal = false;
    phases.push_back({tcfg.epochs, false, true, true, true});
  } else {
    throw domain_error("unknown training regime '" + tag + "'");
  }

  SegmenterModel model =
      train_segmenter(train, kind, fcfg, scfg, tcfg, with_temporal, phases, log, threads);
  model.regime = tag;
  return model;
}

EvalReport evaluate_model(const SegmenterModel& model, const Dataset& eval, int median_width,
                          int threads) {
  (void)threads;
  if (eval.traces.empty()) throw validate_error("evaluate_model: empty dataset");
  if (!eval.labeled()) throw validate_error("evaluate_model: dataset must be labeled");

  std::vector<SkillId> truth;
  std::vector<SkillId> pred;
  truth.reserve(eval.total_frames());
  pred.reserve(eval.total_frames());
  for (const auto& trace : eval.traces) {
    SegmentationResult r = segment_trace(model, trace, median_width);
    const std::vector<SkillId> labels = trace.labels();
    truth.insert(truth.end(), labels.begin(), labels.end());
    pred.insert(pred.end(), r.frame_labels.begin(), r.frame_labels.end());
  }
  return evaluate(truth, pred);
}

AblationSuite run_ablation_suite(const Dataset& train, const Dataset& eval,
                                 const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                                 const TrainConfig& tcfg, int median_width, int threads,
                                 const std::function<void(const std::string&)>& progress) {
  AblationSuite suite;
  suite.seed = tcfg.seed;
  suite.median_width = median_width;
  for (const char* tag : kRegimeTags) {
    if (progress) progress(std::string("training ") + tag);
    SegmenterModel model = train_regime(tag, train, fcfg, scfg, tcfg, nullptr, threads);
    if (progress) progress(std::string("evaluating ") + tag);
    suite.rows.push_back({tag, evaluate_model(model, eval, median_width, threads)});
  }
  return suite;
}

std::string ablation_table(const AblationSuite& suite) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %9s %10s %8s %8s %9s\n", "regime", "accuracy",
                "precision", "recall", "f1", "avg_iou");
  out += line;
  for (const auto& row : suite.rows) {
    std::snprintf(line, sizeof line, "%-18s %9.4f %10.4f %8.4f %8.4f %9.4f\n", row.tag.c_str(),
                  row.report.accuracy, row.report.macro_precision, row.report.macro_recall,
                  row.report.macro_f1, row.report.average_iou);
    out += line;
  }
  return out;
}

std::string ablation_to_json(const AblationSuite& suite) {
  nlohmann::ordered_json j;
  j["seed"] = suite.seed;
  j["median_width"] = suite.median_width;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : suite.rows) {
    auto r = nlohmann::ordered_json::parse(report_to_json(row.report));
    auto entry = nlohmann::ordered_json::object();
    entry["regime"] = row.tag;
    for (auto& [k, v] : r.items()) entry[k] = v;
    rows.push_back(entry);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

AblationSuite ablation_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("ablation report: ") + e.what());
  }
  AblationSuite suite;
  try {
    suite.seed = j.at("seed").get<std::uint64_t>();
    suite.median_width = j.at("median_width").get<int>();
    for (const auto& row : j.at("rows")) {
      RegimeResult r;
      r.tag = row.at("regime").get<std::string>();
      r.report = report_from_json(row.dump());
      suite.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("ablation report: ") + e.what());
  }
  return suite;
}

}  // namespace dexseg
