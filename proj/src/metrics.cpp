#include "dexseg/metrics.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dexseg {

ConfusionMatrix confusion(const std::vector<SkillId>& truth,
                          const std::vector<SkillId>& pred) {
  if (truth.size() != pred.size()) {
    throw validate_error("confusion: length mismatch (" + std::to_string(truth.size()) +
                         " true vs " + std::to_string(pred.size()) + " predicted)");
  }
  ConfusionMatrix c{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    check_skill(truth[i], "confusion truth");
    check_skill(pred[i], "confusion prediction");
    c[truth[i] - 1][pred[i] - 1] += 1;
  }
  return c;
}

std::array<std::array<double, kNumSkills>, kNumSkills>
confusion_percent(const ConfusionMatrix& c) {
  std::array<std::array<double, kNumSkills>, kNumSkills> p{};
  for (int i = 0; i < kNumSkills; ++i) {
    long row = 0;
    for (int j = 0; j < kNumSkills; ++j) row += c[i][j];
    if (row == 0) continue;
    for (int j = 0; j < kNumSkills; ++j) {
      p[i][j] = 100.0 * static_cast<double>(c[i][j]) / static_cast<double>(row);
    }
  }
  return p;
}

FrameScores frame_scores(const ConfusionMatrix& c) {
  long total = 0;
  long diag = 0;
  std::array<long, kNumSkills> row_sum{};
  std::array<long, kNumSkills> col_sum{};
  for (int i = 0; i < kNumSkills; ++i) {
    for (int j = 0; j < kNumSkills; ++j) {
      total += c[i][j];
      row_sum[i] += c[i][j];
      col_sum[j] += c[i][j];
    }
    diag += c[i][i];
  }

  FrameScores s;
  s.accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;

  int supported = 0;
  double psum = 0.0, rsum = 0.0, fsum = 0.0;
  for (int k = 0; k < kNumSkills; ++k) {
    if (row_sum[k] == 0) continue;
    ++supported;
    const double tp = static_cast<double>(c[k][k]);
    const double prec = col_sum[k] > 0 ? tp / static_cast<double>(col_sum[k]) : 0.0;
    const double rec = tp / static_cast<double>(row_sum[k]);
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    psum += prec;
    rsum += rec;
    fsum += f1;
  }
  if (supported > 0) {
    s.macro_precision = psum / supported;
    s.macro_recall = rsum / supported;
    s.macro_f1 = fsum / supported;
  }
  return s;
}

double average_iou(const std::vector<SkillId>& truth, const std::vector<SkillId>& pred) {
  const ConfusionMatrix c = confusion(truth, pred);
  std::array<long, kNumSkills> row_sum{};
  std::array<long, kNumSkills> col_sum{};
  for (int i = 0; i < kNumSkills; ++i) {
    for (int j = 0; j < kNumSkills; ++j) {
      row_sum[i] += c[i][j];
      col_sum[j] += c[i][j];
    }
  }
  int supported = 0;
  double sum = 0.0;
  for (int k = 0; k < kNumSkills; ++k) {
    if (row_sum[k] == 0) continue;
    ++supported;
    const long inter = c[k][k];
    const long uni = row_sum[k] + col_sum[k] - inter;
    sum += uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  }
  return supported > 0 ? sum / supported : 0.0;
}

EvalReport evaluate(const std::vector<SkillId>& truth, const std::vector<SkillId>& pred) {
  EvalReport r;
  r.confusion = confusion(truth, pred);
  const FrameScores s = frame_scores(r.confusion);
  r.accuracy = s.accuracy;
  r.macro_precision = s.macro_precision;
  r.macro_recall = s.macro_recall;
  r.macro_f1 = s.macro_f1;
  r.average_iou = average_iou(truth, pred);
  for (int i = 0; i < kNumSkills; ++i) {
    for (int j = 0; j < kNumSkills; ++j) {
      r.support[i] += r.confusion[i][j];
      r.total += r.confusion[i][j];
    }
  }
  return r;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["average_iou"] = r.average_iou;
  j["total_frames"] = r.total;
  nlohmann::ordered_json sup = nlohmann::ordered_json::object();
  for (int i = 0; i < kNumSkills; ++i) sup[skill_name(i + 1)] = r.support[i];
  j["support"] = sup;
  nlohmann::ordered_json conf = nlohmann::ordered_json::array();
  for (int i = 0; i < kNumSkills; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < kNumSkills; ++k) row.push_back(r.confusion[i][k]);
    conf.push_back(row);
  }
  j["confusion"] = conf;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("evaluation report: ") + e.what());
  }
  EvalReport r;
  try {
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.average_iou = j.at("average_iou").get<double>();
    r.total = j.at("total_frames").get<long>();
    const auto& conf = j.at("confusion");
    if (conf.size() != kNumSkills) throw parse_error("evaluation report: confusion must have 20 rows");
    for (int i = 0; i < kNumSkills; ++i) {
      const auto& row = conf.at(i);
      if (row.size() != kNumSkills) throw parse_error("evaluation report: confusion row must have 20 entries");
      for (int k = 0; k < kNumSkills; ++k) r.confusion[i][k] = row.at(k).get<long>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("evaluation report: ") + e.what());
  }
  for (int i = 0; i < kNumSkills; ++i) {
    for (int k = 0; k < kNumSkills; ++k) r.support[i] += r.confusion[i][k];
  }
  return r;
}

void write_report_json(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << report_to_json(r);
  if (!out) throw io_error("failed writing " + path);
}

namespace {

std::string csv_quote(const std::string& s) {
  bool needs = s.find_first_of(",\"\n") != std::string::npos;
  if (!needs) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

}  // namespace

void write_confusion_csv(const ConfusionMatrix& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << "true\\pred";
  for (int j = 0; j < kNumSkills; ++j) out << ',' << csv_quote(skill_name(j + 1));
  out << '\n';
  for (int i = 0; i < kNumSkills; ++i) {
    out << csv_quote(skill_name(i + 1));
    for (int j = 0; j < kNumSkills; ++j) out << ',' << c[i][j];
    out << '\n';
  }
  if (!out) throw io_error("failed writing " + path);
}

}  // namespace dexseg
