#pragma once

#include <array>
#include <string>
#include <vector>

#include "dexseg/trace.hpp"

namespace dexseg {

using ConfusionMatrix = std::array<std::array<long, kNumSkills>, kNumSkills>;

struct EvalReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double average_iou = 0.0;
  ConfusionMatrix confusion{};                  // rows true, cols predicted
  std::array<long, kNumSkills> support{};      // ground-truth frames per class
  long total = 0;
};

// Counts; both sequences carry 1-based skill ids.
ConfusionMatrix confusion(const std::vector<SkillId>& truth,
                          const std::vector<SkillId>& pred);

// Row-normalized percentage view; zero-support rows render as zeros.
std::array<std::array<double, kNumSkills>, kNumSkills>
confusion_percent(const ConfusionMatrix& c);

struct FrameScores {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Macro averages run over classes with nonzero support; zero-denominator
// classes contribute 0.
FrameScores frame_scores(const ConfusionMatrix& c);

double average_iou(const std::vector<SkillId>& truth, const std::vector<SkillId>& pred);

EvalReport evaluate(const std::vector<SkillId>& truth, const std::vector<SkillId>& pred);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

void write_report_json(const EvalReport& r, const std::string& path);
// 21x21 CSV: header row/column of skill names, counts in skill-id order.
void write_confusion_csv(const ConfusionMatrix& c, const std::string& path);

}  // namespace dexseg
