#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "dexseg/metrics.hpp"
#include "dexseg/segmenter.hpp"

namespace dexseg {

// Canonical order; `dexskills` is the full method, the rest are baselines.
inline constexpr std::array<const char*, 6> kRegimeTags = {
    "dexskills", "pretrained_ae_ld", "recovery_ae_ld",
    "encoder_ld", "raw_haptic",      "calculated_only"};

bool is_regime_tag(const std::string& tag);

// Trains one regime as a configuration variant of the shared segmenter loop:
//   dexskills        joint reconstruction + classification, shifted targets
//   pretrained_ae_ld phase 1 reconstruction only, phase 2 frozen encoder +
//                    label head on cross-entropy
//   recovery_ae_ld   joint, but the reconstruction target is the input window
//   encoder_ld       no temporal decoder, cross-entropy only
//   raw_haptic       raw 38-dim features, otherwise like dexskills
//   calculated_only  derived features only (64 dims), otherwise like dexskills
SegmenterModel train_regime(const std::string& tag, const Dataset& train,
                            const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                            const TrainConfig& tcfg, TrainLog* log = nullptr,
                            int threads = 1);

// Segments every trace of a labeled dataset and scores the smoothed frame
// labels against ground truth, pooled over all traces.
EvalReport evaluate_model(const SegmenterModel& model, const Dataset& eval, int median_width,
                          int threads = 1);

struct RegimeResult {
  std::string tag;
  EvalReport report;
};

struct AblationSuite {
  std::uint64_t seed = 0;
  int median_width = 0;
  std::vector<RegimeResult> rows;  // canonical tag order
};

// All six regimes on identical splits and seeds.
AblationSuite run_ablation_suite(const Dataset& train, const Dataset& eval,
                                 const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                                 const TrainConfig& tcfg, int median_width, int threads = 1,
                                 const std::function<void(const std::string&)>& progress = {});

std::string ablation_table(const AblationSuite& suite);
std::string ablation_to_json(const AblationSuite& suite);
AblationSuite ablation_from_json(const std::string& text);

}  // namespace dexseg
