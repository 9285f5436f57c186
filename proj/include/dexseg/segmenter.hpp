#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dexseg/featurizer.hpp"
#include "dexseg/neural.hpp"
#include "dexseg/trace.hpp"

namespace dexseg {

struct SegmenterConfig {
  std::vector<int> encoder_hidden{256, 128};
  int latent_dim = 64;
  std::vector<int> label_hidden{64};
  int median_width = 15;

  void validate() const;
  std::vector<int> encoder_dims(int feature_dim) const;
  std::vector<int> temporal_dims(int feature_dim) const;  // mirrors the encoder
  std::vector<int> label_dims() const;
};

// Pooled training windows. Column i of `inputs` is concat(f_{t-2}, f_{t-1},
// f_t) for some frame t; the matching target column is the window shifted one
// frame forward, concat(f_{t-1}, f_t, f_{t+1}).
struct WindowSet {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  std::vector<int> labels;  // 0-based class index of frame t

  Eigen::Index count() const { return inputs.cols(); }
};

// Training windows for one trace's (already normalized) features, t = 2 ..
// len-2. A labeled trace of length n yields n-3 windows; a 3-frame trace
// yields none, fewer than 3 frames is an error.
WindowSet make_windows(const Eigen::MatrixXd& feats, const std::vector<SkillId>& labels);

// Inference windows, t = 2 .. len-1; column i holds the window for frame i+2.
Eigen::MatrixXd make_inference_windows(const Eigen::MatrixXd& feats);

struct SegmenterModel {
  std::string regime = "dexskills";
  FeatureKind kind = FeatureKind::Engineered;
  FeatureConfig feature_config;
  SegmenterConfig config;
  NormStats stats;
  DenseNet encoder;
  DenseNet temporal;  // empty when the regime trains without it
  DenseNet label_head;

  bool has_temporal() const { return !temporal.layers.empty(); }
  int feature_dim() const { return encoder.input_dim() / 3; }
};

struct EpochStats {
  double recon = 0.0;
  double label = 0.0;
  double total() const { return recon + label; }
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  std::vector<SkillId> missing_classes;  // absent from the training labels
};

// One schedule entry for the shared training loop. The six published regimes
// are phase lists over these switches.
struct TrainPhase {
  int epochs = 0;
  bool reconstruction = true;   // temporal head + MSE term
  bool classification = true;   // label head + cross-entropy term
  bool update_encoder = true;
  bool shifted_targets = true;  // false: reconstruct the input window itself
};

// Pool windows, then run the phase schedule with a per-epoch seeded shuffle.
// `with_temporal` controls whether the model carries a temporal decoder at
// all. Feature extraction may fan out over `threads`; optimization itself is
// sequential and bitwise deterministic under the seed.
SegmenterModel train_segmenter(const Dataset& train, FeatureKind kind,
                               const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                               const TrainConfig& tcfg, bool with_temporal,
                               const std::vector<TrainPhase>& phases,
                               TrainLog* log = nullptr, int threads = 1);

// Full joint objective: reconstruction MSE + label cross-entropy, unit
// weights, one phase.
SegmenterModel train_joint(const Dataset& train, FeatureKind kind, const FeatureConfig& fcfg,
                           const SegmenterConfig& scfg, const TrainConfig& tcfg,
                           TrainLog* log = nullptr, int threads = 1);

// Class probabilities for one window input; optionally exposes the latent.
Eigen::VectorXd predict_frame(const SegmenterModel& model, const Eigen::VectorXd& window_input,
                              Eigen::VectorXd* latent = nullptr);

std::vector<SkillId> median_smooth(const std::vector<SkillId>& labels, int width);

struct SegmentationResult {
  std::string trace_id;
  int width = 0;
  std::vector<Segment> segments;      // run-length view of the smoothed labels
  std::vector<SkillId> frame_labels;  // smoothed
  std::vector<SkillId> raw_labels;    // argmax before smoothing
  Eigen::MatrixXd probs;              // 20 x n; frames 0,1 copy frame 2
};

SegmentationResult segment_trace(const SegmenterModel& model, const Trace& trace, int width);

std::string segmentation_to_json(const SegmentationResult& r);
SegmentationResult segmentation_from_json(const std::string& text);

// CSV of encoder latents over all training windows of a labeled dataset:
// header z00..z<latent-1>,label then one row per window.
void export_latents(const SegmenterModel& model, const Dataset& ds, const std::string& path);

void save_segmenter(const SegmenterModel& model, const std::string& path);
// When `expected_layout` is given, a checkpoint built for any other feature
// layout is rejected. The stored hash is always re-checked against the
// layout the stored kind/config produce.
SegmenterModel load_segmenter(const std::string& path,
                              const std::optional<std::string>& expected_layout = std::nullopt);

}  // namespace dexseg
