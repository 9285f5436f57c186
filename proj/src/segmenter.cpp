#include "dexseg/segmenter.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

using nlohmann::json;

namespace dexseg {

void SegmenterConfig::validate() const {
  if (latent_dim < 1) throw validate_error("segmenter config: latent_dim must be >= 1");
  for (int h : encoder_hidden)
    if (h < 1) throw validate_error("segmenter config: encoder hidden dims must be >= 1");
  for (int h : label_hidden)
    if (h < 1) throw validate_error("segmenter config: label hidden dims must be >= 1");
  if (median_width < 1 || median_width % 2 == 0)
    throw validate_error("segmenter config: median width must be odd and >= 1");
}

std::vector<int> SegmenterConfig::encoder_dims(int feature_dim) const {
  std::vector<int> dims{3 * feature_dim};
  dims.insert(dims.end(), encoder_hidden.begin(), encoder_hidden.end());
  dims.push_back(latent_dim);
  return dims;
}

std::vector<int> SegmenterConfig::temporal_dims(int feature_dim) const {
  std::vector<int> dims{latent_dim};
  dims.insert(dims.end(), encoder_hidden.rbegin(), encoder_hidden.rend());
  dims.push_back(3 * feature_dim);
  return dims;
}

std::vector<int> SegmenterConfig::label_dims() const {
  std::vector<int> dims{latent_dim};
  dims.insert(dims.end(), label_hidden.begin(), label_hidden.end());
  dims.push_back(kNumSkills);
  return dims;
}

WindowSet make_windows(const Eigen::MatrixXd& feats, const std::vector<SkillId>& labels) {
  const Eigen::Index n = feats.cols();
  const Eigen::Index d = feats.rows();
  if (n < 3) throw validate_error("make_windows: trace too short (need >= 3 frames, got " +
                                  std::to_string(n) + ")");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw validate_error("make_windows: label count does not match frame count");

  WindowSet ws;
  ws.inputs.resize(3 * d, std::max<Eigen::Index>(0, n - 3));
  ws.targets.resize(3 * d, ws.inputs.cols());
  ws.labels.resize(static_cast<std::size_t>(ws.inputs.cols()));
  for (Eigen::Index t = 2; t <= n - 2; ++t) {
    const Eigen::Index i = t - 2;
    ws.inputs.block(0, i, d, 1) = feats.col(t - 2);
    ws.inputs.block(d, i, d, 1) = feats.col(t - 1);
    ws.inputs.block(2 * d, i, d, 1) = feats.col(t);
    ws.targets.block(0, i, d, 1) = feats.col(t - 1);
    ws.targets.block(d, i, d, 1) = feats.col(t);
    ws.targets.block(2 * d, i, d, 1) = feats.col(t + 1);
    check_skill(labels[t], "make_windows");
    ws.labels[i] = labels[t] - 1;
  }
  return ws;
}

Eigen::MatrixXd make_inference_windows(const Eigen::MatrixXd& feats) {
  const Eigen::Index n = feats.cols();
  const Eigen::Index d = feats.rows();
  if (n < 3) throw validate_error("make_inference_windows: trace shorter than 3 frames");
  Eigen::MatrixXd w(3 * d, n - 2);
  for (Eigen::Index t = 2; t < n; ++t) {
    const Eigen::Index i = t - 2;
    w.block(0, i, d, 1) = feats.col(t - 2);
    w.block(d, i, d, 1) = feats.col(t - 1);
    w.block(2 * d, i, d, 1) = feats.col(t);
  }
  return w;
}

namespace {

WindowSet pool_windows(const std::vector<Eigen::MatrixXd>& feats, const Dataset& ds) {
  Eigen::Index total = 0;
  for (const auto& f : feats) total += std::max<Eigen::Index>(0, f.cols() - 3);
  if (total <= 0) throw validate_error("training pool is empty");

  WindowSet pool;
  pool.inputs.resize(3 * feats.front().rows(), total);
  pool.targets.resize(3 * feats.front().rows(), total);
  pool.labels.reserve(total);
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < feats.size(); ++k) {
    WindowSet ws = make_windows(feats[k], ds.traces[k].labels());
    pool.inputs.middleCols(at, ws.count()) = ws.inputs;
    pool.targets.middleCols(at, ws.count()) = ws.targets;
    pool.labels.insert(pool.labels.end(), ws.labels.begin(), ws.labels.end());
    at += ws.count();
  }
  return pool;
}

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, const std::vector<int>& order,
                            std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out.col(static_cast<Eigen::Index>(i - begin)) = m.col(order[i]);
  return out;
}

}  // namespace

SegmenterModel train_segmenter(const Dataset& train, FeatureKind kind,
                               const FeatureConfig& fcfg, const SegmenterConfig& scfg,
                               const TrainConfig& tcfg, bool with_temporal,
                               const std::vector<TrainPhase>& phases, TrainLog* log,
                               int threads) {
  fcfg.validate();
  scfg.validate();
  tcfg.validate();
  if (train.traces.empty()) throw validate_error("train_segmenter: empty dataset");
  if (!train.labeled()) throw validate_error("train_segmenter: dataset must be fully labeled");
  for (const auto& phase : phases) {
    if (phase.epochs < 1) throw validate_error("train_segmenter: phase epochs must be >= 1");
    if (phase.reconstruction && !with_temporal)
      throw validate_error("train_segmenter: reconstruction phase without a temporal decoder");
  }

  std::vector<Eigen::MatrixXd> feats = featurize_dataset(train, fcfg, kind, threads);
  NormStats stats = fit_norm_stats(feats);
  for (auto& f : feats) apply_norm(f, stats);
  WindowSet pool = pool_windows(feats, train);

  if (log) {
    std::set<int> present(pool.labels.begin(), pool.labels.end());
    for (SkillId s = 1; s <= kNumSkills; ++s)
      if (!present.count(s - 1)) log->missing_classes.push_back(s);
  }

  const int d = static_cast<int>(feats.front().rows());
  SegmenterModel model;
  model.kind = kind;
  model.feature_config = fcfg;
  model.config = scfg;
  model.stats = stats;
  model.encoder = init_dense_net(scfg.encoder_dims(d), mix_seed(tcfg.seed, 1));
  if (with_temporal) model.temporal = init_dense_net(scfg.temporal_dims(d), mix_seed(tcfg.seed, 2));
  model.label_head = init_dense_net(scfg.label_dims(), mix_seed(tcfg.seed, 3));

  AdamState enc_state = make_adam_state(model.encoder);
  AdamState tmp_state = with_temporal ? make_adam_state(model.temporal) : AdamState{};
  AdamState lab_state = make_adam_state(model.label_head);
  const AdamConfig adam = tcfg.adam();

  const std::size_t n = static_cast<std::size_t>(pool.count());
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  int global_epoch = 0;
  for (const auto& phase : phases) {
    for (int e = 0; e < phase.epochs; ++e, ++global_epoch) {
      if (tcfg.shuffle) {
        Rng rng(mix_seed(tcfg.seed, 0x1000000ULL + static_cast<std::uint64_t>(global_epoch)));
        rng.shuffle(order);
      }
      EpochStats stats_e;
      for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(tcfg.batch)) {
        const std::size_t hi = std::min(n, at + static_cast<std::size_t>(tcfg.batch));
        const double bsz = static_cast<double>(hi - at);
        Eigen::MatrixXd xb = gather_cols(pool.inputs, order, at, hi);

        ForwardCache enc_cache;
        Eigen::MatrixXd z = forward(model.encoder, xb, &enc_cache);
        Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());

        if (phase.reconstruction) {
          Eigen::MatrixXd tb = phase.shifted_targets ? gather_cols(pool.targets, order, at, hi)
                                                     : xb;
          ForwardCache tmp_cache;
          Eigen::MatrixXd rec = forward(model.temporal, z, &tmp_cache);
          LossResult lr = mse_loss(rec, tb);
          stats_e.recon += lr.value * bsz;
          NetGrads gt = backward(model.temporal, tmp_cache, lr.grad);
          dz += gt.dx;
          adam_step(model.temporal, gt, tmp_state, adam);
        }
        if (phase.classification) {
          std::vector<int> lb(hi - at);
          for (std::size_t i = at; i < hi; ++i) lb[i - at] = pool.labels[order[i]];
          ForwardCache lab_cache;
          Eigen::MatrixXd logits = forward(model.label_head, z, &lab_cache);
          LossResult lc = softmax_cross_entropy_batch(logits, lb);
          stats_e.label += lc.value * bsz;
          NetGrads gl = backward(model.label_head, lab_cache, lc.grad);
          dz += gl.dx;
          adam_step(model.label_head, gl, lab_state, adam);
        }
        if (phase.update_encoder && (phase.reconstruction || phase.classification)) {
          NetGrads ge = backward(model.encoder, enc_cache, dz);
          adam_step(model.encoder, ge, enc_state, adam);
        }
      }
      stats_e.recon /= static_cast<double>(n);
      stats_e.label /= static_cast<double>(n);
      if (log) log->epochs.push_back(stats_e);
    }
  }
  return model;
}

SegmenterModel train_joint(const Dataset& train, FeatureKind kind, const FeatureConfig& fcfg,
                           const SegmenterConfig& scfg, const TrainConfig& tcfg, TrainLog* log,
                           int threads) {
  std::vector<TrainPhase> phases{{tcfg.epochs, true, true, true, true}};
  return train_segmenter(train, kind, fcfg, scfg, tcfg, true, phases, log, threads);
}

Eigen::VectorXd predict_frame(const SegmenterModel& model, const Eigen::VectorXd& window_input,
                              Eigen::VectorXd* latent) {
  if (window_input.size() != model.encoder.input_dim())
    throw validate_error("predict_frame: window arity " + std::to_string(window_input.size()) +
                         " does not match encoder input " +
                         std::to_string(model.encoder.input_dim()));
  Eigen::MatrixXd z = forward(model.encoder, window_input);
  if (latent) *latent = z.col(0);
  Eigen::MatrixXd logits = forward(model.label_head, z);
  return softmax(logits).col(0);
}

std::vector<SkillId> median_smooth(const std::vector<SkillId>& labels, int width) {
  if (width < 1 || width % 2 == 0)
    throw validate_error("median_smooth: width must be odd and >= 1");
  const int n = static_cast<int>(labels.size());
  if (n == 0 || width == 1) return labels;

  const int half = width / 2;
  std::vector<SkillId> out(labels.size());
  std::vector<SkillId> window(static_cast<std::size_t>(width));
  for (int i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k)
      window[static_cast<std::size_t>(k + half)] = labels[std::clamp(i + k, 0, n - 1)];
    std::nth_element(window.begin(), window.begin() + half, window.end());
    out[static_cast<std::size_t>(i)] = window[static_cast<std::size_t>(half)];
  }
  return out;
}

SegmentationResult segment_trace(const SegmenterModel& model, const Trace& trace, int width) {
  Eigen::MatrixXd feats = featurize(trace, model.feature_config, model.kind);
  apply_norm(feats, model.stats);
  const Eigen::Index n = feats.cols();
  Eigen::MatrixXd windows = make_inference_windows(feats);
  Eigen::MatrixXd z = forward(model.encoder, windows);
  Eigen::MatrixXd probs_tail = softmax(forward(model.label_head, z));

  SegmentationResult r;
  r.trace_id = trace.meta.id;
  r.width = width;
  r.probs.resize(kNumSkills, n);
  r.probs.col(0) = probs_tail.col(0);
  r.probs.col(1) = probs_tail.col(0);
  r.probs.rightCols(n - 2) = probs_tail;

  r.raw_labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    Eigen::Index k = 0;
    r.probs.col(t).maxCoeff(&k);
    r.raw_labels[static_cast<std::size_t>(t)] = static_cast<SkillId>(k + 1);
  }
  r.frame_labels = median_smooth(r.raw_labels, width);
  r.segments = labels_to_segments(r.frame_labels);
  return r;
}

std::string segmentation_to_json(const SegmentationResult& r) {
  nlohmann::ordered_json j;
  j["trace_id"] = r.trace_id;
  j["width"] = r.width;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& s : r.segments)
    segs.push_back({{"start", s.start}, {"end", s.end}, {"skill", s.skill}});
  j["segments"] = segs;
  j["frame_labels"] = r.frame_labels;
  auto probs = nlohmann::ordered_json::array();
  for (Eigen::Index t = 0; t < r.probs.cols(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (int k = 0; k < kNumSkills; ++k) row.push_back(r.probs(k, t));
    probs.push_back(row);
  }
  j["frame_probs"] = probs;
  j["raw_labels"] = r.raw_labels;
  return j.dump(2) + "\n";
}

SegmentationResult segmentation_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("segmentation: ") + e.what());
  }
  SegmentationResult r;
  try {
    r.trace_id = j.at("trace_id").get<std::string>();
    r.width = j.at("width").get<int>();
    for (const auto& s : j.at("segments"))
      r.segments.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                            s.at("skill").get<SkillId>()});
    r.frame_labels = j.at("frame_labels").get<std::vector<SkillId>>();
    if (j.contains("raw_labels")) r.raw_labels = j.at("raw_labels").get<std::vector<SkillId>>();
    const auto& probs = j.at("frame_probs");
    r.probs.resize(kNumSkills, static_cast<Eigen::Index>(probs.size()));
    for (std::size_t t = 0; t < probs.size(); ++t) {
      const auto& row = probs.at(t);
      if (row.size() != kNumSkills) throw parse_error("segmentation: frame_probs row arity");
      for (int k = 0; k < kNumSkills; ++k) r.probs(k, static_cast<Eigen::Index>(t)) = row.at(k);
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("segmentation: ") + e.what());
  }
  return r;
}

void export_latents(const SegmenterModel& model, const Dataset& ds, const std::string& path) {
  if (!ds.labeled()) throw validate_error("export_latents: dataset must be labeled");
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");

  char head[16];
  for (int i = 0; i < model.config.latent_dim; ++i) {
    std::snprintf(head, sizeof head, "z%02d", i);
    out << (i ? "," : "") << head;
  }
  out << ",label\n";

  for (const auto& trace : ds.traces) {
    Eigen::MatrixXd feats = featurize(trace, model.feature_config, model.kind);
    apply_norm(feats, model.stats);
    WindowSet ws = make_windows(feats, trace.labels());
    Eigen::MatrixXd z = forward(model.encoder, ws.inputs);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      for (Eigen::Index r = 0; r < z.rows(); ++r)
        out << (r ? "," : "") << fmt_g17(z(r, c));
      out << ',' << (ws.labels[static_cast<std::size_t>(c)] + 1) << '\n';
    }
  }
  if (!out) throw io_error("failed writing " + path);
}

void save_segmenter(const SegmenterModel& model, const std::string& path) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "segmenter";
  ckpt.meta["regime"] = model.regime;
  ckpt.meta["feature_kind"] = feature_kind_name(model.kind);
  ckpt.meta["feature_config"] = feature_config_to_json(model.feature_config);
  ckpt.meta["feature_layout_hash"] = feature_layout_hash(model.kind);
  ckpt.meta["config"] = {{"encoder_hidden", model.config.encoder_hidden},
                         {"latent_dim", model.config.latent_dim},
                         {"label_hidden", model.config.label_hidden},
                         {"median_width", model.config.median_width}};
  append_net_arrays(ckpt, "encoder", model.encoder);
  if (model.has_temporal()) append_net_arrays(ckpt, "temporal", model.temporal);
  append_net_arrays(ckpt, "label", model.label_head);
  ckpt.arrays.emplace_back("norm.mean", model.stats.mean);
  ckpt.arrays.emplace_back("norm.std", model.stats.std);
  write_checkpoint(path, ckpt);
}

SegmenterModel load_segmenter(const std::string& path,
                              const std::optional<std::string>& expected_layout) {
  Checkpoint ckpt = read_checkpoint(path);
  if (!ckpt.meta.contains("kind") || ckpt.meta["kind"] != "segmenter")
    throw parse_error("'" + path + "' is not a segmenter checkpoint");

  SegmenterModel model;
  try {
    model.regime = ckpt.meta.at("regime").get<std::string>();
    model.kind = feature_kind_from_name(ckpt.meta.at("feature_kind").get<std::string>());
    model.feature_config = feature_config_from_json(ckpt.meta.at("feature_config"));
    const auto& cfg = ckpt.meta.at("config");
    model.config.encoder_hidden = cfg.at("encoder_hidden").get<std::vector<int>>();
    model.config.latent_dim = cfg.at("latent_dim").get<int>();
    model.config.label_hidden = cfg.at("label_hidden").get<std::vector<int>>();
    model.config.median_width = cfg.at("median_width").get<int>();
  } catch (const json::exception& e) {
    throw parse_error("segmenter checkpoint '" + path + "': " + e.what());
  }

  const std::string stored = ckpt.meta.value("feature_layout_hash", "");
  const std::string actual = feature_layout_hash(model.kind);
  if (stored != actual)
    throw layout_error("feature layout hash mismatch in '" + path + "': checkpoint has " +
                       stored + ", current " + feature_kind_name(model.kind) + " layout is " +
                       actual);
  if (expected_layout && *expected_layout != stored)
    throw layout_error("checkpoint '" + path + "' was built for feature layout " + stored +
                       ", expected " + *expected_layout);

  model.encoder = net_from_arrays(ckpt, "encoder");
  if (ckpt.meta["nets"].contains("temporal")) model.temporal = net_from_arrays(ckpt, "temporal");
  model.label_head = net_from_arrays(ckpt, "label");
  model.stats.mean = ckpt.array("norm.mean");
  model.stats.std = ckpt.array("norm.std");
  if (model.stats.dim() != feature_dim(model.kind) ||
      model.encoder.input_dim() != 3 * feature_dim(model.kind))
    throw layout_error("checkpoint '" + path + "' array shapes do not match its feature layout");
  return model;
}

}  // namespace dexseg
