#include "dexseg/policy.hpp"

#include <algorithm>

using nlohmann::json;

namespace dexseg {

Eigen::VectorXd clamp_action(Eigen::VectorXd action) {
  if (action.size() != kPolicyActionDim)
    throw validate_error("action arity must be 18, got " + std::to_string(action.size()));
  for (Eigen::Index i = 0; i < action.size(); ++i)
    action(i) = std::clamp(action(i), -kActionClamp, kActionClamp);
  return action;
}

PolicyPairs extract_pairs(const Trace& trace, SkillId skill, const FeatureConfig& cfg) {
  check_skill(skill, "extract_pairs");
  if (!trace.labeled()) throw validate_error("extract_pairs: trace is unlabeled");
  Eigen::MatrixXd states = featurize(trace, cfg, FeatureKind::Raw);

  std::vector<Eigen::Index> at;
  for (std::size_t t = 0; t + 1 < trace.frames.size(); ++t) {
    if (trace.frames[t].label == skill && trace.frames[t + 1].label == skill)
      at.push_back(static_cast<Eigen::Index>(t));
  }
  bool any = false;
  for (const auto& f : trace.frames) any = any || f.label == skill;
  if (!any)
    throw validate_error(std::string("extract_pairs: no frames labeled '") + skill_name(skill) +
                         "'");

  PolicyPairs pairs;
  pairs.states.resize(kPolicyStateDim, static_cast<Eigen::Index>(at.size()));
  pairs.actions.resize(kPolicyActionDim, static_cast<Eigen::Index>(at.size()));
  for (std::size_t i = 0; i < at.size(); ++i) {
    const auto t = static_cast<std::size_t>(at[i]);
    const HapticFrame& a = trace.frames[t];
    const HapticFrame& b = trace.frames[t + 1];
    pairs.states.col(static_cast<Eigen::Index>(i)) = states.col(at[i]);
    Eigen::VectorXd action(kPolicyActionDim);
    for (int k = 0; k < 6; ++k) action(k) = b.ee_pose[k] - a.ee_pose[k];
    for (int f = 0; f < 4; ++f)
      for (int k = 0; k < 3; ++k)
        action(6 + 3 * f + k) = b.fingertip_pos[f][k] - a.fingertip_pos[f][k];
    pairs.actions.col(static_cast<Eigen::Index>(i)) = action;
  }
  return pairs;
}

PolicyPairs extract_pairs(const Dataset& ds, SkillId skill, const FeatureConfig& cfg) {
  std::vector<PolicyPairs> parts;
  Eigen::Index total = 0;
  for (const auto& trace : ds.traces) {
    bool any = false;
    for (const auto& f : trace.frames) any = any || f.label == skill;
    if (!any) continue;
    parts.push_back(extract_pairs(trace, skill, cfg));
    total += parts.back().count();
  }
  if (parts.empty() || total == 0)
    throw validate_error(std::string("extract_pairs: no frames labeled '") + skill_name(skill) +
                         "' in the dataset");
  PolicyPairs pairs;
  pairs.states.resize(kPolicyStateDim, total);
  pairs.actions.resize(kPolicyActionDim, total);
  Eigen::Index o = 0;
  for (const auto& p : parts) {
    pairs.states.middleCols(o, p.count()) = p.states;
    pairs.actions.middleCols(o, p.count()) = p.actions;
    o += p.count();
  }
  return pairs;
}

SkillPolicy train_policy(SkillId skill, const PolicyPairs& pairs, const FeatureConfig& fcfg,
                         const PolicyConfig& pcfg, const TrainConfig& tcfg,
                         std::vector<double>* epoch_losses) {
  check_skill(skill, "train_policy");
  tcfg.validate();
  if (pairs.count() < 1) throw validate_error("train_policy: empty pair set");
  if (pairs.states.rows() != kPolicyStateDim || pairs.actions.rows() != kPolicyActionDim)
    throw validate_error("train_policy: pair arity mismatch");

  SkillPolicy policy;
  policy.skill = skill;
  policy.feature_config = fcfg;
  policy.stats = fit_norm_stats({pairs.states});
  Eigen::MatrixXd x = pairs.states;
  apply_norm(x, policy.stats);

  std::vector<int> dims{kPolicyStateDim};
  dims.insert(dims.end(), pcfg.hidden.begin(), pcfg.hidden.end());
  dims.push_back(kPolicyActionDim);
  policy.net = init_dense_net(dims, mix_seed(tcfg.seed, 100 + static_cast<std::uint64_t>(skill)));

  AdamState state = make_adam_state(policy.net);
  const AdamConfig adam = tcfg.adam();
  const std::size_t n = static_cast<std::size_t>(pairs.count());
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  for (int e = 0; e < tcfg.epochs; ++e) {
    if (tcfg.shuffle) {
      Rng rng(mix_seed(tcfg.seed, 0x2000000ULL + static_cast<std::uint64_t>(e)));
      rng.shuffle(order);
    }
    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(tcfg.batch)) {
      const std::size_t hi = std::min(n, at + static_cast<std::size_t>(tcfg.batch));
      Eigen::MatrixXd xb(kPolicyStateDim, static_cast<Eigen::Index>(hi - at));
      Eigen::MatrixXd yb(kPolicyActionDim, static_cast<Eigen::Index>(hi - at));
      for (std::size_t i = at; i < hi; ++i) {
        xb.col(static_cast<Eigen::Index>(i - at)) = x.col(order[i]);
        yb.col(static_cast<Eigen::Index>(i - at)) = pairs.actions.col(order[i]);
      }
      ForwardCache cache;
      Eigen::MatrixXd pred = forward(policy.net, xb, &cache);
      LossResult loss = mse_loss(pred, yb);
      epoch_loss += loss.value * static_cast<double>(hi - at);
      NetGrads grads = backward(policy.net, cache, loss.grad);
      adam_step(policy.net, grads, state, adam);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(n));
  }
  return policy;
}

double policy_mse(const SkillPolicy& policy, const PolicyPairs& pairs) {
  if (pairs.count() < 1) throw validate_error("policy_mse: empty pair set");
  Eigen::MatrixXd x = pairs.states;
  apply_norm(x, policy.stats);
  Eigen::MatrixXd pred = forward(policy.net, x);
  return mse_loss(pred, pairs.actions).value;
}

Eigen::VectorXd act(const SkillPolicy& policy, const Eigen::VectorXd& state) {
  if (state.size() != kPolicyStateDim)
    throw validate_error("act: state arity must be 38, got " + std::to_string(state.size()));
  Eigen::MatrixXd xn = state;
  apply_norm(xn, policy.stats);
  return clamp_action(forward(policy.net, xn).col(0));
}

int median_demo_steps(const Dataset& ds, SkillId skill) {
  check_skill(skill, "median_demo_steps");
  std::vector<int> runs;
  for (const auto& trace : ds.traces) {
    if (!trace.labeled()) continue;
    for (const Segment& seg : labels_to_segments(trace.labels()))
      if (seg.skill == skill) runs.push_back(seg.end - seg.start);
  }
  if (runs.empty())
    throw validate_error(std::string("median_demo_steps: no runs of '") + skill_name(skill) +
                         "' in the dataset");
  std::sort(runs.begin(), runs.end());
  return runs[runs.size() / 2];
}

void save_policy(const SkillPolicy& policy, const std::string& path) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "policy";
  ckpt.meta["skill"] = policy.skill;
  ckpt.meta["skill_name"] = skill_name(policy.skill);
  ckpt.meta["feature_config"] = feature_config_to_json(policy.feature_config);
  ckpt.meta["feature_layout_hash"] = feature_layout_hash(FeatureKind::Raw);
  ckpt.meta["median_steps"] = policy.median_steps;
  append_net_arrays(ckpt, "net", policy.net);
  ckpt.arrays.emplace_back("norm.mean", policy.stats.mean);
  ckpt.arrays.emplace_back("norm.std", policy.stats.std);
  write_checkpoint(path, ckpt);
}

SkillPolicy load_policy(const std::string& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (!ckpt.meta.contains("kind") || ckpt.meta["kind"] != "policy")
    throw parse_error("'" + path + "' is not a policy checkpoint");

  SkillPolicy policy;
  try {
    policy.skill = ckpt.meta.at("skill").get<SkillId>();
    policy.feature_config = feature_config_from_json(ckpt.meta.at("feature_config"));
    policy.median_steps = ckpt.meta.at("median_steps").get<int>();
  } catch (const json::exception& e) {
    throw parse_error("policy checkpoint '" + path + "': " + e.what());
  }
  check_skill(policy.skill, "load_policy");

  const std::string stored = ckpt.meta.value("feature_layout_hash", "");
  const std::string actual = feature_layout_hash(FeatureKind::Raw);
  if (stored != actual)
    throw layout_error("feature layout hash mismatch in '" + path + "': checkpoint has " +
                       stored + ", current raw layout is " + actual);

  policy.net = net_from_arrays(ckpt, "net");
  policy.stats.mean = ckpt.array("norm.mean");
  policy.stats.std = ckpt.array("norm.std");
  if (policy.net.input_dim() != kPolicyStateDim || policy.net.output_dim() != kPolicyActionDim ||
      policy.stats.dim() != kPolicyStateDim)
    throw layout_error("policy checkpoint '" + path + "' array shapes are inconsistent");
  return policy;
}

}  // namespace dexseg
