#pragma once

#include <map>
#include <string>
#include <vector>

#include "dexseg/featurizer.hpp"
#include "dexseg/neural.hpp"
#include "dexseg/trace.hpp"

namespace dexseg {

// State = raw haptic slice (ee_pose 6, ah_joints 16, smoothed tactile 12,
// contact 4); action = one-step pose delta (6) + fingertip deltas (12).
inline constexpr int kPolicyStateDim = 38;
inline constexpr int kPolicyActionDim = 18;
inline constexpr double kActionClamp = 0.05;  // per component per 0.1 s step

Eigen::VectorXd clamp_action(Eigen::VectorXd action);

struct PolicyPairs {
  Eigen::MatrixXd states;   // 38 x n
  Eigen::MatrixXd actions;  // 18 x n

  Eigen::Index count() const { return states.cols(); }
};

// One pair per consecutive same-skill frame pair: state at t with
// action = (pose_{t+1} - pose_t, fingertips_{t+1} - fingertips_t).
// A run of k frames yields k-1 pairs.
PolicyPairs extract_pairs(const Trace& trace, SkillId skill, const FeatureConfig& cfg);
PolicyPairs extract_pairs(const Dataset& ds, SkillId skill, const FeatureConfig& cfg);

struct SkillPolicy {
  SkillId skill = 0;
  FeatureConfig feature_config;
  NormStats stats;  // state normalization
  DenseNet net;     // 38 -> hidden -> 18
  int median_steps = 0;  // median same-skill run length over the training set
};

struct PolicyConfig {
  std::vector<int> hidden{128, 128};
};

// MSE regression from normalized states to raw actions.
SkillPolicy train_policy(SkillId skill, const PolicyPairs& pairs, const FeatureConfig& fcfg,
                         const PolicyConfig& pcfg, const TrainConfig& tcfg,
                         std::vector<double>* epoch_losses = nullptr);

double policy_mse(const SkillPolicy& policy, const PolicyPairs& pairs);

// Forward pass + safety clamp.
Eigen::VectorXd act(const SkillPolicy& policy, const Eigen::VectorXd& state);

// Median contiguous-run length of `skill` across a labeled dataset.
int median_demo_steps(const Dataset& ds, SkillId skill);

void save_policy(const SkillPolicy& policy, const std::string& path);
SkillPolicy load_policy(const std::string& path);

struct PlanStep {
  SkillId skill = 0;
  int steps = 0;
};

struct World;

// Steps the world with the active skill's policy for each plan entry,
// switching at boundaries; the result is labeled by the commanded skill.
// Defined alongside the world model.
Trace execute_sequence(const std::map<SkillId, SkillPolicy>& policies,
                       const std::vector<PlanStep>& plan, World& world);

}  // namespace dexseg
