#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexseg/policy.hpp"
#include "dexseg/trace.hpp"

namespace dexseg {

struct SynthConfig {
  double dt = 0.1;
  double contact_shell = 0.005;     // m; fingertips inside this shell touch
  double force_gain = 50.0;         // force units per meter of shell penetration
  double force_noise = 0.01;        // std of in-contact force components
  double signal_noise_pos = 0.001;  // std of emitted positions, m
  double signal_noise_rot = 0.003;  // std of emitted angles/joints, rad
  double start_jitter_pos = 0.05;   // per-demo start randomization, m
  double start_jitter_rot = 0.45;   // rad
  double object_jitter = 0.05;      // per-demo object placement spread, m
  bool noise = true;                // false: clean signals, no jitter
  int demos_per_skill = 10;

  void validate() const;
};

struct ObjectSpec {
  std::string tag;
  Eigen::Vector3d half_extents;  // m
  double mass_kg = 0.0;
};

// sponge | cardboard | bottle
ObjectSpec object_spec(const std::string& tag);

using Pose6 = Eigen::Matrix<double, 6, 1>;  // x,y,z,alpha,beta,gamma

struct World {
  SynthConfig cfg;
  Rng rng{0};  // force + measurement noise, consumed in fixed per-step order
  double t = 0.0;
  double table_height = 0.0;  // resting surface level of this scene
  Pose6 ee_pose = Pose6::Zero();
  std::array<Eigen::Vector3d, 4> fingertips{};  // world frame
  ObjectSpec object;
  Pose6 object_pose = Pose6::Zero();
  bool attached = false;
  Pose6 attach_offset = Pose6::Zero();  // object pose minus EE pose at attach
  long frames_emitted = 0;

  std::array<double, 4> penetration{};  // post-step shell penetration, m
  std::array<Eigen::Vector3d, 4> contact_force{};  // pre-noise, world frame
  int contact_count() const;
};

inline constexpr double kFingerReach = 0.2;  // m from the EE position

World make_world(const SynthConfig& cfg, const std::string& object_tag, std::uint64_t seed);

// Shell distance of a world point to the object surface (negative inside).
double object_surface_distance(const World& w, const Eigen::Vector3d& point);

// Re-evaluates penetrations and the attachment flag without moving anything.
void refresh_contacts(World& w);

// Integrates one clamped action at dt, keeps fingertips within reach,
// tracks the attached object, updates contacts/attachment, and emits the
// sensed frame (measurement noise per cfg).
HapticFrame step(World& w, const Eigen::VectorXd& action);

// Fixed smooth joint map: 16 joints from fingertip offsets relative to the
// EE position.
std::array<double, 16> synth_ah_joints(const Pose6& ee_pose,
                                       const std::array<Eigen::Vector3d, 4>& fingertips);

struct TaskSpec {
  char id = '?';
  std::vector<SkillId> sequence;
  std::string object;
};

const std::array<TaskSpec, 20>& task_table();
const TaskSpec& task_spec(char id);

Trace generate_skill(SkillId skill, std::uint64_t seed, const SynthConfig& cfg,
                     const std::string& object_tag = "sponge");

Trace generate_task(char task_id, std::uint64_t seed, const SynthConfig& cfg);

struct Corpus {
  Dataset train;  // labeled primitive-skill demos
  Dataset tasks;  // the 20 long-horizon task traces
};

// demos_per_skill per skill; Touch, Wipe Back, and Grasp additionally on
// cardboard and Lift with Grasp additionally on the bottle, mirroring the
// collection rules the trace counts follow (240 primitives at the default
// 10).
Corpus generate_corpus(const SynthConfig& cfg, std::uint64_t seed);

// Per-trace listing (id, skill/task, object, seed, frames) for the corpus
// manifest; `train_dir`/`task_dir` prefix the file entries.
nlohmann::ordered_json corpus_manifest(const Corpus& corpus, std::uint64_t seed,
                                       const std::string& train_dir,
                                       const std::string& task_dir);

}  // namespace dexseg
