#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dexseg/common.hpp"

namespace dexseg {

// Skill ids are 1-based; names are metadata only.
using SkillId = int;
inline constexpr int kNumSkills = 20;

const char* skill_name(SkillId id);
bool is_valid_skill(SkillId id);
void check_skill(SkillId id);
void check_skill(SkillId id, const std::string& where);

// One-hot over the 20 skill classes; entry id-1 is 1.
std::vector<double> one_hot(SkillId id);

// One 10 Hz sample of raw robot signals.
struct HapticFrame {
  double t = 0.0;
  std::array<double, 6> ee_pose{};              // x, y, z, alpha, beta, gamma
  std::array<double, 16> ah_joints{};
  std::array<std::array<double, 3>, 4> fingertip_pos{};
  std::array<std::array<double, 3>, 4> tactile{};
  std::optional<SkillId> label;
};

struct TraceMeta {
  std::string id;
  std::string source = "synthetic";  // synthetic | ingested
  std::string object;
  std::string split;                 // train | validation | ""
  std::optional<std::uint64_t> seed;
  std::optional<SkillId> skill;      // primitive-skill demos
  std::optional<std::string> task;   // long-horizon task id A..T
};

struct Trace {
  std::vector<HapticFrame> frames;
  TraceMeta meta;

  std::size_t size() const { return frames.size(); }
  bool labeled() const { return !frames.empty() && frames.front().label.has_value(); }
  std::vector<SkillId> labels() const;
};

// Throws validate_error on structural violations: too short, mixed labels,
// non-monotonic time, spacing outside [0.09, 0.11] s, non-finite values.
void validate_trace(const Trace& trace);

struct Dataset {
  std::vector<Trace> traces;

  std::size_t total_frames() const;
  bool labeled() const;
};

// Run of identical labels: [start, end) with 0-based frame indices.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  SkillId skill = 0;

  bool operator==(const Segment&) const = default;
};

std::vector<Segment> labels_to_segments(const std::vector<SkillId>& labels);
std::vector<SkillId> segments_to_labels(const std::vector<Segment>& segments);

// Trace JSONL:
//   {"format":"dexseg-trace","version":1,"meta":{...}}
//   {"t":...,"ee_pose":[...6],"ah_joints":[...16],"fingertip_pos":[[..3]x4],
//    "tactile":[[..3]x4],"label":k}
// A file holds one or more header+frames blocks; a directory holds one file
// per trace. Numbers are written with 17 significant digits.
Dataset load_traces(const std::string& path);
void save_traces(const Dataset& ds, const std::string& path);

Trace load_single_trace(const std::string& path);
void save_single_trace(const Trace& trace, const std::string& path);

}  // namespace dexseg
