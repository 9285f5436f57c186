#include "dexseg/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "dexseg/featurizer.hpp"

namespace dexseg {

namespace {

constexpr std::uint64_t kWorldStream = 0x776f726cULL;
constexpr std::uint64_t kScriptStream = 0x736b696cULL;
constexpr std::uint64_t kTaskStream = 0x7461736bULL;

constexpr double kEeStartX = 0.20;
constexpr double kEeStartZ = 0.30;
constexpr double kHoverClearance = 0.11;   // EE height above the object top
constexpr double kGraspClearance = 0.14;   // EE height above the object center
constexpr double kLiftHeight = 0.12;
constexpr double kPresideClearance = 3.0;  // side approach, in shells

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

double lerp(double a, double b, double s) { return a + (b - a) * s; }

Eigen::Vector3d lerp3(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double s) {
  return a + (b - a) * s;
}

Eigen::Matrix3d euler_rot(double alpha, double beta, double gamma) {
  return (Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Matrix3d object_rot(const World& w) {
  return euler_rot(w.object_pose[3], w.object_pose[4], w.object_pose[5]);
}

double box_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& half) {
  Eigen::Vector3d q = p.cwiseAbs() - half;
  double outside = q.cwiseMax(0.0).norm();
  double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

Eigen::Vector3d box_normal(const Eigen::Vector3d& p, const Eigen::Vector3d& half) {
  const double h = 1e-6;
  Eigen::Vector3d n;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    d(k) = h;
    n(k) = box_sdf(p + d, half) - box_sdf(p - d, half);
  }
  double len = n.norm();
  if (len < 1e-12) return Eigen::Vector3d::UnitZ();
  return n / len;
}

Eigen::Vector3d ee_position(const World& w) { return w.ee_pose.head<3>(); }

Eigen::Vector3d object_to_world(const World& w, const Eigen::Vector3d& local) {
  return object_rot(w) * local + w.object_pose.head<3>();
}

// Finger sign pattern (x, y): 0 = (+,+), 1 = (+,-), 2 = (-,+), 3 = (-,-).
double sign_x(int f) { return f < 2 ? 1.0 : -1.0; }
double sign_y(int f) { return (f % 2 == 0) ? 1.0 : -1.0; }

std::array<Eigen::Vector3d, 4> finger_shape(double dx, double dy, double dz) {
  std::array<Eigen::Vector3d, 4> s;
  for (int f = 0; f < 4; ++f) s[f] = Eigen::Vector3d(sign_x(f) * dx, sign_y(f) * dy, dz);
  return s;
}

const std::array<Eigen::Vector3d, 4>& rest_shape() {
  static const auto s = finger_shape(0.05, 0.05, -0.09);
  return s;
}
const std::array<Eigen::Vector3d, 4>& spread_shape() {
  static const auto s = finger_shape(0.095, 0.095, -0.07);
  return s;
}
const std::array<Eigen::Vector3d, 4>& extended_shape() {
  static const auto s = finger_shape(0.085, 0.085, -0.125);
  return s;
}
const std::array<Eigen::Vector3d, 4>& curled_shape() {
  static const auto s = finger_shape(0.03, 0.03, -0.06);
  return s;
}
const std::array<Eigen::Vector3d, 4>& open_shape() {
  static const auto s = finger_shape(0.11, 0.11, -0.05);
  return s;
}

Eigen::Vector3d top_site(const ObjectSpec& o, int f) {
  return {sign_x(f) * 0.6 * o.half_extents.x(), sign_y(f) * 0.6 * o.half_extents.y(),
          o.half_extents.z()};
}

Eigen::Vector3d side_site(const ObjectSpec& o, int f) {
  return {sign_x(f) * 0.4 * o.half_extents.x(), sign_y(f) * o.half_extents.y(), 0.0};
}

Eigen::Vector3d side_normal(int f) { return {0.0, sign_y(f), 0.0}; }

// Object-local point whose steady-state contact force equals `force`.
Eigen::Vector3d pressed_local(const World& w, const Eigen::Vector3d& site,
                              const Eigen::Vector3d& normal, double force) {
  double dist = w.cfg.contact_shell - force / w.cfg.force_gain;
  return site + normal * dist;
}

Eigen::Vector3d pressed_point(const World& w, const Eigen::Vector3d& site,
                              const Eigen::Vector3d& normal, double force) {
  return object_to_world(w, pressed_local(w, site, normal, force));
}

struct FingerTarget {
  bool contact = false;
  Eigen::Vector3d rel = Eigen::Vector3d::Zero();     // offset from the target EE position
  Eigen::Vector3d site = Eigen::Vector3d::Zero();    // object-local contact site
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // object-local site normal
  double force = 0.0;
};

struct StepTarget {
  Pose6 ee = Pose6::Zero();
  std::array<FingerTarget, 4> fingers{};
};

// Geometry captured when a skill segment starts.
struct ScriptGeom {
  Pose6 ee0 = Pose6::Zero();
  Pose6 obj0 = Pose6::Zero();
  double hover_z = 0.0;
  double grasp_z = 0.0;
  double place_ee_z = 0.0;
};

ScriptGeom capture_geom(const World& w) {
  ScriptGeom g;
  g.ee0 = w.ee_pose;
  g.obj0 = w.object_pose;
  g.hover_z = w.object_pose[2] + w.object.half_extents.z() + kHoverClearance;
  g.grasp_z = w.object_pose[2] + kGraspClearance;
  if (w.attached)
    g.place_ee_z = w.table_height + w.object.half_extents.z() - w.attach_offset[2];
  else
    g.place_ee_z = w.ee_pose[2] - 0.10;
  return g;
}

StepTarget skill_target(SkillId skill, int i, int n, const ScriptGeom& g, const World& w) {
  const double u = (n > 1) ? static_cast<double>(i) / (n - 1) : 1.0;
  const ObjectSpec& o = w.object;

  StepTarget t;
  t.ee = g.ee0;
  for (int f = 0; f < 4; ++f) t.fingers[f].rel = rest_shape()[f];

  auto relf = [&](int f, const Eigen::Vector3d& r) {
    t.fingers[f] = FingerTarget{};
    t.fingers[f].rel = r;
  };
  auto press = [&](int f, const Eigen::Vector3d& site, const Eigen::Vector3d& normal,
                   double force) {
    t.fingers[f].contact = true;
    t.fingers[f].site = site;
    t.fingers[f].normal = normal;
    t.fingers[f].force = force;
  };
  auto press_top = [&](int f, double force) {
    press(f, top_site(o, f), Eigen::Vector3d::UnitZ(), force);
  };
  auto press_side = [&](int f, double force) { press(f, side_site(o, f), side_normal(f), force); };
  auto preside_rel = [&](int f) {
    Eigen::Vector3d clear =
        object_to_world(w, side_site(o, f) + side_normal(f) * kPresideClearance * w.cfg.contact_shell);
    relf(f, clear - t.ee.head<3>());
  };
  auto grip_all = [&](double force) {
    for (int f = 0; f < 4; ++f) press_side(f, force);
  };

  switch (skill) {
    case 1: {  // Reach: far start to a hover above the object
      double s = smoothstep(u);
      Eigen::Vector3d goal(g.obj0[0], g.obj0[1], g.hover_z);
      t.ee.head<3>() = lerp3(g.ee0.head<3>(), goal, s);
      break;
    }
    case 2: {  // Setup Position: reposition in free space
      const double d[6] = {-0.10, 0.12, 0.06, 0.0, 0.0, 0.5};
      double s = smoothstep(u);
      for (int k = 0; k < 6; ++k) t.ee[k] = g.ee0[k] + s * d[k];
      break;
    }
    case 3: {  // PreTouch: slow descent, fingers extend
      double s = smoothstep(u);
      t.ee[2] = g.ee0[2] - 0.05 * s;
      for (int f = 0; f < 4; ++f) relf(f, lerp3(rest_shape()[f], extended_shape()[f], s));
      break;
    }
    case 4: {  // Touch: one finger presses the top, then lets go
      double force = 0.0;
      if (u < 0.70)
        force = 0.5 * std::min(1.0, u / 0.30);
      else if (u <= 0.85)
        force = 0.5 * (1.0 - (u - 0.70) / 0.15);
      for (int f = 0; f < 4; ++f) relf(f, extended_shape()[f]);
      if (force > 1e-9)
        press_top(0, force);
      break;
    }
    case 5: {  // Flip: roll over with a brief two-finger top contact, then roll back
      if (u < 0.60)
        t.ee[3] = g.ee0[3] + 0.9 * smoothstep(u / 0.60);
      else
        t.ee[3] = g.ee0[3] + 0.9 - 0.9 * smoothstep((u - 0.60) / 0.40);
      for (int f = 0; f < 4; ++f) relf(f, curled_shape()[f]);
      if (u >= 0.30 && u <= 0.70) {
        press_top(0, 0.3);
        press_top(1, 0.3);
      }
      break;
    }
    case 6:    // Wipe Forth: drag two fingers along the top, +y
    case 7: {  // Wipe Back: the -y return stroke
      double dir = (skill == 6) ? 1.0 : -1.0;
      t.ee[0] = g.obj0[0];
      t.ee[1] = g.ee0[1] + dir * 0.14 * u;
      t.ee[2] = g.hover_z;
      double y0 = -dir * 0.5, y1 = dir * 0.5;
      for (int f = 0; f < 2; ++f) {
        Eigen::Vector3d site(sign_x(f) * 0.5 * o.half_extents.x(),
                             lerp(y0, y1, u) * o.half_extents.y(), o.half_extents.z());
        press(f, site, Eigen::Vector3d::UnitZ(), 0.4);
      }
      break;
    }
    case 8: {  // PreGrasp: drop to the grasp stance, fingers open then cage
      Eigen::Vector3d goal(g.obj0[0], g.obj0[1], g.grasp_z);
      t.ee.head<3>() = lerp3(g.ee0.head<3>(), goal, smoothstep(u));
      if (u < 0.5) {
        double s = smoothstep(u / 0.5);
        for (int f = 0; f < 4; ++f) relf(f, lerp3(rest_shape()[f], spread_shape()[f], s));
      } else {
        for (int f = 0; f < 4; ++f) preside_rel(f);
      }
      break;
    }
    case 9: {  // Grasp: fingers close onto the side sites one after another
      for (int f = 0; f < 4; ++f) {
        double start = 0.15 + 0.20 * f;
        double force = 0.6 * std::clamp((u - start) / 0.20, 0.0, 1.0);
        if (force > 1e-9)
          press_side(f, force);
        else
          preside_rel(f);
      }
      break;
    }
    case 10: {  // Lift with Grasp: settle onto the grip, then raise
      t.ee[0] = g.obj0[0];
      t.ee[1] = g.obj0[1];
      if (u < 0.15)
        t.ee[2] = lerp(g.ee0[2], g.grasp_z, smoothstep(u / 0.15));
      else
        t.ee[2] = g.grasp_z + kLiftHeight * smoothstep((u - 0.15) / 0.85);
      grip_all(0.6);
      break;
    }
    case 11: {  // Transport Forward
      t.ee[0] = g.ee0[0] + 0.08 * smoothstep(u);
      grip_all(0.6);
      break;
    }
    case 12: {  // Place: lower to the table, then release the grip
      if (u < 0.75) {
        t.ee[2] = lerp(g.ee0[2], g.place_ee_z, smoothstep(u / 0.75));
        grip_all(0.6);
      } else {
        t.ee[2] = g.place_ee_z;
        double force = 0.6 * std::clamp(1.0 - (u - 0.75) / 0.15, 0.0, 1.0);
        for (int f = 0; f < 4; ++f) {
          if (force > 1e-9)
            press_side(f, force);
          else
            relf(f, spread_shape()[f]);
        }
      }
      break;
    }
    case 13: {  // PreRotate: yaw the wrist out, fingers orbit in free space
      double th = -0.25 * smoothstep(u);
      t.ee[5] = g.ee0[5] + th;
      Eigen::Matrix3d rz = Eigen::AngleAxisd(th, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      for (int f = 0; f < 4; ++f) relf(f, rz * rest_shape()[f]);
      break;
    }
    case 14: {  // Rotate: three-finger top grip, yaw the object out and mostly back
      if (u < 0.55)
        t.ee[5] = g.ee0[5] + 0.9 * smoothstep(u / 0.55);
      else
        t.ee[5] = g.ee0[5] + 0.9 - 0.65 * smoothstep((u - 0.55) / 0.45);
      for (int f = 0; f < 4; ++f) relf(f, curled_shape()[f]);
      for (int f = 0; f < 3; ++f) press_top(f, 0.45);
      break;
    }
    case 15:    // Shake Up: three tall bounces above the carry height
    case 16: {  // Shake Down: six quick shallow dips below it
      const bool up = (skill == 15);
      const double amp = up ? 0.020 : 0.012;
      const double cycles = up ? 3.0 : 6.0;
      const double dir = up ? 1.0 : -1.0;
      t.ee[2] = g.ee0[2] + dir * amp * (1.0 - std::cos(2.0 * M_PI * cycles * u));
      grip_all(up ? 0.78 : 0.88);
      break;
    }
    case 17: {  // Twist: triangle-wave roll while holding, settling out by the end
      int r = i % 12;
      double a = (r < 6) ? 0.075 * (r + 1) : 0.45 - 0.075 * (r - 5);
      a *= std::clamp((1.0 - u) / 0.12, 0.0, 1.0);
      t.ee[3] = g.ee0[3] + a;
      grip_all(0.5);
      break;
    }
    case 18: {  // Vertical Place: pitch upright while descending, set down, release
      if (u < 0.80) {
        t.ee[4] = g.ee0[4] + 0.5 * smoothstep(u / 0.80);
        t.ee[2] = lerp(g.ee0[2], g.place_ee_z + 0.02, smoothstep(u / 0.80));
        grip_all(0.38);
      } else {
        t.ee[4] = g.ee0[4] + 0.5 - 0.35 * smoothstep((u - 0.80) / 0.20);
        t.ee[2] = g.place_ee_z + 0.02;
        double force = 0.38 * std::clamp(1.0 - (u - 0.80) / 0.10, 0.0, 1.0);
        for (int f = 0; f < 4; ++f) {
          if (force > 1e-9)
            press_side(f, force);
          else
            relf(f, spread_shape()[f]);
        }
      }
      break;
    }
    case 19: {  // Pour: firm grip, steady pitch far over, then most of the way back
      if (u < 0.75)
        t.ee[4] = g.ee0[4] + 1.0 * (u / 0.75);
      else
        t.ee[4] = g.ee0[4] + 1.0 - 1.0 * ((u - 0.75) / 0.25);
      grip_all(0.72);
      break;
    }
    case 20: {  // Release: let go, open wide, and back off upward
      t.ee[2] = g.ee0[2] + 0.09 * smoothstep(u);
      if (u < 0.30) {
        double force = 0.6 * (1.0 - u / 0.30);
        for (int f = 0; f < 4; ++f) {
          if (force > 1e-9)
            press_side(f, force);
          else
            relf(f, open_shape()[f]);
        }
      } else {
        for (int f = 0; f < 4; ++f) relf(f, open_shape()[f]);
      }
      break;
    }
    default:
      check_skill(skill, "skill_target");
  }
  return t;
}

struct DurationRange {
  int lo = 0;
  int hi = 0;
};

const DurationRange& duration_range(SkillId skill) {
  static const std::array<DurationRange, 21> table = {{{0, 0},
                                                       {50, 64},    // Reach
                                                       {50, 64},    // Setup Position
                                                       {44, 58},    // PreTouch
                                                       {54, 68},    // Touch
                                                       {44, 56},    // Flip
                                                       {48, 62},    // Wipe Forth
                                                       {48, 62},    // Wipe Back
                                                       {44, 58},    // PreGrasp
                                                       {54, 68},    // Grasp
                                                       {56, 70},    // Lift with Grasp
                                                       {50, 64},    // Transport Forward
                                                       {56, 70},    // Place
                                                       {44, 58},    // PreRotate
                                                       {50, 64},    // Rotate
                                                       {54, 70},    // Shake Up
                                                       {54, 70},    // Shake Down
                                                       {54, 70},    // Twist
                                                       {58, 74},    // Vertical Place
                                                       {58, 76},    // Pour
                                                       {28, 36}}};  // Release
  check_skill(skill, "duration_range");
  return table[static_cast<std::size_t>(skill)];
}

// Durations vary with the seed even in clean mode, so seed variation is
// never a no-op.
int sample_duration(SkillId skill, Rng& rng) {
  const DurationRange& r = duration_range(skill);
  return r.lo + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(r.hi - r.lo + 1)));
}

void place_fingers_rel(World& w, const std::array<Eigen::Vector3d, 4>& shape) {
  for (int f = 0; f < 4; ++f) w.fingertips[f] = ee_position(w) + shape[f];
}

// Start configurations. Skills that begin mid-manipulation get the matching
// hand/object state directly; contacts and attachment are refreshed after.
// Starts are sampled broadly so single-skill demonstrations cover the poses a
// skill is entered from mid-task, where the hand arrives rotated, offset, and
// at varying heights from whatever the previous skill left behind.
void apply_precondition(World& w, SkillId skill, Rng& rng) {
  const SynthConfig& cfg = w.cfg;
  const bool jitter = cfg.noise;
  auto sym = [&](double amp) { return jitter ? rng.uniform(-amp, amp) : 0.0; };
  auto range = [&](double lo, double hi) { return jitter ? rng.uniform(lo, hi) : 0.0; };
  const double jr = cfg.start_jitter_rot;

  w.object_pose[0] = 0.5 + sym(cfg.object_jitter);
  w.object_pose[1] = 0.0 + sym(cfg.object_jitter);
  const double table = range(0.0, 0.25);
  w.table_height = table;
  const double hz = w.object.half_extents.z();
  w.object_pose[2] = table + hz;
  const double obj_x = w.object_pose[0];
  const double obj_y = w.object_pose[1];

  auto set_ee = [&](double x, double y, double z, double xy_spread, double z_off,
                    double roll0 = 0.0, double pitch0 = 0.0, double yaw0 = 0.0) {
    w.ee_pose << x + sym(xy_spread), y + sym(xy_spread), z + z_off, roll0 + sym(jr),
        pitch0 + sym(jr), yaw0 + sym(jr);
  };
  auto press_finger = [&](int f, const Eigen::Vector3d& site, const Eigen::Vector3d& normal,
                          double force) {
    w.fingertips[f] = pressed_point(w, site, normal, force);
  };

  const double hover_z = w.object_pose[2] + hz + kHoverClearance;
  const double grasp_z = w.object_pose[2] + kGraspClearance;

  switch (skill) {
    case 1:  // far free-space start
      set_ee(kEeStartX + sym(cfg.start_jitter_pos), sym(cfg.start_jitter_pos),
             kEeStartZ + table + sym(cfg.start_jitter_pos), 0.0, 0.0);
      place_fingers_rel(w, rest_shape());
      break;
    case 6:
    case 7:  // on the top with the two wipe fingers pressed, anywhere along the stroke
      set_ee(obj_x, obj_y + sym(0.09), hover_z, 0.0, range(-0.01, 0.02));
      place_fingers_rel(w, rest_shape());
      for (int f = 0; f < 2; ++f)
        press_finger(f, top_site(w.object, f), Eigen::Vector3d::UnitZ(), 0.4);
      break;
    case 14:  // hovering with the three-finger top grip engaged, often pre-yawed
      set_ee(obj_x, obj_y, hover_z, 0.02, range(-0.01, 0.02), 0.0, 0.0, -0.25);
      place_fingers_rel(w, curled_shape());
      for (int f = 0; f < 3; ++f)
        press_finger(f, top_site(w.object, f), Eigen::Vector3d::UnitZ(), 0.45);
      break;
    case 9:  // grasp stance, fingers caging the side sites
      set_ee(obj_x, obj_y, grasp_z, 0.01, range(-0.01, 0.03));
      for (int f = 0; f < 4; ++f) {
        Eigen::Vector3d clear = side_site(w.object, f) +
                                side_normal(f) * kPresideClearance * cfg.contact_shell;
        w.fingertips[f] = object_to_world(w, clear);
      }
      break;
    case 10:  // gripping the object while it still rests on the table
      set_ee(obj_x, obj_y, grasp_z, 0.0, range(-0.01, 0.035));
      for (int f = 0; f < 4; ++f)
        press_finger(f, side_site(w.object, f), side_normal(f), 0.6);
      break;
    case 11:
    case 12:
    case 15:
    case 16:
    case 17:
    case 18:
    case 19:
    case 20: {  // holding the object lifted, at any carry height and offset
      w.object_pose[0] = obj_x + range(-0.02, 0.12);
      w.object_pose[2] = table + hz + 0.10 + range(-0.06, 0.18);
      set_ee(w.object_pose[0], obj_y, w.object_pose[2] + kGraspClearance, 0.0, 0.0);
      w.ee_pose[0] = w.object_pose[0];  // grip requires the EE centered over the object
      w.ee_pose[1] = obj_y;
      for (int f = 0; f < 4; ++f)
        press_finger(f, side_site(w.object, f), side_normal(f), 0.6);
      break;
    }
    default:  // hover above the object
      set_ee(obj_x, obj_y, hover_z, 0.04, range(-0.02, 0.06));
      place_fingers_rel(w, rest_shape());
      break;
  }
  refresh_contacts(w);
}

// One scripted segment appended to `frames`, labeled with `skill`.
void run_segment(World& w, SkillId skill, int steps, Rng& script_rng,
                 std::vector<HapticFrame>& frames) {
  ScriptGeom g = capture_geom(w);
  for (int i = 0; i < steps; ++i) {
    StepTarget tgt = skill_target(skill, i, steps, g, w);
    if (w.cfg.noise) {
      for (int k = 0; k < 3; ++k) tgt.ee[k] += script_rng.normal(0.0, 0.002);
      for (int k = 3; k < 6; ++k) tgt.ee[k] += script_rng.normal(0.0, 0.004);
    }
    Eigen::VectorXd action(kPolicyActionDim);
    for (int k = 0; k < 6; ++k) action(k) = tgt.ee[k] - w.ee_pose[k];
    for (int f = 0; f < 4; ++f) {
      const FingerTarget& ft = tgt.fingers[f];
      Eigen::Vector3d desired = ft.contact ? pressed_point(w, ft.site, ft.normal, ft.force)
                                           : Eigen::Vector3d(tgt.ee.head<3>() + ft.rel);
      action.segment<3>(6 + 3 * f) = desired - w.fingertips[f];
    }
    HapticFrame frame = step(w, action);
    frame.label = skill;
    frames.push_back(frame);
  }
}

std::string kebab(const std::string& name) {
  std::string out;
  for (char c : name) out.push_back(c == ' ' ? '-' : static_cast<char>(std::tolower(c)));
  return out;
}

std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

// The policy state of the newest frame: raw slice with the tactile mean taken
// over the trailing half-window, which matches the truncated centered smoothing
// at a trace's last frame.
Eigen::VectorXd rollout_state(const std::vector<HapticFrame>& frames, const FeatureConfig& fc) {
  const HapticFrame& last = frames.back();
  Eigen::VectorXd s(kPolicyStateDim);
  for (int k = 0; k < 6; ++k) s(k) = last.ee_pose[k];
  for (int k = 0; k < 16; ++k) s(6 + k) = last.ah_joints[k];

  const std::size_t n = frames.size();
  const std::size_t half = static_cast<std::size_t>(fc.tactile_smoothing_window / 2);
  const std::size_t lo = (n - 1 > half) ? n - 1 - half : 0;
  for (int f = 0; f < 4; ++f) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t i = lo; i < n; ++i)
      for (int c = 0; c < 3; ++c) mean(c) += frames[i].tactile[f][c];
    mean /= static_cast<double>(n - lo);
    for (int c = 0; c < 3; ++c) s(22 + 3 * f + c) = mean(c);
    s(34 + f) = contact_status(mean.norm(), fc);
  }
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(dt >= 0.09 && dt <= 0.11))
    throw validate_error("synth dt must lie in [0.09, 0.11] s, got " + std::to_string(dt));
  if (contact_shell <= 0.0) throw validate_error("contact_shell must be positive");
  if (force_gain <= 0.0) throw validate_error("force_gain must be positive");
  if (force_noise < 0.0 || signal_noise_pos < 0.0 || signal_noise_rot < 0.0 ||
      start_jitter_pos < 0.0 || start_jitter_rot < 0.0 || object_jitter < 0.0)
    throw validate_error("noise magnitudes must be non-negative");
  if (demos_per_skill < 1) throw validate_error("demos_per_skill must be at least 1");
}

ObjectSpec object_spec(const std::string& tag) {
  if (tag == "sponge") return {tag, {0.080, 0.0425, 0.0225}, 0.020};
  if (tag == "cardboard") return {tag, {0.070, 0.0375, 0.0200}, 0.015};
  if (tag == "bottle") return {tag, {0.035, 0.0350, 0.1100}, 0.220};
  throw validate_error("unknown object '" + tag + "' (expected sponge|cardboard|bottle)");
}

int World::contact_count() const {
  int n = 0;
  for (double p : penetration)
    if (p > 0.0) ++n;
  return n;
}

World make_world(const SynthConfig& cfg, const std::string& object_tag, std::uint64_t seed) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  w.rng = Rng(seed);
  w.object = object_spec(object_tag);
  w.object_pose << 0.5, 0.0, w.object.half_extents.z(), 0.0, 0.0, 0.0;
  w.ee_pose << kEeStartX, 0.0, kEeStartZ, 0.0, 0.0, 0.0;
  place_fingers_rel(w, rest_shape());
  refresh_contacts(w);
  return w;
}

double object_surface_distance(const World& w, const Eigen::Vector3d& point) {
  Eigen::Vector3d local = object_rot(w).transpose() * (point - w.object_pose.head<3>());
  return box_sdf(local, w.object.half_extents);
}

void refresh_contacts(World& w) {
  const Eigen::Matrix3d rot = object_rot(w);
  int count = 0;
  for (int f = 0; f < 4; ++f) {
    Eigen::Vector3d local = rot.transpose() * (w.fingertips[f] - w.object_pose.head<3>());
    double pen = w.cfg.contact_shell - box_sdf(local, w.object.half_extents);
    if (pen > 0.0) {
      w.penetration[f] = pen;
      w.contact_force[f] = w.cfg.force_gain * pen * (rot * box_normal(local, w.object.half_extents));
      ++count;
    } else {
      w.penetration[f] = 0.0;
      w.contact_force[f].setZero();
    }
  }
  if (!w.attached && count >= 3) {
    w.attached = true;
    w.attach_offset = w.object_pose - w.ee_pose;
  } else if (w.attached && count < 3) {
    w.attached = false;
  }
}

HapticFrame step(World& w, const Eigen::VectorXd& action) {
  Eigen::VectorXd a = clamp_action(action);

  for (int k = 0; k < 6; ++k) w.ee_pose[k] += a(k);
  for (int f = 0; f < 4; ++f) {
    w.fingertips[f] += a.segment<3>(6 + 3 * f);
    Eigen::Vector3d rel = w.fingertips[f] - ee_position(w);
    double len = rel.norm();
    if (len > kFingerReach) w.fingertips[f] = ee_position(w) + rel * (kFingerReach / len);
  }
  if (w.attached) w.object_pose = w.ee_pose + w.attach_offset;
  refresh_contacts(w);

  HapticFrame frame;
  frame.t = static_cast<double>(w.frames_emitted) * w.cfg.dt;
  const bool noise = w.cfg.noise;
  for (int k = 0; k < 6; ++k) {
    double sigma = (k < 3) ? w.cfg.signal_noise_pos : w.cfg.signal_noise_rot;
    frame.ee_pose[k] = w.ee_pose[k] + (noise ? w.rng.normal(0.0, sigma) : 0.0);
  }
  std::array<double, 16> joints = synth_ah_joints(w.ee_pose, w.fingertips);
  for (int k = 0; k < 16; ++k)
    frame.ah_joints[k] = joints[k] + (noise ? w.rng.normal(0.0, w.cfg.signal_noise_rot) : 0.0);
  for (int f = 0; f < 4; ++f)
    for (int c = 0; c < 3; ++c)
      frame.fingertip_pos[f][c] =
          w.fingertips[f](c) + (noise ? w.rng.normal(0.0, w.cfg.signal_noise_pos) : 0.0);
  for (int f = 0; f < 4; ++f) {
    if (w.penetration[f] > 0.0) {
      for (int c = 0; c < 3; ++c)
        frame.tactile[f][c] =
            w.contact_force[f](c) + (noise ? w.rng.normal(0.0, w.cfg.force_noise) : 0.0);
    } else {
      frame.tactile[f] = {0.0, 0.0, 0.0};
    }
  }

  ++w.frames_emitted;
  w.t = static_cast<double>(w.frames_emitted) * w.cfg.dt;
  return frame;
}

std::array<double, 16> synth_ah_joints(const Pose6& ee_pose,
                                       const std::array<Eigen::Vector3d, 4>& fingertips) {
  struct JointMap {
    std::array<Eigen::Vector3d, 16> a;
    std::array<double, 16> c;
  };
  static const JointMap map = [] {
    JointMap m;
    Rng rng(0x6a6f696e74ULL);
    for (int k = 0; k < 16; ++k) {
      for (int c = 0; c < 3; ++c) m.a[k](c) = rng.uniform(-12.0, 12.0);
      m.c[k] = rng.uniform(-0.6, 0.6);
    }
    return m;
  }();

  std::array<double, 16> joints{};
  for (int k = 0; k < 16; ++k) {
    Eigen::Vector3d rel = fingertips[static_cast<std::size_t>(k / 4)] - ee_pose.head<3>();
    joints[k] = 0.8 * std::tanh(map.a[k].dot(rel) + map.c[k]);
  }
  return joints;
}

const std::array<TaskSpec, 20>& task_table() {
  static const std::array<TaskSpec, 20> table = {{
      {'A', {1, 5, 3, 4, 7, 6, 8, 9, 10, 20}, "sponge"},
      {'B', {4, 7, 8, 9, 10, 11, 12, 2}, "cardboard"},
      {'C', {13, 14, 10, 15, 16, 17, 18}, "bottle"},
      {'D', {6, 7, 6, 7, 6, 7}, "sponge"},
      {'E', {5, 8, 9, 10, 15, 19}, "bottle"},
      {'F', {8, 9, 10, 17}, "bottle"},
      {'G', {1, 5, 8, 9}, "bottle"},
      {'H', {15, 16, 15, 12}, "cardboard"},
      {'I', {16, 15, 16, 20}, "sponge"},
      {'J', {9, 10, 17, 20}, "bottle"},
      {'K', {4, 8, 9}, "cardboard"},
      {'L', {13, 14, 17}, "sponge"},
      {'M', {9, 20, 2}, "sponge"},
      {'N', {17, 10, 16}, "sponge"},
      {'O', {10, 17, 19}, "bottle"},
      {'P', {19, 17, 18}, "cardboard"},
      {'Q', {5, 8, 2}, "sponge"},
      {'R', {1, 13, 2}, "bottle"},
      {'S', {18, 10, 20}, "sponge"},
      {'T', {10, 17, 18}, "bottle"},
  }};
  return table;
}

const TaskSpec& task_spec(char id) {
  for (const TaskSpec& t : task_table())
    if (t.id == id) return t;
  throw validate_error(std::string("unknown task id '") + id + "' (expected A..T)");
}

Trace generate_skill(SkillId skill, std::uint64_t seed, const SynthConfig& cfg,
                     const std::string& object_tag) {
  check_skill(skill, "generate_skill");
  World w = make_world(cfg, object_tag, mix_seed(seed, kWorldStream));
  Rng script_rng(mix_seed(seed, kScriptStream));
  apply_precondition(w, skill, script_rng);

  Trace trace;
  trace.meta.id = "skill-" + two_digits(skill) + "-" + kebab(skill_name(skill)) + "-" + object_tag;
  trace.meta.object = object_tag;
  trace.meta.split = "train";
  trace.meta.seed = seed;
  trace.meta.skill = skill;

  int steps = sample_duration(skill, script_rng);
  run_segment(w, skill, steps, script_rng, trace.frames);
  validate_trace(trace);
  return trace;
}

Trace generate_task(char task_id, std::uint64_t seed, const SynthConfig& cfg) {
  const TaskSpec& spec = task_spec(task_id);
  World w = make_world(cfg, spec.object, mix_seed(seed, kWorldStream));
  Rng script_rng(mix_seed(seed, kScriptStream));
  apply_precondition(w, spec.sequence.front(), script_rng);

  Trace trace;
  trace.meta.id = std::string("task-") + task_id;
  trace.meta.object = spec.object;
  trace.meta.split = "tasks";
  trace.meta.seed = seed;
  trace.meta.task = std::string(1, task_id);

  for (SkillId skill : spec.sequence) {
    int steps = sample_duration(skill, script_rng);
    run_segment(w, skill, steps, script_rng, trace.frames);
  }
  validate_trace(trace);
  return trace;
}

Corpus generate_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Corpus corpus;

  auto add_demos = [&](SkillId skill, const std::string& object, std::uint64_t block) {
    for (int d = 0; d < cfg.demos_per_skill; ++d) {
      std::uint64_t demo_seed =
          mix_seed(seed, static_cast<std::uint64_t>(skill) * 1000 + block + static_cast<std::uint64_t>(d));
      Trace t = generate_skill(skill, demo_seed, cfg, object);
      t.meta.id += "-" + two_digits(d);
      corpus.train.traces.push_back(std::move(t));
    }
  };

  for (SkillId skill = 1; skill <= kNumSkills; ++skill) add_demos(skill, "sponge", 0);
  for (SkillId skill : {4, 7, 9}) add_demos(skill, "cardboard", 500);
  add_demos(10, "bottle", 500);

  for (int i = 0; i < 20; ++i) {
    char id = static_cast<char>('A' + i);
    corpus.tasks.traces.push_back(
        generate_task(id, mix_seed(seed, kTaskStream + static_cast<std::uint64_t>(i)), cfg));
  }
  return corpus;
}

nlohmann::ordered_json corpus_manifest(const Corpus& corpus, std::uint64_t seed,
                                       const std::string& train_dir,
                                       const std::string& task_dir) {
  nlohmann::ordered_json manifest;
  manifest["seed"] = seed;
  manifest["counts"] = {{"train_traces", corpus.train.traces.size()},
                        {"train_frames", corpus.train.total_frames()},
                        {"task_traces", corpus.tasks.traces.size()},
                        {"task_frames", corpus.tasks.total_frames()}};

  nlohmann::ordered_json train = nlohmann::ordered_json::array();
  for (const Trace& t : corpus.train.traces) {
    nlohmann::ordered_json row;
    row["id"] = t.meta.id;
    row["file"] = train_dir + "/" + t.meta.id + ".jsonl";
    row["skill"] = t.meta.skill.value_or(0);
    row["skill_name"] = t.meta.skill ? skill_name(*t.meta.skill) : "";
    row["object"] = t.meta.object;
    row["frames"] = t.size();
    if (t.meta.seed) row["seed"] = *t.meta.seed;
    train.push_back(std::move(row));
  }
  manifest["train"] = std::move(train);

  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  for (const Trace& t : corpus.tasks.traces) {
    nlohmann::ordered_json row;
    row["id"] = t.meta.id;
    row["file"] = task_dir + "/" + t.meta.id + ".jsonl";
    row["task"] = t.meta.task.value_or("");
    if (t.meta.task) {
      const TaskSpec& spec = task_spec(t.meta.task->front());
      row["sequence"] = spec.sequence;
    }
    row["object"] = t.meta.object;
    row["frames"] = t.size();
    if (t.meta.seed) row["seed"] = *t.meta.seed;
    tasks.push_back(std::move(row));
  }
  manifest["tasks"] = std::move(tasks);
  return manifest;
}

Trace execute_sequence(const std::map<SkillId, SkillPolicy>& policies,
                       const std::vector<PlanStep>& plan, World& world) {
  if (plan.empty()) throw validate_error("execute_sequence: empty plan");
  for (const PlanStep& p : plan) {
    check_skill(p.skill, "execute_sequence");
    if (p.steps < 1)
      throw validate_error("execute_sequence: plan steps must be >= 1, got " +
                           std::to_string(p.steps));
    if (policies.find(p.skill) == policies.end())
      throw validate_error(std::string("execute_sequence: no policy for skill '") +
                           skill_name(p.skill) + "'");
  }

  Trace trace;
  trace.meta.id = "rollout";
  trace.meta.object = world.object.tag;
  trace.meta.split = "";

  for (const PlanStep& p : plan) {
    const SkillPolicy& policy = policies.at(p.skill);
    for (int s = 0; s < p.steps; ++s) {
      Eigen::VectorXd action = Eigen::VectorXd::Zero(kPolicyActionDim);
      if (!trace.frames.empty())
        action = act(policy, rollout_state(trace.frames, policy.feature_config));
      HapticFrame frame = step(world, action);
      frame.label = p.skill;
      trace.frames.push_back(frame);
    }
  }
  return trace;
}

}  // namespace dexseg
