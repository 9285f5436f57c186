#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexseg/trace.hpp"

namespace dexseg {

struct FeatureConfig {
  double ee_dir_threshold = 0.02;   // m/s translation, rad/s rotation
  double contact_threshold = 0.1;   // force-norm units
  double cov_regularizer = 1e-6;
  int tactile_smoothing_window = 5; // centered moving average, odd
  int direction_axes = 6;

  void validate() const;
};

nlohmann::ordered_json feature_config_to_json(const FeatureConfig& cfg);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

// Which slice of the engineered pipeline a model consumes.
enum class FeatureKind { Engineered, Raw, Calculated };

const char* feature_kind_name(FeatureKind kind);
FeatureKind feature_kind_from_name(const std::string& name);

struct FeatureComponent {
  std::string name;
  int offset = 0;
  int arity = 0;
};

// Fixed component order for a kind; offsets are cumulative.
std::vector<FeatureComponent> feature_layout(FeatureKind kind);
int feature_dim(FeatureKind kind);  // 86 / 38 / 64 under defaults

// Canonical string "name:offset:arity|..." and its FNV-1a hash; the hash is
// embedded in checkpoints to reject incompatible feature layouts.
std::string feature_layout_string(FeatureKind kind);
std::string feature_layout_hash(FeatureKind kind);

// Per-dimension z-score statistics with a floor on the std.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  int dim() const { return static_cast<int>(mean.size()); }
};

inline constexpr double kStdFloor = 1e-8;

// Central differences at interior frames, one-sided at the ends.
struct Velocities {
  Eigen::MatrixXd ee_vel;        // 6 x n
  Eigen::MatrixXd fingertip_vel; // 12 x n
};
Velocities finite_diff_velocity(const Trace& trace);

// Per-component ternary direction with strict comparisons against the
// threshold: 1 if v > th, -1 if v < -th, else 0.
Eigen::Matrix<double, 6, 1> ee_direction(const Eigen::Matrix<double, 6, 1>& v,
                                         const FeatureConfig& cfg);

double tactile_norm(const Eigen::Vector3d& f);

// 1 iff the smoothed force norm strictly exceeds the contact threshold.
int contact_status(double smoothed_norm, const FeatureConfig& cfg);

// log(M + eps*I) via symmetric eigendecomposition, upper triangle row-major.
// M must be symmetric; the regularized matrix must be positive definite.
Eigen::Matrix4d spd_log(const Eigen::Matrix4d& m, double eps);
std::array<double, 10> upper_triangle(const Eigen::Matrix4d& m);
Eigen::Matrix4d from_upper_triangle(const std::array<double, 10>& triu);

// 4x4 finger-by-finger covariance: entry (i,j) is the covariance of finger
// i's and finger j's coordinates treated as 3 paired samples (population
// normalization).
Eigen::Matrix4d fingertip_covariance(const std::array<std::array<double, 3>, 4>& points);

std::array<double, 10> cov_log_triu(const std::array<std::array<double, 3>, 4>& points,
                                    double eps);

// Centered moving average of the 4x3 tactile signal; the window is truncated
// at trace edges.
Eigen::MatrixXd smooth_tactile(const Trace& trace, const FeatureConfig& cfg); // 12 x n

// One column per frame, rows laid out per feature_layout(kind).
Eigen::MatrixXd featurize(const Trace& trace, const FeatureConfig& cfg,
                          FeatureKind kind = FeatureKind::Engineered);

std::vector<Eigen::MatrixXd> featurize_dataset(const Dataset& ds, const FeatureConfig& cfg,
                                               FeatureKind kind, int threads = 1);

NormStats fit_norm_stats(const std::vector<Eigen::MatrixXd>& features);
void apply_norm(Eigen::MatrixXd& features, const NormStats& stats);

void write_feature_layout_json(FeatureKind kind, const std::string& path);

}  // namespace dexseg
