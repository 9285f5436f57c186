#include "dexseg/featurizer.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

using nlohmann::json;

namespace dexseg {

void FeatureConfig::validate() const {
  if (ee_dir_threshold <= 0 || contact_threshold <= 0 || cov_regularizer <= 0)
    throw validate_error("feature config thresholds must be positive");
  if (tactile_smoothing_window < 1 || tactile_smoothing_window % 2 == 0)
    throw validate_error("tactile smoothing window must be odd and >= 1");
  if (direction_axes != 6)
    throw validate_error("direction_axes must be 6");
}

nlohmann::ordered_json feature_config_to_json(const FeatureConfig& cfg) {
  return {{"ee_dir_threshold", cfg.ee_dir_threshold},
          {"contact_threshold", cfg.contact_threshold},
          {"cov_regularizer", cfg.cov_regularizer},
          {"tactile_smoothing_window", cfg.tactile_smoothing_window},
          {"direction_axes", cfg.direction_axes}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig cfg;
  try {
    cfg.ee_dir_threshold = j.at("ee_dir_threshold").get<double>();
    cfg.contact_threshold = j.at("contact_threshold").get<double>();
    cfg.cov_regularizer = j.at("cov_regularizer").get<double>();
    cfg.tactile_smoothing_window = j.at("tactile_smoothing_window").get<int>();
    cfg.direction_axes = j.at("direction_axes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("feature config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

const char* feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Engineered: return "engineered";
    case FeatureKind::Raw: return "raw";
    case FeatureKind::Calculated: return "calculated";
  }
  return "?";
}

FeatureKind feature_kind_from_name(const std::string& name) {
  if (name == "engineered") return FeatureKind::Engineered;
  if (name == "raw") return FeatureKind::Raw;
  if (name == "calculated") return FeatureKind::Calculated;
  throw domain_error("unknown feature kind '" + name + "'");
}

std::vector<FeatureComponent> feature_layout(FeatureKind kind) {
  std::vector<FeatureComponent> layout;
  int off = 0;
  auto add = [&](const char* name, int arity) {
    layout.push_back({name, off, arity});
    off += arity;
  };
  switch (kind) {
    case FeatureKind::Engineered:
      add("ee_pose", 6);
      add("ee_vel", 6);
      add("ee_dir", 6);
      add("ah_joints", 16);
      add("fingertip_pos", 12);
      add("fingertip_vel", 12);
      add("pos_cov_logtriu", 10);
      add("vel_cov_logtriu", 10);
      add("tactile_norm", 4);
      add("contact", 4);
      break;
    case FeatureKind::Raw:
      add("ee_pose", 6);
      add("ah_joints", 16);
      add("tactile", 12);
      add("contact", 4);
      break;
    case FeatureKind::Calculated:
      add("ee_vel", 6);
      add("ee_dir", 6);
      add("fingertip_pos", 12);
      add("fingertip_vel", 12);
      add("pos_cov_logtriu", 10);
      add("vel_cov_logtriu", 10);
      add("tactile_norm", 4);
      add("contact", 4);
      break;
  }
  return layout;
}

int feature_dim(FeatureKind kind) {
  int dim = 0;
  for (const auto& c : feature_layout(kind)) dim += c.arity;
  return dim;
}

std::string feature_layout_string(FeatureKind kind) {
  std::string s;
  for (const auto& c : feature_layout(kind)) {
    if (!s.empty()) s += '|';
    s += c.name + ":" + std::to_string(c.offset) + ":" + std::to_string(c.arity);
  }
  return s;
}

std::string feature_layout_hash(FeatureKind kind) {
  return hex64(fnv1a64(feature_layout_string(kind)));
}

Velocities finite_diff_velocity(const Trace& trace) {
  const std::size_t n = trace.frames.size();
  if (n < 2) throw validate_error("finite_diff_velocity: trace needs >= 2 frames");
  Velocities v;
  v.ee_vel.setZero(6, n);
  v.fingertip_vel.setZero(12, n);

  auto pose = [&](std::size_t i, int k) { return trace.frames[i].ee_pose[k]; };
  auto tip = [&](std::size_t i, int k) {
    return trace.frames[i].fingertip_pos[k / 3][k % 3];
  };

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i == 0 ? 0 : i - 1;
    std::size_t hi = i + 1 == n ? i : i + 1;
    double dt = trace.frames[hi].t - trace.frames[lo].t;
    for (int k = 0; k < 6; ++k) v.ee_vel(k, i) = (pose(hi, k) - pose(lo, k)) / dt;
    for (int k = 0; k < 12; ++k) v.fingertip_vel(k, i) = (tip(hi, k) - tip(lo, k)) / dt;
  }
  return v;
}

Eigen::Matrix<double, 6, 1> ee_direction(const Eigen::Matrix<double, 6, 1>& v,
                                         const FeatureConfig& cfg) {
  Eigen::Matrix<double, 6, 1> d;
  for (int k = 0; k < 6; ++k) {
    if (v(k) > cfg.ee_dir_threshold)
      d(k) = 1.0;
    else if (v(k) < -cfg.ee_dir_threshold)
      d(k) = -1.0;
    else
      d(k) = 0.0;
  }
  return d;
}

double tactile_norm(const Eigen::Vector3d& f) { return f.norm(); }

int contact_status(double smoothed_norm, const FeatureConfig& cfg) {
  return smoothed_norm > cfg.contact_threshold ? 1 : 0;
}

Eigen::Matrix4d spd_log(const Eigen::Matrix4d& m, double eps) {
  if (!m.allFinite()) throw validate_error("spd_log: non-finite input");
  Eigen::Matrix4d reg = m + eps * Eigen::Matrix4d::Identity();
  if (reg.isDiagonal(0.0)) {
    if ((reg.diagonal().array() <= 0.0).any())
      throw domain_error("spd_log: regularized matrix is not positive definite");
    Eigen::Matrix4d out = Eigen::Matrix4d::Zero();
    out.diagonal() = reg.diagonal().array().log();
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(reg);
  if (es.info() != Eigen::Success)
    throw domain_error("spd_log: eigendecomposition failed on degenerate input");
  Eigen::Vector4d ev = es.eigenvalues();
  if ((ev.array() <= 0.0).any())
    throw domain_error("spd_log: regularized matrix is not positive definite");
  Eigen::Vector4d logev = ev.array().log();
  return es.eigenvectors() * logev.asDiagonal() * es.eigenvectors().transpose();
}

std::array<double, 10> upper_triangle(const Eigen::Matrix4d& m) {
  std::array<double, 10> out{};
  int k = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) out[k++] = m(i, j);
  return out;
}

Eigen::Matrix4d from_upper_triangle(const std::array<double, 10>& triu) {
  Eigen::Matrix4d m;
  int k = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      m(i, j) = triu[k];
      m(j, i) = triu[k];
      ++k;
    }
  return m;
}

Eigen::Matrix4d fingertip_covariance(const std::array<std::array<double, 3>, 4>& points) {
  // Rows: fingers; the 3 coordinates of each finger are the paired samples.
  Eigen::Matrix<double, 4, 3> x;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) x(i, k) = points[i][k];
  Eigen::Vector4d mean = x.rowwise().mean();
  x.colwise() -= mean;
  return (x * x.transpose()) / 3.0;
}

std::array<double, 10> cov_log_triu(const std::array<std::array<double, 3>, 4>& points,
                                    double eps) {
  return upper_triangle(spd_log(fingertip_covariance(points), eps));
}

Eigen::MatrixXd smooth_tactile(const Trace& trace, const FeatureConfig& cfg) {
  const std::size_t n = trace.frames.size();
  const int half = cfg.tactile_smoothing_window / 2;
  Eigen::MatrixXd out(12, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i >= static_cast<std::size_t>(half) ? i - half : 0;
    std::size_t hi = std::min(n - 1, i + half);
    for (int k = 0; k < 12; ++k) {
      double sum = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) sum += trace.frames[j].tactile[k / 3][k % 3];
      out(k, i) = sum / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

Eigen::MatrixXd featurize(const Trace& trace, const FeatureConfig& cfg, FeatureKind kind) {
  cfg.validate();
  validate_trace(trace);
  const std::size_t n = trace.frames.size();
  const int dim = feature_dim(kind);

  Velocities vel = finite_diff_velocity(trace);
  Eigen::MatrixXd tact = smooth_tactile(trace, cfg);

  Eigen::MatrixXd out(dim, n);
  for (std::size_t i = 0; i < n; ++i) {
    const HapticFrame& f = trace.frames[i];
    Eigen::Vector4d norms;
    for (int k = 0; k < 4; ++k) norms(k) = tact.col(i).segment<3>(3 * k).norm();
    Eigen::Vector4d contact;
    for (int k = 0; k < 4; ++k) contact(k) = contact_status(norms(k), cfg);

    int r = 0;
    auto put = [&](const double* v, int m) {
      for (int k = 0; k < m; ++k) out(r++, i) = v[k];
    };

    if (kind == FeatureKind::Raw) {
      put(f.ee_pose.data(), 6);
      put(f.ah_joints.data(), 16);
      put(tact.col(i).data(), 12);
      put(contact.data(), 4);
      continue;
    }

    Eigen::Matrix<double, 6, 1> dir = ee_direction(vel.ee_vel.col(i), cfg);
    std::array<std::array<double, 3>, 4> tips_v;
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 3; ++k) tips_v[j][k] = vel.fingertip_vel(3 * j + k, i);
    std::array<double, 10> pos_cov = cov_log_triu(f.fingertip_pos, cfg.cov_regularizer);
    std::array<double, 10> vel_cov = cov_log_triu(tips_v, cfg.cov_regularizer);

    if (kind == FeatureKind::Engineered) put(f.ee_pose.data(), 6);
    put(vel.ee_vel.col(i).data(), 6);
    put(dir.data(), 6);
    if (kind == FeatureKind::Engineered) put(f.ah_joints.data(), 16);
    for (int j = 0; j < 4; ++j) put(f.fingertip_pos[j].data(), 3);
    put(vel.fingertip_vel.col(i).data(), 12);
    put(pos_cov.data(), 10);
    put(vel_cov.data(), 10);
    put(norms.data(), 4);
    put(contact.data(), 4);
  }
  return out;
}

std::vector<Eigen::MatrixXd> featurize_dataset(const Dataset& ds, const FeatureConfig& cfg,
                                               FeatureKind kind, int threads) {
  std::vector<Eigen::MatrixXd> out(ds.traces.size());
  if (threads <= 1 || ds.traces.size() < 2) {
    for (std::size_t i = 0; i < ds.traces.size(); ++i)
      out[i] = featurize(ds.traces[i], cfg, kind);
    return out;
  }
  // Results are merged by index, so worker count does not affect output.
  std::vector<std::thread> pool;
  std::size_t nw = std::min<std::size_t>(threads, ds.traces.size());
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < ds.traces.size(); i += nw)
        out[i] = featurize(ds.traces[i], cfg, kind);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

NormStats fit_norm_stats(const std::vector<Eigen::MatrixXd>& features) {
  if (features.empty()) throw validate_error("fit_norm_stats: empty input");
  const int dim = static_cast<int>(features.front().rows());
  std::size_t total = 0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& m : features) {
    if (m.rows() != dim) throw validate_error("fit_norm_stats: inconsistent dims");
    sum += m.rowwise().sum();
    total += m.cols();
  }
  if (total == 0) throw validate_error("fit_norm_stats: no frames");

  NormStats stats;
  stats.mean = sum / static_cast<double>(total);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (const auto& m : features)
    sq += (m.colwise() - stats.mean).array().square().matrix().rowwise().sum();
  stats.std = (sq / static_cast<double>(total)).array().sqrt().max(kStdFloor);
  return stats;
}

void apply_norm(Eigen::MatrixXd& features, const NormStats& stats) {
  if (features.rows() != stats.mean.size())
    throw layout_error("apply_norm: dimension mismatch");
  features = (features.colwise() - stats.mean).array().colwise() / stats.std.array();
}

void write_feature_layout_json(FeatureKind kind, const std::string& path) {
  json comps = json::array();
  for (const auto& c : feature_layout(kind))
    comps.push_back({{"name", c.name}, {"offset", c.offset}, {"arity", c.arity}});
  json doc = {{"kind", feature_kind_name(kind)},
              {"dim", feature_dim(kind)},
              {"layout_hash", feature_layout_hash(kind)},
              {"components", comps}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace dexseg
