#include <doctest.h>

#include <cmath>
#include <cstring>

#include "dexseg/featurizer.hpp"
#include "test_support.hpp"

using namespace dexseg;
using testsupport::demo_trace;
using testsupport::matrix_exp_reference;

namespace {

Trace two_frame_line() {
  Trace tr;
  for (int i = 0; i < 2; ++i) {
    HapticFrame f;
    f.t = 0.1 * i;
    f.ee_pose[0] = 0.1 * i;
    tr.frames.push_back(f);
  }
  return tr;
}

std::array<std::array<double, 3>, 4> random_points(Rng& rng, double scale = 1.0) {
  std::array<std::array<double, 3>, 4> pts{};
  for (auto& p : pts)
    for (auto& v : p) v = scale * rng.uniform(-1.0, 1.0);
  return pts;
}

}  // namespace

TEST_CASE("two-frame velocity is the one-sided slope at both ends") {
  Velocities v = finite_diff_velocity(two_frame_line());
  CHECK(v.ee_vel(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.ee_vel(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interior velocity is the central difference over actual timestamps") {
  Trace tr;
  double xs[3] = {0.0, 0.1, 0.4};
  for (int i = 0; i < 3; ++i) {
    HapticFrame f;
    f.t = 0.1 * i;
    f.ee_pose[0] = xs[i];
    tr.frames.push_back(f);
  }
  Velocities v = finite_diff_velocity(tr);
  CHECK(v.ee_vel(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.ee_vel(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(v.ee_vel(0, 2) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("finite_diff_velocity needs two frames") {
  Trace tr;
  tr.frames.push_back(HapticFrame{});
  CHECK_THROWS_AS(finite_diff_velocity(tr), Error);
}

TEST_CASE("ee_direction thresholds componentwise with strict comparisons") {
  FeatureConfig cfg;
  Eigen::Matrix<double, 6, 1> v;
  v << 0.05, -0.03, 0.0, 0.0, 0.0, 0.0;
  Eigen::Matrix<double, 6, 1> d = ee_direction(v, cfg);
  CHECK(d(0) == 1.0);
  CHECK(d(1) == -1.0);
  for (int k = 2; k < 6; ++k) CHECK(d(k) == 0.0);

  v.setZero();
  v(0) = 0.02;
  v(1) = -0.02;
  d = ee_direction(v, cfg);
  CHECK(d(0) == 0.0);
  CHECK(d(1) == 0.0);
  v(0) = std::nextafter(0.02, 1.0);
  CHECK(ee_direction(v, cfg)(0) == 1.0);
}

TEST_CASE("ee_direction is odd") {
  FeatureConfig cfg;
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix<double, 6, 1> v;
    for (int k = 0; k < 6; ++k) v(k) = rng.uniform(-0.1, 0.1);
    CHECK(ee_direction(Eigen::Matrix<double, 6, 1>(-v), cfg) == -ee_direction(v, cfg));
  }
}

TEST_CASE("tactile_norm is the euclidean norm") {
  CHECK(tactile_norm(Eigen::Vector3d(3, 4, 0)) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(tactile_norm(Eigen::Vector3d(1, 2, 2)) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(tactile_norm(Eigen::Vector3d::Zero()) == 0.0);
}

TEST_CASE("tactile_norm scales with the absolute scalar") {
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d f(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double s = rng.uniform(-3, 3);
    CHECK(tactile_norm(s * f) == doctest::Approx(std::abs(s) * tactile_norm(f)).epsilon(1e-12));
  }
}

TEST_CASE("contact_status is strict at the threshold") {
  FeatureConfig cfg;
  CHECK(contact_status(0.1, cfg) == 0);
  CHECK(contact_status(std::nextafter(0.1, 1.0), cfg) == 1);
  CHECK(contact_status(0.0999, cfg) == 0);
  CHECK(contact_status(5.0, cfg) == 1);
}

TEST_CASE("coordinate-constant fingertips give the pure-regularizer log") {
  // Each finger's three coordinates are its samples, so a finger sitting on
  // the x=y=z diagonal contributes zero variance no matter where it sits.
  std::array<std::array<double, 3>, 4> pts{{{0.3, 0.3, 0.3},
                                            {-0.1, -0.1, -0.1},
                                            {0.7, 0.7, 0.7},
                                            {0.05, 0.05, 0.05}}};
  const double eps = 1e-6;
  std::array<double, 10> triu = cov_log_triu(pts, eps);
  Eigen::Matrix4d m = from_upper_triangle(triu);
  const double lneps = std::log(eps);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(m(i, j) == doctest::Approx(i == j ? lneps : 0.0).epsilon(1e-12));
}

TEST_CASE("the log of a scaled identity is exactly computable") {
  const double eps = 1e-6;
  Eigen::Matrix4d m = (std::exp(1.0) - eps) * Eigen::Matrix4d::Identity();
  Eigen::Matrix4d l = spd_log(m, eps);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(l(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("upper triangle round-trips a symmetric matrix") {
  Rng rng(41);
  Eigen::Matrix4d a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = rng.uniform(-1, 1);
  Eigen::Matrix4d sym = 0.5 * (a + a.transpose());
  CHECK(from_upper_triangle(upper_triangle(sym)) == sym);
}

TEST_CASE("matrix exp recovers the regularized covariance from its log") {
  const double eps = 1e-6;
  Rng rng(43);
  for (int i = 0; i < 25; ++i) {
    auto pts = random_points(rng, 0.5);
    Eigen::Matrix4d target =
        fingertip_covariance(pts) + eps * Eigen::Matrix4d::Identity();
    Eigen::Matrix4d logm = from_upper_triangle(cov_log_triu(pts, eps));
    Eigen::Matrix4d back = matrix_exp_reference(logm);
    CHECK((back - target).norm() <= 1e-8);
  }
}

TEST_CASE("relabeling fingertips permutes the covariance log consistently") {
  const double eps = 1e-6;
  Rng rng(47);
  int perm[4] = {2, 0, 3, 1};
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_points(rng);
    std::array<std::array<double, 3>, 4> shuffled;
    for (int i = 0; i < 4; ++i) shuffled[i] = pts[perm[i]];
    Eigen::Matrix4d a = from_upper_triangle(cov_log_triu(pts, eps));
    Eigen::Matrix4d b = from_upper_triangle(cov_log_triu(shuffled, eps));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(b(i, j) == doctest::Approx(a(perm[i], perm[j])).epsilon(1e-9));
  }
}

TEST_CASE("tactile smoothing truncates its window at trace edges") {
  FeatureConfig cfg;
  Trace tr;
  for (int i = 0; i < 8; ++i) {
    HapticFrame f;
    f.t = 0.1 * i;
    f.tactile[0][0] = static_cast<double>(i);
    tr.frames.push_back(f);
  }
  Eigen::MatrixXd sm = smooth_tactile(tr, cfg);
  CHECK(sm(0, 0) == doctest::Approx(1.0).epsilon(1e-12));   // frames 0..2
  CHECK(sm(0, 4) == doctest::Approx(4.0).epsilon(1e-12));   // frames 2..6
  CHECK(sm(0, 7) == doctest::Approx(6.0).epsilon(1e-12));   // frames 5..7
  CHECK(sm(1, 3) == 0.0);
}

TEST_CASE("feature dimensions are fixed per kind") {
  CHECK(feature_dim(FeatureKind::Engineered) == 86);
  CHECK(feature_dim(FeatureKind::Raw) == 38);
  CHECK(feature_dim(FeatureKind::Calculated) == 64);
}

TEST_CASE("the engineered layout starts at ee_pose and ends at contact") {
  auto layout = feature_layout(FeatureKind::Engineered);
  REQUIRE(!layout.empty());
  CHECK(layout.front().name == "ee_pose");
  CHECK(layout.front().offset == 0);
  CHECK(layout.front().arity == 6);
  CHECK(layout.back().name == "contact");
  CHECK(layout.back().offset + layout.back().arity == 86);
  int sum = 0;
  for (const auto& c : layout) {
    CHECK(c.offset == sum);
    sum += c.arity;
  }
  CHECK(sum == 86);
}

TEST_CASE("layout strings and hashes distinguish the kinds") {
  std::string s = feature_layout_string(FeatureKind::Engineered);
  CHECK(s.rfind("ee_pose:0:6|", 0) == 0);
  CHECK(feature_layout_hash(FeatureKind::Engineered) ==
        feature_layout_hash(FeatureKind::Engineered));
  CHECK(feature_layout_hash(FeatureKind::Engineered) != feature_layout_hash(FeatureKind::Raw));
  CHECK(feature_layout_hash(FeatureKind::Raw) != feature_layout_hash(FeatureKind::Calculated));
  CHECK(feature_layout_hash(FeatureKind::Engineered).size() == 16);
}

TEST_CASE("featurize is a pure function of its inputs") {
  FeatureConfig cfg;
  Trace tr = demo_trace(30, 5);
  Eigen::MatrixXd a = featurize(tr, cfg, FeatureKind::Engineered);
  Eigen::MatrixXd b = featurize(tr, cfg, FeatureKind::Engineered);
  REQUIRE(a.rows() == 86);
  REQUIRE(a.cols() == 30);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("a stationary contact-free trace has zero motion features") {
  FeatureConfig cfg;
  Trace tr;
  for (int i = 0; i < 10; ++i) {
    HapticFrame f;
    f.t = 0.1 * i;
    f.ee_pose = {0.2, 0.1, 0.3, 0.0, 0.0, 0.0};
    for (int j = 0; j < 4; ++j) f.fingertip_pos[j] = {0.1 * j, 0.05, 0.2};
    tr.frames.push_back(f);
  }
  Eigen::MatrixXd feats = featurize(tr, cfg, FeatureKind::Engineered);
  auto layout = feature_layout(FeatureKind::Engineered);
  for (const auto& comp : layout) {
    if (comp.name != "ee_vel" && comp.name != "ee_dir" && comp.name != "fingertip_vel" &&
        comp.name != "tactile_norm" && comp.name != "contact")
      continue;
    for (int r = comp.offset; r < comp.offset + comp.arity; ++r)
      for (Eigen::Index c = 0; c < feats.cols(); ++c) CHECK(feats(r, c) == 0.0);
  }
}

TEST_CASE("normalization zeroes constant dimensions and standardizes the rest") {
  FeatureConfig cfg;
  Dataset ds;
  ds.traces.push_back(demo_trace(40, 1, "a"));
  ds.traces.push_back(demo_trace(35, 2, "b"));
  auto feats = featurize_dataset(ds, cfg, FeatureKind::Engineered, 1);
  NormStats stats = fit_norm_stats(feats);
  REQUIRE(stats.dim() == 86);
  for (int i = 0; i < stats.dim(); ++i) CHECK(stats.std(i) >= kStdFloor);

  auto normalized = feats;
  for (auto& m : normalized) apply_norm(m, stats);

  const double total = 75.0;
  for (int r = 0; r < 86; ++r) {
    double sum = 0.0, sq = 0.0;
    for (const auto& m : normalized)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        sum += m(r, c);
        sq += m(r, c) * m(r, c);
      }
    double mean = sum / total;
    CHECK(std::abs(mean) < 1e-9);
    if (stats.std(r) > kStdFloor) {
      CHECK(sq / total == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      CHECK(sq == 0.0);
    }
  }
}

TEST_CASE("threaded featurization matches the sequential result") {
  FeatureConfig cfg;
  Dataset ds;
  for (int i = 0; i < 5; ++i)
    ds.traces.push_back(demo_trace(20 + i, 1 + i, "t" + std::to_string(i)));
  auto seq = featurize_dataset(ds, cfg, FeatureKind::Calculated, 1);
  auto par = featurize_dataset(ds, cfg, FeatureKind::Calculated, 4);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i)
    CHECK(std::memcmp(seq[i].data(), par[i].data(), sizeof(double) * seq[i].size()) == 0);
}

TEST_CASE("feature config serializes and validates") {
  FeatureConfig cfg;
  cfg.contact_threshold = 0.2;
  FeatureConfig back = feature_config_from_json(feature_config_to_json(cfg));
  CHECK(back.contact_threshold == 0.2);
  CHECK(back.ee_dir_threshold == cfg.ee_dir_threshold);
  CHECK(back.tactile_smoothing_window == cfg.tactile_smoothing_window);

  FeatureConfig bad;
  bad.tactile_smoothing_window = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = FeatureConfig{};
  bad.contact_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
