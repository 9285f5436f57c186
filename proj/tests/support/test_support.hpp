#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "dexseg/neural.hpp"
#include "dexseg/trace.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("dexseg-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Smooth synthetic motion with per-finger variation; label 0 leaves the trace
// unlabeled.
inline dexseg::Trace demo_trace(int n, dexseg::SkillId label = 0,
                                const std::string& id = "demo") {
  dexseg::Trace tr;
  tr.meta.id = id;
  for (int i = 0; i < n; ++i) {
    dexseg::HapticFrame f;
    f.t = 0.1 * i;
    for (int k = 0; k < 6; ++k) f.ee_pose[k] = 0.05 * k + 0.01 * i + 0.003 * std::sin(0.2 * i + k);
    for (int k = 0; k < 16; ++k) f.ah_joints[k] = 0.3 * std::sin(0.15 * i + 0.5 * k);
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 3; ++k) {
        f.fingertip_pos[j][k] =
            0.04 * j + 0.01 * k + 0.005 * std::cos(0.25 * i + 1.3 * j + 0.7 * k);
        f.tactile[j][k] = (j % 2 == 0) ? 0.08 + 0.01 * std::sin(0.3 * i + k) : 0.0;
      }
    if (label > 0) f.label = label;
    tr.frames.push_back(f);
  }
  return tr;
}

// Central-difference gradient checks. ReLU kinks make finite differences
// unreliable when a pre-activation sits within the step of zero, so each
// random case is re-drawn until every pre-activation clears a guard band
// wider than any perturbation can move it.
namespace gradcheck {

constexpr double kStep = 1e-5;
constexpr double kGuard = 2e-4;

inline double rel_err(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

inline double min_relu_preact(const dexseg::DenseNet& net, const dexseg::ForwardCache& cache) {
  double m = 1e300;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].act == dexseg::Activation::Relu)
      m = std::min(m, cache.pre[i].cwiseAbs().minCoeff());
  return m;
}

template <typename LossFn>
double probe_params(std::vector<dexseg::DenseNet*> nets,
                    const std::vector<dexseg::NetGrads>& grads, LossFn&& loss,
                    long* params_checked = nullptr) {
  double max_rel = 0.0;
  auto probe = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + kStep;
    const double lp = loss();
    p = keep - kStep;
    const double lm = loss();
    p = keep;
    const double numeric = (lp - lm) / (2.0 * kStep);
    max_rel = std::max(max_rel, rel_err(analytic, numeric));
    if (params_checked) ++*params_checked;
  };
  for (std::size_t ni = 0; ni < nets.size(); ++ni) {
    for (std::size_t li = 0; li < nets[ni]->layers.size(); ++li) {
      auto& layer = nets[ni]->layers[li];
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
          probe(layer.w(r, c), grads[ni].dw[li](r, c));
      for (Eigen::Index r = 0; r < layer.b.size(); ++r)
        probe(layer.b(r), grads[ni].db[li](r));
    }
  }
  return max_rel;
}

// Shared-encoder objective: window reconstruction MSE plus label
// cross-entropy, both heads fed from one latent. Returns the worst relative
// error over every parameter of all three nets.
inline double joint_loss_max_rel(std::uint64_t seed, long* params_checked = nullptr) {
  using namespace dexseg;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed + 1000 * attempt;
    Rng rng(mix_seed(s, 0xacce97ULL));
    const int in = 6 + static_cast<int>(rng.bounded(5));
    const int hidden = 5 + static_cast<int>(rng.bounded(4));
    const int latent = 4 + static_cast<int>(rng.bounded(3));
    const int classes = 3 + static_cast<int>(rng.bounded(4));
    const int batch = 5 + static_cast<int>(rng.bounded(4));

    DenseNet enc = init_dense_net({in, hidden, latent}, mix_seed(s, 1));
    DenseNet tmp = init_dense_net({latent, hidden, in}, mix_seed(s, 2));
    DenseNet lab = init_dense_net({latent, 5, classes}, mix_seed(s, 3));
    Eigen::MatrixXd x(in, batch), tgt(in, batch);
    for (Eigen::Index c = 0; c < batch; ++c)
      for (Eigen::Index r = 0; r < in; ++r) {
        x(r, c) = rng.uniform(-1.0, 1.0);
        tgt(r, c) = rng.uniform(-1.0, 1.0);
      }
    std::vector<int> labels(batch);
    for (auto& l : labels) l = static_cast<int>(rng.bounded(classes));

    ForwardCache ec, tc, lc;
    Eigen::MatrixXd z = forward(enc, x, &ec);
    LossResult rec = mse_loss(forward(tmp, z, &tc), tgt);
    LossResult ce = softmax_cross_entropy_batch(forward(lab, z, &lc), labels);
    const double guard = std::min({min_relu_preact(enc, ec), min_relu_preact(tmp, tc),
                                   min_relu_preact(lab, lc)});
    if (guard < kGuard && attempt < 50) continue;

    NetGrads gt = backward(tmp, tc, rec.grad);
    NetGrads gl = backward(lab, lc, ce.grad);
    NetGrads ge = backward(enc, ec, gt.dx + gl.dx);

    auto loss = [&]() {
      Eigen::MatrixXd zz = forward(enc, x);
      return mse_loss(forward(tmp, zz), tgt).value +
             softmax_cross_entropy_batch(forward(lab, zz), labels).value;
    };
    return probe_params({&enc, &tmp, &lab}, {ge, gt, gl}, loss, params_checked);
  }
}

// Plain state-to-action regression objective (MSE through one MLP).
inline double regression_loss_max_rel(std::uint64_t seed, long* params_checked = nullptr) {
  using namespace dexseg;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed + 1000 * attempt;
    Rng rng(mix_seed(s, 0xbcbcbcULL));
    const int in = 4 + static_cast<int>(rng.bounded(6));
    const int h1 = 5 + static_cast<int>(rng.bounded(5));
    const int out = 2 + static_cast<int>(rng.bounded(5));
    const int batch = 4 + static_cast<int>(rng.bounded(5));

    DenseNet net = init_dense_net({in, h1, h1, out}, mix_seed(s, 4));
    Eigen::MatrixXd x(in, batch), y(out, batch);
    for (Eigen::Index c = 0; c < batch; ++c) {
      for (Eigen::Index r = 0; r < in; ++r) x(r, c) = rng.uniform(-1.0, 1.0);
      for (Eigen::Index r = 0; r < out; ++r) y(r, c) = rng.uniform(-1.0, 1.0);
    }

    ForwardCache cache;
    LossResult lr = mse_loss(forward(net, x, &cache), y);
    if (min_relu_preact(net, cache) < kGuard && attempt < 50) continue;
    NetGrads g = backward(net, cache, lr.grad);

    auto loss = [&]() { return mse_loss(forward(net, x), y).value; };
    return probe_params({&net}, {g}, loss, params_checked);
  }
}

}  // namespace gradcheck

// Reference matrix exponential: scaling and squaring with a long Taylor
// series, independent of any eigendecomposition.
inline Eigen::Matrix4d matrix_exp_reference(const Eigen::Matrix4d& a) {
  int s = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++s;
  }
  Eigen::Matrix4d x = a / std::pow(2.0, s);
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity();
  for (int k = 1; k <= 30; ++k) {
    term = (term * x) / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

}  // namespace testsupport
