#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dexseg/common.hpp"
#include "dexseg/trace.hpp"

namespace dexseg {

enum class Activation { Identity, Relu };

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
  Activation act = Activation::Identity;
};

// Plain MLP: relu on hidden layers, identity on the output layer. Softmax is
// applied by the losses / prediction paths, never stored in the net.
struct DenseNet {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols()); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.rows()); }
  std::vector<int> dims() const;
  std::size_t param_count() const;
};

// He-uniform weights from the named deterministic generator, zero biases.
DenseNet init_dense_net(const std::vector<int>& dims, std::uint64_t seed);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[i+1] = layer i output
  std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
};

// Columns are samples. Pass a cache to enable backward().
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& x,
                        ForwardCache* cache = nullptr);

struct NetGrads {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  Eigen::MatrixXd dx;  // gradient wrt the input batch
};

NetGrads backward(const DenseNet& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& upstream);

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad;  // wrt the first argument
};

// Mean of squared differences over all entries; gradient 2*(pred-target)/n.
LossResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);  // per column, stabilized

// Single sample; label is a 1-based SkillId.
LossResult softmax_cross_entropy(const Eigen::VectorXd& logits, SkillId label);
// Batch; labels are 0-based class indices; loss is the batch mean.
LossResult softmax_cross_entropy_batch(const Eigen::MatrixXd& logits,
                                       const std::vector<int>& labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;
};

AdamState make_adam_state(const DenseNet& net);
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
  std::uint64_t seed = 0;
  double lr = 1e-3;
  int batch = 64;
  int epochs = 25;
  bool shuffle = true;

  void validate() const;
  AdamConfig adam() const { return AdamConfig{lr, 0.9, 0.999, 1e-8}; }
};

// ---------------------------------------------------------------------------
// Checkpoint container: one JSON header line followed by the named arrays as
// raw little-endian 64-bit floats (column-major), FNV-1a of the payload in
// the header. Meta keys are merged into the header at top level:
//   {"format":"dexseg-ckpt","version":1,<meta...>,"arrays":[...],"payload_fnv":...}
// "format", "version", "arrays", "payload_fnv" are reserved.

struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  const Eigen::MatrixXd& array(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Net <-> named arrays, prefix.w0 / prefix.b0 / ...
void append_net_arrays(Checkpoint& ckpt, const std::string& prefix, const DenseNet& net);
DenseNet net_from_arrays(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace dexseg
