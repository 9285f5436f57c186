#include "dexseg/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

using nlohmann::json;

namespace dexseg {

std::vector<int> DenseNet::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers) d.push_back(static_cast<int>(l.w.rows()));
  return d;
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

DenseNet init_dense_net(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw validate_error("init_dense_net: need at least 2 dims");
  for (int d : dims)
    if (d <= 0) throw validate_error("init_dense_net: non-positive layer dim");

  Rng rng(mix_seed(seed, 0x6e65740aULL));
  DenseNet net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.w.resize(dims[l + 1], dims[l]);
    double limit = std::sqrt(6.0 / static_cast<double>(dims[l]));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        layer.w(r, c) = rng.uniform(-limit, limit);
    layer.b = Eigen::VectorXd::Zero(dims[l + 1]);
    layer.act = (l + 2 < dims.size()) ? Activation::Relu : Activation::Identity;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
  if (net.layers.empty()) throw validate_error("forward: empty net");
  if (x.rows() != net.input_dim())
    throw validate_error("forward: input arity " + std::to_string(x.rows()) +
                         " does not match net input dim " + std::to_string(net.input_dim()));
  if (cache) {
    cache->acts.clear();
    cache->pre.clear();
    cache->acts.push_back(x);
  }
  Eigen::MatrixXd a = x;
  for (const auto& layer : net.layers) {
    Eigen::MatrixXd z = (layer.w * a).colwise() + layer.b;
    if (cache) cache->pre.push_back(z);
    a = (layer.act == Activation::Relu) ? z.cwiseMax(0.0) : z;
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

NetGrads backward(const DenseNet& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& upstream) {
  const std::size_t nl = net.layers.size();
  if (cache.pre.size() != nl || cache.acts.size() != nl + 1)
    throw validate_error("backward: cache does not match net (stale cache?)");
  if (upstream.rows() != net.output_dim() || upstream.cols() != cache.acts.back().cols())
    throw validate_error("backward: upstream gradient shape mismatch");

  NetGrads g;
  g.dw.resize(nl);
  g.db.resize(nl);
  Eigen::MatrixXd grad = upstream;
  for (std::size_t i = nl; i-- > 0;) {
    const DenseLayer& layer = net.layers[i];
    if (layer.act == Activation::Relu)
      grad = grad.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
    g.dw[i] = grad * cache.acts[i].transpose();
    g.db[i] = grad.rowwise().sum();
    grad = layer.w.transpose() * grad;
  }
  g.dx = std::move(grad);
  return g;
}

LossResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw validate_error("mse_loss: arity mismatch");
  const double n = static_cast<double>(pred.size());
  Eigen::MatrixXd diff = pred - target;
  LossResult r;
  r.value = diff.squaredNorm() / n;
  r.grad = (2.0 / n) * diff;
  return r;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Eigen::VectorXd col = logits.col(c);
    double mx = col.maxCoeff();
    Eigen::VectorXd e = (col.array() - mx).exp();
    p.col(c) = e / e.sum();
  }
  return p;
}

LossResult softmax_cross_entropy(const Eigen::VectorXd& logits, SkillId label) {
  check_skill(label);
  std::vector<int> idx{label - 1};
  Eigen::MatrixXd m = logits;
  if (logits.size() != kNumSkills)
    throw validate_error("softmax_cross_entropy: expected 20 logits");
  return softmax_cross_entropy_batch(m, idx);
}

LossResult softmax_cross_entropy_batch(const Eigen::MatrixXd& logits,
                                       const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
    throw validate_error("softmax_cross_entropy: label count mismatch");
  const double inv_b = 1.0 / static_cast<double>(logits.cols());
  LossResult r;
  r.grad = softmax(logits);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    int k = labels[c];
    if (k < 0 || k >= logits.rows())
      throw validate_error("softmax_cross_entropy: class index out of range");
    // -log p computed from the stabilized form to avoid log(0) rounding.
    double mx = logits.col(c).maxCoeff();
    double lse = std::log((logits.col(c).array() - mx).exp().sum());
    loss += -(logits(k, c) - mx - lse);
    r.grad(k, c) -= 1.0;
  }
  r.grad *= inv_b;
  r.value = loss * inv_b;
  return r;
}

AdamState make_adam_state(const DenseNet& net) {
  AdamState s;
  for (const auto& l : net.layers) {
    s.mw.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    s.vw.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    s.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return s;
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.dw.size() != net.layers.size() || state.mw.size() != net.layers.size())
    throw validate_error("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    if (grads.dw[i].rows() != l.w.rows() || grads.dw[i].cols() != l.w.cols())
      throw validate_error("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    state.mw[i] = cfg.beta1 * state.mw[i] + (1.0 - cfg.beta1) * grads.dw[i];
    state.vw[i] = cfg.beta2 * state.vw[i].array().matrix() +
                  (1.0 - cfg.beta2) * grads.dw[i].array().square().matrix();
    state.mb[i] = cfg.beta1 * state.mb[i] + (1.0 - cfg.beta1) * grads.db[i];
    state.vb[i] = cfg.beta2 * state.vb[i].array().matrix() +
                  (1.0 - cfg.beta2) * grads.db[i].array().square().matrix();
    l.w.array() -= cfg.lr * (state.mw[i].array() / bc1) /
                   ((state.vw[i].array() / bc2).sqrt() + cfg.eps);
    l.b.array() -= cfg.lr * (state.mb[i].array() / bc1) /
                   ((state.vb[i].array() / bc2).sqrt() + cfg.eps);
  }
}

void TrainConfig::validate() const {
  if (lr <= 0) throw validate_error("train config: lr must be > 0");
  if (batch < 1) throw validate_error("train config: batch must be >= 1");
  if (epochs < 1) throw validate_error("train config: epochs must be >= 1");
}

// --------------------------------------------------------------------------

const Eigen::MatrixXd& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw layout_error("checkpoint array '" + name + "' not found");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string payload;
  json manifest = json::array();
  for (const auto& [name, m] : ckpt.arrays) {
    manifest.push_back({{"name", name},
                        {"rows", m.rows()},
                        {"cols", m.cols()}});
    std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
    std::size_t off = payload.size();
    payload.resize(off + bytes);
    std::memcpy(payload.data() + off, m.data(), bytes);
  }
  json header = {{"format", "dexseg-ckpt"}, {"version", 1}};
  for (const auto& [key, value] : ckpt.meta.items()) {
    if (key == "format" || key == "version" || key == "arrays" || key == "payload_fnv")
      throw validate_error("checkpoint meta may not use reserved key '" + key + "'");
    header[key] = value;
  }
  header["arrays"] = manifest;
  header["payload_fnv"] = hex64(fnv1a64(payload.data(), payload.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw parse_error("corrupt checkpoint: missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw parse_error(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (!header.contains("format") || header["format"] != "dexseg-ckpt")
    throw parse_error("not a dexseg checkpoint");
  if (header["version"].get<int>() != 1)
    throw parse_error("unsupported checkpoint version");

  std::size_t expected = 0;
  for (const auto& a : header["arrays"])
    expected += sizeof(double) * a["rows"].get<std::size_t>() * a["cols"].get<std::size_t>();

  std::string payload(expected, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected)
    throw parse_error("corrupt checkpoint: truncated payload");
  if (hex64(fnv1a64(payload.data(), payload.size())) !=
      header["payload_fnv"].get<std::string>())
    throw parse_error("corrupt checkpoint: payload hash mismatch");

  Checkpoint ckpt;
  ckpt.meta = json::object();
  for (const auto& [key, value] : header.items()) {
    if (key == "format" || key == "version" || key == "arrays" || key == "payload_fnv") continue;
    ckpt.meta[key] = value;
  }
  std::size_t off = 0;
  for (const auto& a : header["arrays"]) {
    Eigen::MatrixXd m(a["rows"].get<Eigen::Index>(), a["cols"].get<Eigen::Index>());
    std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
    std::memcpy(m.data(), payload.data() + off, bytes);
    off += bytes;
    ckpt.arrays.emplace_back(a["name"].get<std::string>(), std::move(m));
  }
  return ckpt;
}

void append_net_arrays(Checkpoint& ckpt, const std::string& prefix, const DenseNet& net) {
  json spec = json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    spec.push_back({{"in", l.w.cols()},
                    {"out", l.w.rows()},
                    {"act", l.act == Activation::Relu ? "relu" : "identity"}});
    ckpt.arrays.emplace_back(prefix + ".w" + std::to_string(i), l.w);
    ckpt.arrays.emplace_back(prefix + ".b" + std::to_string(i), l.b);
  }
  ckpt.meta["nets"][prefix] = spec;
}

DenseNet net_from_arrays(const Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.meta.contains("nets") || !ckpt.meta["nets"].contains(prefix))
    throw layout_error("checkpoint has no net '" + prefix + "'");
  DenseNet net;
  const json& spec = ckpt.meta["nets"][prefix];
  for (std::size_t i = 0; i < spec.size(); ++i) {
    DenseLayer layer;
    layer.w = ckpt.array(prefix + ".w" + std::to_string(i));
    layer.b = ckpt.array(prefix + ".b" + std::to_string(i));
    layer.act = spec[i]["act"] == "relu" ? Activation::Relu : Activation::Identity;
    if (layer.w.rows() != spec[i]["out"].get<Eigen::Index>() ||
        layer.w.cols() != spec[i]["in"].get<Eigen::Index>())
      throw layout_error("checkpoint net '" + prefix + "' shape mismatch");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace dexseg
