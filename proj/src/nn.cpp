#include "adac/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adac::nn {

namespace {

struct LayerView {
  std::int64_t weight_offset;
  std::int64_t bias_offset;
  int in;
  int out;
};

// Linear layers in forward order with offsets into the flat parameter vector.
std::vector<LayerView> layer_views(const NetSpec& spec) {
  std::vector<std::pair<int, int>> dims;
  if (spec.architecture == Architecture::kPlainMlp) {
    for (std::size_t k = 0; k + 1 < spec.layer_widths.size(); ++k)
      dims.emplace_back(spec.layer_widths[k], spec.layer_widths[k + 1]);
  } else {
    int in = spec.layer_widths[0], d = spec.layer_widths[1], out = spec.layer_widths[2];
    dims.emplace_back(in, d);
    for (int b = 0; b < spec.block_count; ++b) {
      dims.emplace_back(d, d);
      dims.emplace_back(d, d);
    }
    dims.emplace_back(d, out);
  }
  std::vector<LayerView> views;
  std::int64_t offset = 0;
  for (auto [in, out] : dims) {
    LayerView v;
    v.weight_offset = offset;
    v.in = in;
    v.out = out;
    offset += static_cast<std::int64_t>(in) * out;
    v.bias_offset = offset;
    offset += out;
    views.push_back(v);
  }
  return views;
}

using WeightMap = Eigen::Map<const MatrixXd>;
using BiasMap = Eigen::Map<const Eigen::RowVectorXd>;

WeightMap weight(const NetParams& p, const LayerView& v) {
  return WeightMap(p.values.data() + v.weight_offset, v.in, v.out);
}
BiasMap bias(const NetParams& p, const LayerView& v) {
  return BiasMap(p.values.data() + v.bias_offset, v.out);
}

// Batched mish via tanh(softplus(x)) = (e^2+2e)/(e^2+2e+2) with e = exp(x):
// one vectorized exp per entry instead of scalar tanh/log1p/exp calls.
// Clamping x at 36 changes tanh(softplus(x)) by < 1e-30 and keeps e^2 finite.
MatrixXd act(const NetSpec& spec, const MatrixXd& z) {
  if (spec.activation == Activation::kIdentity) return z;
  auto e = z.array().min(36.0).exp();
  auto w = e * (e + 2.0);
  return (z.array() * (w / (w + 2.0))).matrix();
}

MatrixXd act_grad(const NetSpec& spec, const MatrixXd& z) {
  if (spec.activation == Activation::kIdentity) return MatrixXd::Ones(z.rows(), z.cols());
  Eigen::ArrayXXd e = z.array().min(36.0).exp();
  Eigen::ArrayXXd t = (e * (e + 2.0)) / (e * (e + 2.0) + 2.0);
  Eigen::ArrayXXd sig = e / (e + 1.0);
  return (t + z.array() * (1.0 - t.square()) * sig).matrix();
}

struct Trace {
  std::vector<MatrixXd> lin_inputs;  // input fed to each linear layer
  std::vector<MatrixXd> act_pre;     // pre-activation at each activation site
};

MatrixXd forward_traced(const NetParams& p, const MatrixXd& x, Trace* trace) {
  const NetSpec& spec = p.spec;
  if (x.cols() != spec.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, net expects " + std::to_string(spec.input_dim()));
  auto views = layer_views(spec);
  auto keep_lin = [&](const MatrixXd& m) {
    if (trace) trace->lin_inputs.push_back(m);
  };
  auto keep_pre = [&](const MatrixXd& m) {
    if (trace) trace->act_pre.push_back(m);
  };

  if (spec.architecture == Architecture::kPlainMlp) {
    MatrixXd h = x;
    for (std::size_t k = 0; k < views.size(); ++k) {
      keep_lin(h);
      MatrixXd z = (h * weight(p, views[k])).rowwise() + bias(p, views[k]);
      if (k + 1 < views.size()) {
        keep_pre(z);
        h = act(spec, z);
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  // Residual stack: input projection, pre-activation blocks, final head.
  int layer = 0;
  keep_lin(x);
  MatrixXd h = (x * weight(p, views[layer])).rowwise() + bias(p, views[layer]);
  ++layer;
  for (int b = 0; b < spec.block_count; ++b) {
    keep_pre(h);
    MatrixXd pact = act(spec, h);
    keep_lin(pact);
    MatrixXd q = (pact * weight(p, views[layer])).rowwise() + bias(p, views[layer]);
    ++layer;
    keep_pre(q);
    MatrixXd r = act(spec, q);
    keep_lin(r);
    h += (r * weight(p, views[layer])).rowwise() + bias(p, views[layer]);
    ++layer;
  }
  keep_pre(h);
  MatrixXd f = act(spec, h);
  keep_lin(f);
  return (f * weight(p, views[layer])).rowwise() + bias(p, views[layer]);
}

// Reverse sweep matching forward_traced. Returns d loss / d input and, when
// dparams is non-null, accumulates parameter gradients into it.
MatrixXd backward_net(const NetParams& p, const Trace& trace, const MatrixXd& dy,
                      VectorXd* dparams) {
  const NetSpec& spec = p.spec;
  auto views = layer_views(spec);
  auto add_layer_grads = [&](std::size_t k, const MatrixXd& input, const MatrixXd& dz) {
    if (!dparams) return;
    const LayerView& v = views[k];
    Eigen::Map<MatrixXd>(dparams->data() + v.weight_offset, v.in, v.out).noalias() +=
        input.transpose() * dz;
    Eigen::Map<Eigen::RowVectorXd>(dparams->data() + v.bias_offset, v.out) +=
        dz.colwise().sum();
  };

  if (spec.architecture == Architecture::kPlainMlp) {
    MatrixXd dz = dy;
    for (std::size_t k = views.size(); k-- > 0;) {
      add_layer_grads(k, trace.lin_inputs[k], dz);
      MatrixXd da = dz * weight(p, views[k]).transpose();
      if (k > 0)
        dz = da.cwiseProduct(act_grad(spec, trace.act_pre[k - 1]));
      else
        return da;
    }
  }

  const int blocks = spec.block_count;
  std::size_t layer = views.size() - 1;
  // Final head then blocks in reverse; trace layout documented in forward.
  add_layer_grads(layer, trace.lin_inputs.back(), dy);
  MatrixXd df = dy * weight(p, views[layer]).transpose();
  --layer;
  MatrixXd dh = df.cwiseProduct(act_grad(spec, trace.act_pre[2 * blocks]));
  for (int b = blocks - 1; b >= 0; --b) {
    const MatrixXd& r = trace.lin_inputs[2 * b + 2];
    const MatrixXd& pact = trace.lin_inputs[2 * b + 1];
    add_layer_grads(layer, r, dh);
    MatrixXd dr = dh * weight(p, views[layer]).transpose();
    --layer;
    MatrixXd dq = dr.cwiseProduct(act_grad(spec, trace.act_pre[2 * b + 1]));
    add_layer_grads(layer, pact, dq);
    MatrixXd dp = dq * weight(p, views[layer]).transpose();
    --layer;
    dh += dp.cwiseProduct(act_grad(spec, trace.act_pre[2 * b]));
  }
  add_layer_grads(0, trace.lin_inputs[0], dh);
  return dh * weight(p, views[0]).transpose();
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double mish(double x) { return x * std::tanh(softplus(x)); }

double mish_grad(double x) {
  double t = std::tanh(softplus(x));
  double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return t + x * (1.0 - t * t) * sig;
}

std::int64_t NetSpec::param_count() const {
  validate();
  std::int64_t n = 0;
  for (const auto& v : layer_views(*this)) n += static_cast<std::int64_t>(v.in) * v.out + v.out;
  return n;
}

void NetSpec::validate() const {
  if (layer_widths.size() < 2) throw std::invalid_argument("net spec needs at least two widths");
  for (int w : layer_widths)
    if (w <= 0) throw std::invalid_argument("net spec has a non-positive layer width");
  if (architecture == Architecture::kResidualStack) {
    if (layer_widths.size() != 3)
      throw std::invalid_argument("residual stack takes exactly {in, hidden, out} widths");
    if (block_count < 1) throw std::invalid_argument("residual stack needs block_count >= 1");
  } else if (block_count != 0) {
    throw std::invalid_argument("plain mlp must have block_count == 0");
  }
}

NetParams init_params(const NetSpec& spec, Rng& rng, double final_layer_scale) {
  spec.validate();
  NetParams p{spec, VectorXd::Zero(spec.param_count())};
  auto views = layer_views(spec);
  for (std::size_t k = 0; k < views.size(); ++k) {
    double bound = 1.0 / std::sqrt(static_cast<double>(views[k].in));
    if (k + 1 == views.size()) bound *= final_layer_scale;
    std::int64_t begin = views[k].weight_offset;
    std::int64_t end = views[k].bias_offset + views[k].out;
    for (std::int64_t i = begin; i < end; ++i) p.values[i] = rng.uniform(-bound, bound);
  }
  return p;
}

MatrixXd forward(const NetParams& params, const MatrixXd& inputs) {
  return forward_traced(params, inputs, nullptr);
}

OptimizerState make_optimizer(const NetParams& params, double learning_rate,
                              double weight_decay) {
  OptimizerState s;
  s.first_moment = VectorXd::Zero(params.values.size());
  s.second_moment = VectorXd::Zero(params.values.size());
  s.learning_rate = learning_rate;
  s.weight_decay = weight_decay;
  return s;
}

void adamw_step(NetParams& params, const VectorXd& grad, OptimizerState& state) {
  if (grad.size() != params.values.size())
    throw std::invalid_argument("adamw_step: gradient size mismatch");
  if (!grad.allFinite()) throw std::runtime_error("adamw_step: non-finite gradient");
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad).eval();
  double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  VectorXd mhat = state.first_moment / c1;
  VectorXd vhat = state.second_moment / c2;
  params.values -=
      state.learning_rate * (mhat.array() / (vhat.array().sqrt() + state.epsilon)).matrix();
  if (state.weight_decay != 0.0)
    params.values *= (1.0 - state.learning_rate * state.weight_decay);
}

void soft_update(NetParams& target, const NetParams& online, double rate) {
  if (!(target.spec == online.spec))
    throw std::invalid_argument("soft_update: target and online specs differ");
  target.values = (1.0 - rate) * target.values + rate * online.values;
}

// --------------------------------- Graph ----------------------------------

struct Graph::Node {
  enum class Op { kConst, kParams, kApplyNet, kConcat2, kConcat3, kLincomb, kScaleShift,
                  kClamp, kMin2 };
  Op op;
  MatrixXd value;
  MatrixXd grad;  // empty until touched
  NodeId a = -1, b = -1, c = -1;
  double alpha = 0.0, beta = 0.0;
  const NetParams* net = nullptr;
  Trace trace;
};

Graph::Graph(const NetParams& tracked) : tracked_(&tracked) {}

Graph::~Graph() = default;

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const MatrixXd& Graph::value(NodeId id) const { return nodes_.at(id).value; }

MatrixXd& Graph::grad(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.grad.size() == 0) n.grad = MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Graph::NodeId Graph::constant(MatrixXd value) {
  Node n;
  n.op = Node::Op::kConst;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::NodeId Graph::tracked_params() {
  Node n;
  n.op = Node::Op::kParams;
  n.value = tracked_->values;
  return push(std::move(n));
}

Graph::NodeId Graph::apply_net(const NetParams& net, NodeId input) {
  Node n;
  n.op = Node::Op::kApplyNet;
  n.a = input;
  n.net = &net;
  n.value = forward_traced(net, nodes_.at(input).value, &n.trace);
  return push(std::move(n));
}

Graph::NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const MatrixXd& va = value(a);
  const MatrixXd& vb = value(b);
  if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Node n;
  n.op = Node::Op::kConcat2;
  n.a = a;
  n.b = b;
  n.value.resize(va.rows(), va.cols() + vb.cols());
  n.value << va, vb;
  return push(std::move(n));
}

Graph::NodeId Graph::concat_cols(NodeId a, NodeId b, NodeId c) {
  return concat_cols(concat_cols(a, b), c);
}

Graph::NodeId Graph::lincomb(double alpha, NodeId a, double beta, NodeId b) {
  const MatrixXd& va = value(a);
  const MatrixXd& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("lincomb: shape mismatch");
  Node n;
  n.op = Node::Op::kLincomb;
  n.a = a;
  n.b = b;
  n.alpha = alpha;
  n.beta = beta;
  n.value = alpha * va + beta * vb;
  return push(std::move(n));
}

Graph::NodeId Graph::scale_shift(NodeId a, double alpha, const MatrixXd& shift) {
  const MatrixXd& va = value(a);
  if (va.rows() != shift.rows() || va.cols() != shift.cols())
    throw std::invalid_argument("scale_shift: shape mismatch");
  Node n;
  n.op = Node::Op::kScaleShift;
  n.a = a;
  n.alpha = alpha;
  n.value = alpha * va + shift;
  return push(std::move(n));
}

Graph::NodeId Graph::clamp(NodeId a, double lo, double hi) {
  Node n;
  n.op = Node::Op::kClamp;
  n.a = a;
  n.alpha = lo;
  n.beta = hi;
  n.value = value(a).cwiseMax(lo).cwiseMin(hi);
  return push(std::move(n));
}

Graph::NodeId Graph::min2(NodeId a, NodeId b) {
  const MatrixXd& va = value(a);
  const MatrixXd& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("min2: shape mismatch");
  Node n;
  n.op = Node::Op::kMin2;
  n.a = a;
  n.b = b;
  n.value = va.cwiseMin(vb);
  return push(std::move(n));
}

void Graph::add_mean_sq(NodeId node, const MatrixXd& target, double coeff) {
  const MatrixXd& v = value(node);
  if (v.rows() != target.rows() || v.cols() != target.cols())
    throw std::invalid_argument("add_mean_sq: target shape mismatch");
  MatrixXd diff = v - target;
  loss_ += coeff * diff.squaredNorm() / static_cast<double>(v.rows());
  grad(node) += (2.0 * coeff / static_cast<double>(v.rows())) * diff;
}

void Graph::add_weighted_sq(NodeId node, const VectorXd& weights) {
  const MatrixXd& v = value(node);
  if (v.cols() != 1 || v.rows() != weights.size())
    throw std::invalid_argument("add_weighted_sq: expects a column matching weights");
  loss_ += weights.cwiseProduct(v.col(0).cwiseProduct(v.col(0))).sum();
  grad(node).col(0) += 2.0 * weights.cwiseProduct(v.col(0));
}

void Graph::add_mean(NodeId node, double coeff) {
  const MatrixXd& v = value(node);
  loss_ += coeff * v.mean();
  grad(node).array() += coeff / static_cast<double>(v.size());
}

VectorXd Graph::backward() {
  if (swept_) throw std::logic_error("Graph::backward called twice");
  swept_ = true;
  if (!std::isfinite(loss_))
    throw std::runtime_error("loss is non-finite: " + std::to_string(loss_));
  VectorXd dparams = VectorXd::Zero(tracked_->values.size());
  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    switch (n.op) {
      case Node::Op::kConst:
        break;
      case Node::Op::kParams:
        dparams += n.grad.col(0);
        break;
      case Node::Op::kApplyNet: {
        bool tracked = n.net == tracked_;
        MatrixXd dx = backward_net(*n.net, n.trace, n.grad, tracked ? &dparams : nullptr);
        grad(n.a) += dx;
        break;
      }
      case Node::Op::kConcat2: {
        Eigen::Index ca = nodes_[n.a].value.cols();
        grad(n.a) += n.grad.leftCols(ca);
        grad(n.b) += n.grad.rightCols(n.grad.cols() - ca);
        break;
      }
      case Node::Op::kConcat3:
        throw std::logic_error("unreachable");
      case Node::Op::kLincomb:
        grad(n.a) += n.alpha * n.grad;
        grad(n.b) += n.beta * n.grad;
        break;
      case Node::Op::kScaleShift:
        grad(n.a) += n.alpha * n.grad;
        break;
      case Node::Op::kClamp: {
        const MatrixXd& x = nodes_[n.a].value;
        grad(n.a) +=
            n.grad.cwiseProduct((x.array() >= n.alpha && x.array() <= n.beta)
                                    .cast<double>()
                                    .matrix());
        break;
      }
      case Node::Op::kMin2: {
        // Ties route to the first argument.
        MatrixXd pick =
            (nodes_[n.a].value.array() <= nodes_[n.b].value.array()).cast<double>().matrix();
        grad(n.a) += n.grad.cwiseProduct(pick);
        grad(n.b) += n.grad.cwiseProduct((1.0 - pick.array()).matrix());
        break;
      }
    }
  }
  return dparams;
}

LossEval eval_loss(const NetParams& params, const std::function<void(Graph&)>& build) {
  Graph g(params);
  build(g);
  LossEval out;
  out.grad = g.backward();
  out.value = g.loss();
  return out;
}

VectorXd finite_difference(const NetParams& params,
                           const std::function<double(const NetParams&)>& loss_fn,
                           double step) {
  NetParams probe = params;
  VectorXd grad(params.values.size());
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    double saved = probe.values[i];
    probe.values[i] = saved + step;
    double hi = loss_fn(probe);
    probe.values[i] = saved - step;
    double lo = loss_fn(probe);
    probe.values[i] = saved;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// ------------------------------ checkpoints -------------------------------

namespace {

constexpr char kMagic[4] = {'A', 'D', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
  std::uint64_t lo = read_u32(in, what);
  std::uint64_t hi = read_u32(in, what);
  return lo | hi << 32;
}

float read_f32(std::istream& in, const char* what) {
  std::uint32_t bits = read_u32(in, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void quantize_params(NetParams& params) {
  for (Eigen::Index i = 0; i < params.values.size(); ++i)
    params.values[i] = static_cast<double>(static_cast<float>(params.values[i]));
}

void save_params(const NetParams& params, std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(params.spec.architecture));
  write_u32(out, static_cast<std::uint32_t>(params.spec.activation));
  write_u32(out, static_cast<std::uint32_t>(params.spec.block_count));
  write_u32(out, static_cast<std::uint32_t>(params.spec.layer_widths.size()));
  for (int w : params.spec.layer_widths) write_u32(out, static_cast<std::uint32_t>(w));
  write_u64(out, static_cast<std::uint64_t>(params.values.size()));
  for (Eigen::Index i = 0; i < params.values.size(); ++i)
    write_f32(out, static_cast<float>(params.values[i]));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_params(const NetParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_params(params, out);
}

NetParams load_params(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint magic mismatch (expected ADNN)");
  std::uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  NetSpec spec;
  spec.architecture = static_cast<Architecture>(read_u32(in, "architecture"));
  spec.activation = static_cast<Activation>(read_u32(in, "activation"));
  spec.block_count = static_cast<int>(read_u32(in, "block_count"));
  std::uint32_t width_count = read_u32(in, "width count");
  if (width_count < 2 || width_count > 64)
    throw std::runtime_error("checkpoint has implausible width count " +
                             std::to_string(width_count));
  spec.layer_widths.resize(width_count);
  for (auto& w : spec.layer_widths) w = static_cast<int>(read_u32(in, "layer width"));
  spec.validate();
  std::uint64_t count = read_u64(in, "param count");
  if (count != static_cast<std::uint64_t>(spec.param_count()))
    throw std::runtime_error("checkpoint param count does not match its spec");
  NetParams p{spec, VectorXd(static_cast<Eigen::Index>(count))};
  for (std::uint64_t i = 0; i < count; ++i)
    p.values[static_cast<Eigen::Index>(i)] = static_cast<double>(read_f32(in, "parameters"));
  return p;
}

NetParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_params(in);
}

}  // namespace adac::nn
