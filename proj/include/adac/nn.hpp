#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "adac/rng.hpp"

namespace adac::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation : std::uint32_t { kIdentity = 0, kMish = 1 };
enum class Architecture : std::uint32_t { kPlainMlp = 0, kResidualStack = 1 };

// Stable softplus / mish, applied elementwise by the forward pass.
double softplus(double x);
double mish(double x);
double mish_grad(double x);

// Architecture description. PlainMlp runs layer_widths.size()-1 linear
// layers with the activation between them (output stays linear).
// ResidualStack expects exactly {in, hidden, out}: an input projection,
// block_count pre-activation residual blocks of two hidden linear layers,
// one final activation, and a linear output head.
struct NetSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::kMish;
  Architecture architecture = Architecture::kPlainMlp;
  int block_count = 0;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  std::int64_t param_count() const;
  void validate() const;

  bool operator==(const NetSpec& other) const = default;
};

// Flat parameter vector plus its spec. Layout is layer-major: for each
// linear layer the weight matrix (column-major, in x out) then the bias.
struct NetParams {
  NetSpec spec;
  VectorXd values;
};

// Fan-in scaled uniform init; final_layer_scale shrinks the output layer
// (value and critic heads start near zero).
NetParams init_params(const NetSpec& spec, Rng& rng, double final_layer_scale = 1.0);

MatrixXd forward(const NetParams& params, const MatrixXd& inputs);

struct OptimizerState {
  VectorXd first_moment;
  VectorXd second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 3e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptimizerState make_optimizer(const NetParams& params, double learning_rate,
                              double weight_decay = 0.0);

// AdamW with decoupled weight decay. Rejects non-finite gradients.
void adamw_step(NetParams& params, const VectorXd& grad, OptimizerState& state);

// target <- (1 - rate) * target + rate * online. Specs must match.
void soft_update(NetParams& target, const NetParams& online, double rate);

// ---------------------------------------------------------------------------
// Reverse-mode tape over batched matrices. One Graph per loss evaluation.
// Parameter gradients are accumulated only for the params object the graph
// was constructed with (matched by address); every other net application is
// treated as a constant function of its input.
// ---------------------------------------------------------------------------
class Graph {
 public:
  using NodeId = int;

  explicit Graph(const NetParams& tracked);
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(MatrixXd value);
  // Column view (P x 1) of the tracked parameters themselves.
  NodeId tracked_params();
  NodeId apply_net(const NetParams& net, NodeId input);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b, NodeId c);
  // alpha * a + beta * b, elementwise (shapes must match).
  NodeId lincomb(double alpha, NodeId a, double beta, NodeId b);
  // alpha * a + shift.
  NodeId scale_shift(NodeId a, double alpha, const MatrixXd& shift);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId min2(NodeId a, NodeId b);

  const MatrixXd& value(NodeId id) const;

  // Loss terms (summed into a single scalar).
  // coeff * (1/rows) * sum of squared entries of (node - target).
  void add_mean_sq(NodeId node, const MatrixXd& target, double coeff = 1.0);
  // sum_i w_i * node_i^2 for a single-column node.
  void add_weighted_sq(NodeId node, const VectorXd& weights);
  // coeff * mean of all entries.
  void add_mean(NodeId node, double coeff = 1.0);

  double loss() const { return loss_; }

  // Runs the reverse sweep; returns d loss / d tracked params.
  // Throws if the accumulated loss is non-finite.
  VectorXd backward();

 private:
  struct Node;
  NodeId push(Node node);
  MatrixXd& grad(NodeId id);

  const NetParams* tracked_;
  std::vector<Node> nodes_;
  double loss_ = 0.0;
  bool swept_ = false;
};

struct LossEval {
  double value = 0.0;
  VectorXd grad;
};

// Builds a fresh graph tracking `params`, runs `build`, returns loss + grad.
LossEval eval_loss(const NetParams& params, const std::function<void(Graph&)>& build);

// Central finite-difference gradient of the same closure (testing aid).
VectorXd finite_difference(const NetParams& params,
                           const std::function<double(const NetParams&)>& loss_fn,
                           double step = 1e-5);

// Checkpoint I/O: magic "ADNN", little-endian, params stored as float32.
// Loading restores exactly the doubles that were saved (params are float32
// representable because training state is quantized on save).
void save_params(const NetParams& params, std::ostream& out);
void save_params(const NetParams& params, const std::string& path);
NetParams load_params(std::istream& in);
NetParams load_params(const std::string& path);

// Rounds every parameter through float32 so save/load round-trips bit-exactly.
void quantize_params(NetParams& params);

}  // namespace adac::nn
