#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fairmarl/rng.hpp"

namespace fairmarl {

// Ordered, named collection of real tensors. Vectors are stored as n-by-1
// matrices. The order is the serialization order.
struct ParameterSet {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  void add(std::string name, Eigen::MatrixXd value);
  bool has(const std::string& name) const;
  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  // Throws std::domain_error naming the first tensor with a NaN or infinity.
  void require_finite() const;
};

// Fully connected network: tanh hidden layers, linear output. Samples are
// columns, so a batch of N observations is an (input_dim, N) matrix.
class Mlp {
 public:
  Mlp() = default;
  // layer_sizes = {in, hidden..., out}. Hidden weights get orthogonal init
  // with gain sqrt(2); the output layer is orthogonal scaled by final_gain.
  Mlp(std::vector<int> layer_sizes, Rng& rng, double final_gain = 1.0);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  // Activations kept for the backward pass: act[0] is the input, act[l] the
  // output of layer l-1, act.back() the linear network output.
  struct Cache {
    std::vector<Eigen::MatrixXd> act;
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

  struct Grad {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
  };
  Grad zero_grad() const;

  // Accumulates dL/dW and dL/db into grad given dL/d(output) for the batch
  // that produced cache.
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Grad& grad) const;

  // Named views for serialization and the optimizer: <prefix>.w0, <prefix>.b0, ...
  void append_parameters(ParameterSet& out, const std::string& prefix) const;
  void load_parameters(const ParameterSet& in, const std::string& prefix);

  std::size_t layer_count() const { return w_.size(); }
  Eigen::MatrixXd& weight(std::size_t layer) { return w_[layer]; }
  const Eigen::MatrixXd& weight(std::size_t layer) const { return w_[layer]; }
  Eigen::VectorXd& bias(std::size_t layer) { return b_[layer]; }
  const Eigen::VectorXd& bias(std::size_t layer) const { return b_[layer]; }

 private:
  std::vector<int> layer_sizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

// Throws std::domain_error naming the offending tensor if any gradient entry
// is NaN or infinite.
void require_finite(const Mlp::Grad& grad, const std::string& prefix);

// Numerically stable softmax over a logit vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// -sum p ln p with 0 ln 0 := 0.
double entropy(const Eigen::VectorXd& dist);

// Flat mutable view of one tensor, used to line parameters up with gradients.
struct TensorView {
  double* data = nullptr;
  Eigen::Index size = 0;
};

std::vector<TensorView> tensor_views(Mlp& net);
std::vector<TensorView> tensor_views(Mlp::Grad& grad);

// Adam optimizer over an ordered list of tensors. Moment buffers are created
// on the first step and must keep their shapes afterwards.
class Adam {
 public:
  Adam() = default;
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one descent step: theta <- theta - lr * mhat / (sqrt(vhat) + eps).
  // Callers maximizing an objective pass the gradient of its negation.
  void step(const std::vector<TensorView>& params, const std::vector<TensorView>& grads,
            double lr);

  long timestep() const { return t_; }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<Eigen::ArrayXd> m_, v_;
};

// Policy network (softmax head) plus a separate value network over the same
// observation space.
struct ActorCritic {
  Mlp policy;
  Mlp value;

  ActorCritic() = default;
  ActorCritic(int obs_dim, int action_count, int hidden, Rng& rng);

  // Probability distribution over actions; entries >= 0, sums to 1.
  Eigen::VectorXd policy_forward(const Eigen::VectorXd& observation) const;
  // Scalar state-value estimate.
  double value_forward(const Eigen::VectorXd& observation) const;

  ParameterSet parameters() const;
  void set_parameters(const ParameterSet& params);
  // Compact text form of the layer sizes, e.g. "policy:105-64-64-10;value:105-64-64-1".
  std::string architecture() const;
};

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

// Draws an action from the categorical policy head and reads the value head.
ActionSample sample_action(const ActorCritic& net, const Eigen::VectorXd& obs, Rng& rng);

// Deterministic evaluation-mode action: highest probability, lowest index wins ties.
int argmax_action(const ActorCritic& net, const Eigen::VectorXd& obs);

}  // namespace fairmarl
