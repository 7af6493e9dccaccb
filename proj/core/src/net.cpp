#include "fairmarl/net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

void ParameterSet::add(std::string name, Eigen::MatrixXd value) {
  if (has(name)) throw std::invalid_argument("duplicate tensor name: " + name);
  tensors.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::has(const std::string& name) const {
  for (const auto& [n, _] : tensors)
    if (n == name) return true;
  return false;
}

Eigen::MatrixXd& ParameterSet::at(const std::string& name) {
  for (auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::out_of_range("no tensor named " + name);
}

const Eigen::MatrixXd& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::out_of_range("no tensor named " + name);
}

void ParameterSet::require_finite() const {
  for (const auto& [n, t] : tensors) {
    if (!t.allFinite()) throw std::domain_error("non-finite values in tensor " + n);
  }
}

namespace {

// Deterministic orthogonal init: QR of a Gaussian matrix with the sign of
// R's diagonal folded into Q so the result is unique.
Eigen::MatrixXd orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  bool flip = rows < cols;
  Eigen::Index r = flip ? cols : rows;
  Eigen::Index c = flip ? rows : cols;
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j)
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  if (flip) return gain * q.transpose();
  return gain * q;
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng, double final_gain)
    : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) throw std::invalid_argument("network needs at least two layers");
  for (int s : layer_sizes_)
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  std::size_t L = layer_sizes_.size() - 1;
  w_.reserve(L);
  b_.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    double gain = (l + 1 == L) ? final_gain : std::sqrt(2.0);
    w_.push_back(orthogonal(layer_sizes_[l + 1], layer_sizes_[l], gain, rng));
    b_.push_back(Eigen::VectorXd::Zero(layer_sizes_[l + 1]));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != input_dim()) {
    std::ostringstream os;
    os << "input has " << x.rows() << " rows, network expects " << input_dim();
    throw std::invalid_argument(os.str());
  }
  if (!x.allFinite()) throw std::domain_error("non-finite network input");
  cache.act.clear();
  cache.act.reserve(w_.size() + 1);
  cache.act.push_back(x);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z = (w_[l] * cache.act.back()).colwise() + b_[l];
    if (l + 1 < w_.size()) z = z.array().tanh();
    cache.act.push_back(std::move(z));
  }
  return cache.act.back();
}

Mlp::Grad Mlp::zero_grad() const {
  Grad g;
  g.w.reserve(w_.size());
  g.b.reserve(b_.size());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    g.w.push_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    g.b.push_back(Eigen::VectorXd::Zero(b_[l].size()));
  }
  return g;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Grad& grad) const {
  if (cache.act.size() != w_.size() + 1) throw std::logic_error("cache does not match network");
  if (grad_out.rows() != output_dim() || grad_out.cols() != cache.act.back().cols()) {
    throw std::invalid_argument("output gradient shape does not match cached forward pass");
  }
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = w_.size(); l-- > 0;) {
    grad.w[l].noalias() += delta * cache.act[l].transpose();
    grad.b[l].noalias() += delta.rowwise().sum();
    if (l > 0) {
      delta = (w_[l].transpose() * delta).cwiseProduct(
          (1.0 - cache.act[l].array().square()).matrix());
    }
  }
}

void Mlp::append_parameters(ParameterSet& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    out.add(prefix + ".w" + std::to_string(l), w_[l]);
    out.add(prefix + ".b" + std::to_string(l), b_[l]);
  }
}

void Mlp::load_parameters(const ParameterSet& in, const std::string& prefix) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const Eigen::MatrixXd& w = in.at(prefix + ".w" + std::to_string(l));
    const Eigen::MatrixXd& b = in.at(prefix + ".b" + std::to_string(l));
    if (w.rows() != w_[l].rows() || w.cols() != w_[l].cols() || b.rows() != b_[l].size() ||
        b.cols() != 1) {
      throw std::invalid_argument("tensor shape mismatch for " + prefix + " layer " +
                                  std::to_string(l));
    }
    w_[l] = w;
    b_[l] = b.col(0);
  }
}

void require_finite(const Mlp::Grad& grad, const std::string& prefix) {
  for (std::size_t l = 0; l < grad.w.size(); ++l) {
    if (!grad.w[l].allFinite())
      throw std::domain_error("non-finite gradient in " + prefix + ".w" + std::to_string(l));
    if (!grad.b[l].allFinite())
      throw std::domain_error("non-finite gradient in " + prefix + ".b" + std::to_string(l));
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

double entropy(const Eigen::VectorXd& dist) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist(i) > 0.0) h -= dist(i) * std::log(dist(i));
  }
  return h;
}

std::vector<TensorView> tensor_views(Mlp& net) {
  std::vector<TensorView> views;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    views.push_back({net.weight(l).data(), net.weight(l).size()});
    views.push_back({net.bias(l).data(), net.bias(l).size()});
  }
  return views;
}

std::vector<TensorView> tensor_views(Mlp::Grad& grad) {
  std::vector<TensorView> views;
  for (std::size_t l = 0; l < grad.w.size(); ++l) {
    views.push_back({grad.w[l].data(), grad.w[l].size()});
    views.push_back({grad.b[l].data(), grad.b[l].size()});
  }
  return views;
}

void Adam::step(const std::vector<TensorView>& params, const std::vector<TensorView>& grads,
                double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const TensorView& p : params) {
      m_.push_back(Eigen::ArrayXd::Zero(p.size));
      v_.push_back(Eigen::ArrayXd::Zero(p.size));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("optimizer state does not match parameters");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size || params[i].size != m_[i].size()) {
      throw std::invalid_argument("tensor shape mismatch in optimizer step");
    }
    Eigen::Map<Eigen::ArrayXd> theta(params[i].data, params[i].size);
    Eigen::Map<const Eigen::ArrayXd> g(grads[i].data, grads[i].size);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
    theta -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
  }
}

ActorCritic::ActorCritic(int obs_dim, int action_count, int hidden, Rng& rng)
    : policy({obs_dim, hidden, hidden, action_count}, rng, 0.01),
      value({obs_dim, hidden, hidden, 1}, rng, 1.0) {}

Eigen::VectorXd ActorCritic::policy_forward(const Eigen::VectorXd& observation) const {
  return softmax(policy.forward(observation));
}

double ActorCritic::value_forward(const Eigen::VectorXd& observation) const {
  return value.forward(observation)(0);
}

ParameterSet ActorCritic::parameters() const {
  ParameterSet ps;
  policy.append_parameters(ps, "policy");
  value.append_parameters(ps, "value");
  return ps;
}

void ActorCritic::set_parameters(const ParameterSet& params) {
  policy.load_parameters(params, "policy");
  value.load_parameters(params, "value");
}

std::string ActorCritic::architecture() const {
  auto join = [](const std::vector<int>& sizes) {
    std::string s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (i) s += '-';
      s += std::to_string(sizes[i]);
    }
    return s;
  };
  return "policy:" + join(policy.layer_sizes()) + ";value:" + join(value.layer_sizes());
}

ActionSample sample_action(const ActorCritic& net, const Eigen::VectorXd& obs, Rng& rng) {
  Eigen::VectorXd p = net.policy_forward(obs);
  ActionSample out;
  out.action = static_cast<int>(rng.categorical(p));
  out.log_prob = std::log(std::max(p[out.action], 1e-300));
  out.value = net.value_forward(obs);
  return out;
}

int argmax_action(const ActorCritic& net, const Eigen::VectorXd& obs) {
  Eigen::VectorXd p = net.policy_forward(obs);
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

}  // namespace fairmarl
