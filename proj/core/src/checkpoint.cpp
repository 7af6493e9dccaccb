#include "fairmarl/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fairmarl {

namespace {

constexpr const char* kMagic = "FAIRMARL-CKPT-v1";

std::vector<int> parse_sizes(const std::string& dashed) {
  std::vector<int> sizes;
  std::stringstream ss(dashed);
  std::string part;
  while (std::getline(ss, part, '-')) sizes.push_back(std::stoi(part));
  return sizes;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& architecture,
                     const ParameterSet& params) {
  params.require_finite();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << kMagic << '\n';
  f << "arch " << architecture << '\n';
  f << "tensors " << params.tensors.size() << '\n';
  for (const auto& [name, t] : params.tensors) {
    f << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  }
  f << "data\n";
  for (const auto& [name, t] : params.tensors) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        float v = static_cast<float>(t(i, j));
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!f) throw std::runtime_error("write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kMagic) {
    throw std::runtime_error(path + " is not a supported model file");
  }
  Checkpoint ckpt;
  if (!std::getline(f, line) || line.rfind("arch ", 0) != 0) {
    throw std::runtime_error(path + ": missing architecture line");
  }
  ckpt.architecture = line.substr(5);
  if (!std::getline(f, line) || line.rfind("tensors ", 0) != 0) {
    throw std::runtime_error(path + ": missing tensor directory");
  }
  std::size_t count = std::stoul(line.substr(8));
  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
  };
  std::vector<Entry> dir;
  dir.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(f, line)) throw std::runtime_error(path + ": truncated tensor directory");
    std::istringstream is(line);
    Entry e;
    if (!(is >> e.name >> e.rows >> e.cols) || e.rows < 0 || e.cols < 0) {
      throw std::runtime_error(path + ": bad tensor directory entry: " + line);
    }
    dir.push_back(std::move(e));
  }
  if (!std::getline(f, line) || line != "data") {
    throw std::runtime_error(path + ": missing data section");
  }
  for (const Entry& e : dir) {
    Eigen::MatrixXd t(e.rows, e.cols);
    for (Eigen::Index i = 0; i < e.rows; ++i) {
      for (Eigen::Index j = 0; j < e.cols; ++j) {
        float v;
        if (!f.read(reinterpret_cast<char*>(&v), sizeof v)) {
          throw std::runtime_error(path + ": truncated payload for tensor " + e.name);
        }
        t(i, j) = static_cast<double>(v);
      }
    }
    ckpt.params.add(e.name, std::move(t));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_architecture) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.architecture != expected_architecture) {
    throw std::runtime_error(path + ": architecture mismatch, file has '" + ckpt.architecture +
                             "' but '" + expected_architecture + "' was expected");
  }
  return ckpt;
}

ActorCritic actor_critic_from_checkpoint(const Checkpoint& ckpt) {
  std::string policy_part, value_part;
  std::stringstream ss(ckpt.architecture);
  std::string seg;
  while (std::getline(ss, seg, ';')) {
    if (seg.rfind("policy:", 0) == 0) policy_part = seg.substr(7);
    if (seg.rfind("value:", 0) == 0) value_part = seg.substr(6);
  }
  if (policy_part.empty() || value_part.empty()) {
    throw std::runtime_error("unrecognized architecture: " + ckpt.architecture);
  }
  ActorCritic net;
  Rng init(0);
  net.policy = Mlp(parse_sizes(policy_part), init);
  net.value = Mlp(parse_sizes(value_part), init);
  net.set_parameters(ckpt.params);
  return net;
}

void save_actor_critic(const std::string& path, const ActorCritic& net) {
  save_checkpoint(path, net.architecture(), net.parameters());
}

ActorCritic load_actor_critic(const std::string& path) {
  return actor_critic_from_checkpoint(load_checkpoint(path));
}

}  // namespace fairmarl
