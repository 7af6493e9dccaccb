#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fairmarl/checkpoint.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/rng.hpp"

using namespace fairmarl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("fairmarl_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("actor critic survives a save and load round trip") {
  TempDir dir("ckpt_roundtrip");
  Rng rng(211);
  ActorCritic net(6, 4, 8, rng);
  std::string path = dir.file("net.ckpt");
  save_actor_critic(path, net);

  ActorCritic back = load_actor_critic(path);
  CHECK(back.architecture() == net.architecture());

  Eigen::VectorXd obs = Eigen::VectorXd::Random(6);
  Eigen::VectorXd p0 = net.policy_forward(obs);
  Eigen::VectorXd p1 = back.policy_forward(obs);
  // Payload is float32, so agreement is to single precision.
  CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(back.value_forward(obs) == doctest::Approx(net.value_forward(obs)).epsilon(1e-4));

  SUBCASE("two saves of one network are byte-identical") {
    std::string again = dir.file("net2.ckpt");
    save_actor_critic(again, net);
    CHECK(slurp(path) == slurp(again));
  }
  SUBCASE("a second round trip is lossless") {
    std::string twice = dir.file("net3.ckpt");
    save_actor_critic(twice, back);
    ActorCritic third = load_actor_critic(twice);
    ParameterSet a = back.parameters(), b = third.parameters();
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
      CHECK((a.tensors[i].second - b.tensors[i].second).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("loading rejects missing, corrupt, and mismatched files") {
  TempDir dir("ckpt_errors");
  Rng rng(223);
  ActorCritic net(4, 3, 6, rng);
  std::string path = dir.file("net.ckpt");
  save_actor_critic(path, net);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir.file("absent.ckpt")), std::runtime_error);
  }
  SUBCASE("unknown magic") {
    std::string bad = dir.file("bad.ckpt");
    std::ofstream out(bad, std::ios::binary);
    out << "not a model file\n";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::string whole = slurp(path);
    std::string cut = dir.file("cut.ckpt");
    std::ofstream out(cut, std::ios::binary);
    out.write(whole.data(), static_cast<std::streamsize>(whole.size() - 16));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(cut), std::runtime_error);
  }
  SUBCASE("architecture mismatch") {
    Checkpoint ok = load_checkpoint(path, net.architecture());
    CHECK(ok.architecture == net.architecture());
    CHECK_THROWS_AS(load_checkpoint(path, "policy:9-9-9-9;value:9-9-9-1"), std::runtime_error);
  }
}

TEST_CASE("checkpoints preserve tensor order and names") {
  TempDir dir("ckpt_names");
  Rng rng(227);
  ActorCritic net(3, 2, 4, rng);
  std::string path = dir.file("net.ckpt");
  save_actor_critic(path, net);
  Checkpoint ckpt = load_checkpoint(path);
  ParameterSet expect = net.parameters();
  REQUIRE(ckpt.params.tensors.size() == expect.tensors.size());
  for (std::size_t i = 0; i < expect.tensors.size(); ++i) {
    CHECK(ckpt.params.tensors[i].first == expect.tensors[i].first);
    CHECK(ckpt.params.tensors[i].second.rows() == expect.tensors[i].second.rows());
    CHECK(ckpt.params.tensors[i].second.cols() == expect.tensors[i].second.cols());
  }
  ActorCritic rebuilt = actor_critic_from_checkpoint(ckpt);
  CHECK(rebuilt.architecture() == net.architecture());
}
