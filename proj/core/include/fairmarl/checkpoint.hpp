#pragma once

#include <string>

#include "fairmarl/net.hpp"

namespace fairmarl {

// Self-describing model file: a versioned magic line, an architecture
// description, a named tensor directory with shapes, then row-major float32
// payloads in directory order.
struct Checkpoint {
  std::string architecture;
  ParameterSet params;
};

void save_checkpoint(const std::string& path, const std::string& architecture,
                     const ParameterSet& params);

// Throws std::runtime_error on missing files, unknown magic, or truncation.
Checkpoint load_checkpoint(const std::string& path);

// Additionally rejects a file whose architecture line differs from expected.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_architecture);

// Rebuilds the network pair described by a checkpoint's architecture string
// and loads its tensors.
ActorCritic actor_critic_from_checkpoint(const Checkpoint& ckpt);

void save_actor_critic(const std::string& path, const ActorCritic& net);
ActorCritic load_actor_critic(const std::string& path);

}  // namespace fairmarl
