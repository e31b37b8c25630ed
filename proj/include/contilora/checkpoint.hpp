#pragma once

#include <string>

#include "contilora/trainer.hpp"

namespace contilora {

// One task boundary on disk: manifest.json plus matcore binaries for the
// task's adapter and the post-task compressed history.
void save_task_checkpoint(const std::string& dir, const NetworkSpec& spec,
                          const TaskCheckpoint& cp);
TaskCheckpoint load_task_checkpoint(const std::string& dir);

// Final network: base matrices, every frozen adapter, compressed history,
// and a manifest with dims/activation and the adapter inventory.
void save_network(const std::string& dir, const NetworkSpec& spec, const Params& params);
std::pair<NetworkSpec, Params> load_network(const std::string& dir);

}  // namespace contilora
