#pragma once

#include <optional>
#include <string>

#include "mixnet/model.hpp"
#include "mixnet/training.hpp"

namespace mixnet {

// Plain-text key=value run configuration ('#' starts a comment). Unknown keys
// are rejected so typos fail loudly.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string train_dir;
    std::string val_dir;
    std::string checkpoint_dir;
    std::optional<std::string> resume;
};

RunConfig parse_run_config(const std::string& path);

} // namespace mixnet
