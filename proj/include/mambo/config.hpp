#pragma once

#include "mambo/core.hpp"
#include "mambo/data_io.hpp"
#include "mambo/encoders.hpp"
#include "mambo/training.hpp"

#include <string>
#include <vector>

namespace mambo {

// Everything one experiment needs, read from flat key=value text.
struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    SyntheticSpec synth;
    TextEncoderOptions text;
    double misalignment = 1.5;  // distance between untrained and ideal context, pre-activation units
    double sharpness = 3.0;     // pre-activation scale of the ideal class features

    std::string train_dump;
    std::string id_dump;
    std::string ood_dump;

    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<std::string> strategies{"baseline", "refinement", "sct", "full"};
    std::string score = "rmcm";
    int cell_threads = 1;

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);

    // Applies one key=value pair; throws ConfigError naming the key.
    void set(const std::string& key, const std::string& value);

    // Canonical text, every key in a fixed order; parse(to_text()) round-trips.
    std::string to_text() const;

    void validate() const;
};

}  // namespace mambo
