#pragma once

#include <string>
#include <vector>

#include "normscape/model.hpp"
#include "normscape/objective.hpp"
#include "normscape/trainer.hpp"

namespace normscape {

struct RunPaths {
    std::string train_manifest;
    std::string validation_manifest;
    std::string eval_manifest;
};

// Union of every knob an experiment run takes, loadable from one JSON file.
// Every field has the default the headline experiment uses, so an empty
// config object runs it unchanged.
struct RunConfig {
    ModelConfig model;
    ObjectiveConfig objective;
    TrainConfig train;
    RunPaths paths;
    std::string precision = "f32";  // "f32" | "f64"
    std::vector<NormSetting> settings = {NormSetting::all_l2, NormSetting::mix,
                                         NormSetting::all_l1};

    void validate() const {
        model.validate();
        objective.validate();
        train.validate();
        if (precision != "f32" && precision != "f64") {
            throw ConfigError("precision must be 'f32' or 'f64', got '" + precision + "'");
        }
        if (settings.empty()) throw ConfigError("settings list is empty");
    }
};

// Strict parse: unknown keys are rejected (with their path), missing keys
// fall back to defaults. The echo serializer emits the fully resolved
// config.
RunConfig parse_run_config_json(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace normscape
