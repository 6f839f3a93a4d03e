#pragma once

#include <string>

#include <json.hpp>

#include "gait/model.hpp"
#include "gait/train.hpp"

namespace gait {

// Model architecture as JSON. Writing emits the lossless "blocks" form;
// reading also accepts the compact "channels" + "strided" form used in config
// files (output widths plus 1-based positions of the stride-2 blocks).
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Evaluation settings grouped with a run.
struct EvalConfig {
    int crop_len = 64;               // fixed sequence length fed to the network
    std::string train_order = "sort";  // frame order applied to training data
    std::string test_order = "sort";   // frame order applied to gallery/probe data

    void validate() const;
};

// One run description: where the data lives, the architecture, the training
// hyperparameters, and the evaluation settings.
struct RunConfig {
    std::string data_index;  // dataset index path ([data] index = "...")
    ModelConfig model = ModelConfig::defaults();
    TrainConfig train;
    EvalConfig eval;

    void validate() const;
};

// Config files are JSON or a TOML subset ([section], key = value, # comments;
// values use JSON literal syntax). The text form is sniffed by its first
// non-space character ('{' means JSON).
nlohmann::json parse_config_text(const std::string& text, const std::string& origin);
RunConfig run_config_from_json(const nlohmann::json& j, const std::string& origin);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

}  // namespace gait
