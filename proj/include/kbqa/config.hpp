#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kbqa/train.hpp"

namespace kbqa::config {

// Everything a command run needs. Precedence when assembling:
// command-line override > config file > built-in defaults.
struct RunConfig {
    train::TrainConfig train;
    train::SubgraphSettings subgraph;
    std::string graph_path;
    std::string train_path;
    std::string dev_path;
    std::string test_path;
    std::string word_vectors_path;  // optional
    std::string out_dir = "out";
};

// Parses `key=value` lines; blank lines and `#` comments are skipped.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

// Applies key/value pairs onto a config. Unknown keys or unparsable values
// raise ConfigError.
void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings);
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_value_pairs);

// Collects every validation failure before reporting, so a bad config is
// diagnosed in one pass.
void validate(const RunConfig& cfg, bool need_datasets);

// Flat snapshot of the effective config, echoed into output artifacts.
std::map<std::string, std::string> snapshot(const RunConfig& cfg);

}  // namespace kbqa::config
