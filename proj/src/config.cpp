#include "kbqa/config.hpp"

#include <fstream>
#include <sstream>

namespace kbqa::config {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected a boolean, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings) {
    for (const auto& [key, value] : settings) {
        try {
            if (key == "lr") cfg.train.learning_rate = static_cast<Real>(std::stod(value));
            else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
            else if (key == "steps") cfg.train.steps = std::stoi(value);
            else if (key == "lambda") cfg.train.lambda = static_cast<Real>(std::stod(value));
            else if (key == "hidden_dim") cfg.train.hidden_dim = std::stoull(value);
            else if (key == "word_dim") cfg.train.word_dim = std::stoull(value);
            else if (key == "epochs") cfg.train.epochs = std::stoi(value);
            else if (key == "patience") cfg.train.patience = std::stoi(value);
            else if (key == "seed") cfg.train.seed = std::stoull(value);
            else if (key == "use_teacher") cfg.train.use_teacher = parse_bool(value);
            else if (key == "use_graph_summary") cfg.train.use_graph_summary = parse_bool(value);
            else if (key == "clip_norm") cfg.train.clip_norm = static_cast<Real>(std::stod(value));
            else if (key == "threshold") cfg.train.threshold = static_cast<Real>(std::stod(value));
            else if (key == "update_mlp_depth") cfg.train.update_mlp_depth = std::stoi(value);
            else if (key == "subgraph_mode") cfg.subgraph.mode = value;
            else if (key == "ppr_damping") cfg.subgraph.ppr_damping = std::stod(value);
            else if (key == "ppr_max_entities") cfg.subgraph.ppr_max_entities = std::stoll(value);
            else if (key == "graph") cfg.graph_path = value;
            else if (key == "train") cfg.train_path = value;
            else if (key == "dev") cfg.dev_path = value;
            else if (key == "test") cfg.test_path = value;
            else if (key == "word_vectors") cfg.word_vectors_path = value;
            else if (key == "out_dir") cfg.out_dir = value;
            else throw ConfigError("unknown config key: " + key);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for config key " + key + ": '" + value + "'");
        }
    }
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_value_pairs) {
    std::map<std::string, std::string> kv;
    for (const std::string& pair : key_value_pairs) {
        std::size_t eq = pair.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like key=value: " + pair);
        }
        kv[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    apply_settings(cfg, kv);
}

void validate(const RunConfig& cfg, bool need_datasets) {
    std::vector<std::string> problems;
    if (cfg.train.learning_rate <= 0) problems.push_back("lr must be > 0");
    if (cfg.train.batch_size < 1) problems.push_back("batch_size must be >= 1");
    if (cfg.train.steps < 1) problems.push_back("steps must be >= 1");
    if (cfg.train.lambda < 0) problems.push_back("lambda must be >= 0");
    if (cfg.train.hidden_dim == 0 || cfg.train.hidden_dim % 2 != 0) {
        problems.push_back("hidden_dim must be positive and even");
    }
    if (cfg.train.word_dim == 0) problems.push_back("word_dim must be > 0");
    if (cfg.train.epochs < 1) problems.push_back("epochs must be >= 1");
    if (cfg.train.patience < 1) problems.push_back("patience must be >= 1");
    if (cfg.train.threshold < 0 || cfg.train.threshold >= 1) {
        problems.push_back("threshold must be in [0,1)");
    }
    if (cfg.train.update_mlp_depth < 1) problems.push_back("update_mlp_depth must be >= 1");
    if (cfg.subgraph.mode != "nhop" && cfg.subgraph.mode != "ppr") {
        problems.push_back("subgraph_mode must be nhop or ppr");
    }
    if (cfg.subgraph.ppr_damping <= 0 || cfg.subgraph.ppr_damping >= 1) {
        problems.push_back("ppr_damping must be in (0,1)");
    }
    if (cfg.subgraph.ppr_max_entities < 1) problems.push_back("ppr_max_entities must be >= 1");
    if (need_datasets) {
        auto check_path = [&problems](const std::string& p, const char* what) {
            if (p.empty()) {
                problems.push_back(std::string(what) + " path is not set");
            } else if (!std::filesystem::exists(p)) {
                problems.push_back(std::string(what) + " file not found: " + p);
            }
        };
        check_path(cfg.graph_path, "graph");
        check_path(cfg.train_path, "train");
        check_path(cfg.dev_path, "dev");
        if (!cfg.word_vectors_path.empty() && !std::filesystem::exists(cfg.word_vectors_path)) {
            problems.push_back("word_vectors file not found: " + cfg.word_vectors_path);
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const std::string& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::map<std::string, std::string> snapshot(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    auto num = [](auto v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    kv["lr"] = num(cfg.train.learning_rate);
    kv["batch_size"] = num(cfg.train.batch_size);
    kv["steps"] = num(cfg.train.steps);
    kv["lambda"] = num(cfg.train.lambda);
    kv["hidden_dim"] = num(cfg.train.hidden_dim);
    kv["word_dim"] = num(cfg.train.word_dim);
    kv["epochs"] = num(cfg.train.epochs);
    kv["patience"] = num(cfg.train.patience);
    kv["seed"] = num(cfg.train.seed);
    kv["use_teacher"] = cfg.train.use_teacher ? "true" : "false";
    kv["use_graph_summary"] = cfg.train.use_graph_summary ? "true" : "false";
    kv["clip_norm"] = num(cfg.train.clip_norm);
    kv["threshold"] = num(cfg.train.threshold);
    kv["update_mlp_depth"] = num(cfg.train.update_mlp_depth);
    kv["subgraph_mode"] = cfg.subgraph.mode;
    kv["ppr_damping"] = num(cfg.subgraph.ppr_damping);
    kv["ppr_max_entities"] = num(cfg.subgraph.ppr_max_entities);
    kv["graph"] = cfg.graph_path;
    kv["train"] = cfg.train_path;
    kv["dev"] = cfg.dev_path;
    kv["test"] = cfg.test_path;
    kv["word_vectors"] = cfg.word_vectors_path;
    kv["out_dir"] = cfg.out_dir;
    return kv;
}

}  // namespace kbqa::config
