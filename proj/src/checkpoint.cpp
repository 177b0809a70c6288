#include "kbqa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace kbqa::checkpoint {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kMagic = "kbqa-checkpoint-version";
constexpr const char* kPayloadMarker = "---";

std::string shape_string(const Tensor& t) {
    std::string out;
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
        if (i > 0) out += 'x';
        out += std::to_string(t.shape()[i]);
    }
    return out.empty() ? "scalar" : out;
}

std::vector<std::size_t> parse_shape(const std::string& s) {
    if (s == "scalar") return {};
    std::vector<std::size_t> shape;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) shape.push_back(std::stoull(part));
    return shape;
}

// Training config fields round-tripped through the manifest.
void config_to_manifest(const train::TrainConfig& cfg, std::ostream& out) {
    out << "train.lr=" << cfg.learning_rate << "\n";
    out << "train.batch_size=" << cfg.batch_size << "\n";
    out << "train.steps=" << cfg.steps << "\n";
    out << "train.lambda=" << cfg.lambda << "\n";
    out << "train.hidden_dim=" << cfg.hidden_dim << "\n";
    out << "train.word_dim=" << cfg.word_dim << "\n";
    out << "train.epochs=" << cfg.epochs << "\n";
    out << "train.patience=" << cfg.patience << "\n";
    out << "train.seed=" << cfg.seed << "\n";
    out << "train.use_teacher=" << (cfg.use_teacher ? 1 : 0) << "\n";
    out << "train.use_graph_summary=" << (cfg.use_graph_summary ? 1 : 0) << "\n";
    out << "train.clip_norm=" << cfg.clip_norm << "\n";
    out << "train.threshold=" << cfg.threshold << "\n";
    out << "train.update_mlp_depth=" << cfg.update_mlp_depth << "\n";
}

void manifest_to_config(const std::map<std::string, std::string>& kv, train::TrainConfig& cfg) {
    auto get = [&kv](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError(std::string("checkpoint manifest missing ") + key);
        return it->second;
    };
    cfg.learning_rate = static_cast<Real>(std::stod(get("train.lr")));
    cfg.batch_size = std::stoi(get("train.batch_size"));
    cfg.steps = std::stoi(get("train.steps"));
    cfg.lambda = static_cast<Real>(std::stod(get("train.lambda")));
    cfg.hidden_dim = std::stoull(get("train.hidden_dim"));
    cfg.word_dim = std::stoull(get("train.word_dim"));
    cfg.epochs = std::stoi(get("train.epochs"));
    cfg.patience = std::stoi(get("train.patience"));
    cfg.seed = std::stoull(get("train.seed"));
    cfg.use_teacher = get("train.use_teacher") == "1";
    cfg.use_graph_summary = get("train.use_graph_summary") == "1";
    cfg.clip_norm = static_cast<Real>(std::stod(get("train.clip_norm")));
    cfg.threshold = static_cast<Real>(std::stod(get("train.threshold")));
    cfg.update_mlp_depth = std::stoi(get("train.update_mlp_depth"));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const train::KbqaModel& model,
                     const std::map<std::string, std::string>& config_snapshot,
                     std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());

    std::size_t payload_bytes = 0;
    for (const auto& [name, tensor] : model.params.entries()) {
        payload_bytes += tensor.size() * sizeof(Real);
    }

    out << kMagic << "=" << kFormatVersion << "\n";
    out << "real_bits=" << real_bits << "\n";
    out << "seed=" << seed << "\n";
    config_to_manifest(model.cfg, out);
    for (const auto& [k, v] : config_snapshot) out << "config." << k << "=" << v << "\n";
    out << "vocab_size=" << model.vocab.size() << "\n";
    for (int i = 0; i < model.vocab.size(); ++i) {
        out << "vocab." << i << "=" << model.vocab.token(i) << "\n";
    }
    out << "relation_count=" << model.relation_names.size() << "\n";
    for (std::size_t i = 0; i < model.relation_names.size(); ++i) {
        out << "relation." << i << "=" << model.relation_names[i] << "\n";
    }
    out << "param_count=" << model.params.count() << "\n";
    for (std::size_t i = 0; i < model.params.count(); ++i) {
        out << "param." << i << ".name=" << model.params.name(i) << "\n";
        out << "param." << i << ".shape=" << shape_string(model.params.tensor(i)) << "\n";
    }
    out << "payload_bytes=" << payload_bytes << "\n";
    out << kPayloadMarker << "\n";
    for (const auto& [name, tensor] : model.params.entries()) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(Real)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());

    std::map<std::string, std::string> kv;
    std::string line;
    bool saw_marker = false;
    while (std::getline(in, line)) {
        if (line == kPayloadMarker) {
            saw_marker = true;
            break;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed checkpoint manifest line");
        kv.emplace(line.substr(0, eq), line.substr(eq + 1));
    }
    if (!saw_marker) throw DataError("checkpoint manifest has no payload marker");

    auto get = [&kv](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("checkpoint manifest missing " + key);
        return it->second;
    };

    if (kv.find(kMagic) == kv.end() || std::stoi(get(kMagic)) != kFormatVersion) {
        throw VersionError("unsupported checkpoint format version");
    }
    if (std::stoi(get("real_bits")) != real_bits) {
        throw VersionError("checkpoint numeric width does not match this build");
    }

    LoadedCheckpoint loaded;
    loaded.seed = std::stoull(get("seed"));
    manifest_to_config(kv, loaded.model.cfg);
    for (const auto& [k, v] : kv) {
        if (k.rfind("config.", 0) == 0) loaded.config_snapshot[k.substr(7)] = v;
    }

    int vocab_size = std::stoi(get("vocab_size"));
    for (int i = 2; i < vocab_size; ++i) {  // ids 0/1 are the reserved tokens
        loaded.model.vocab.add(get("vocab." + std::to_string(i)));
    }
    if (loaded.model.vocab.size() != vocab_size) {
        throw DataError("checkpoint vocabulary table is inconsistent");
    }

    std::size_t relation_count = std::stoull(get("relation_count"));
    for (std::size_t i = 0; i < relation_count; ++i) {
        loaded.model.relation_names.push_back(get("relation." + std::to_string(i)));
    }

    std::size_t param_count = std::stoull(get("param_count"));
    std::size_t expected_bytes = 0;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> table;
    for (std::size_t i = 0; i < param_count; ++i) {
        std::string name = get("param." + std::to_string(i) + ".name");
        std::vector<std::size_t> shape =
            parse_shape(get("param." + std::to_string(i) + ".shape"));
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        expected_bytes += n * sizeof(Real);
        table.emplace_back(std::move(name), std::move(shape));
    }
    std::size_t declared_bytes = std::stoull(get("payload_bytes"));
    if (declared_bytes != expected_bytes) {
        throw ShapeTableError("checkpoint shape table does not match payload size");
    }

    for (auto& [name, shape] : table) {
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(Real)));
        if (static_cast<std::size_t>(in.gcount()) != t.size() * sizeof(Real)) {
            throw TruncatedPayloadError("checkpoint payload is truncated");
        }
        loaded.model.params.add(name, std::move(t));
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw ShapeTableError("checkpoint payload is longer than the shape table declares");
    }
    return loaded;
}

}  // namespace kbqa::checkpoint
