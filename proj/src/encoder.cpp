#include "kbqa/encoder.hpp"

#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kbqa::encoder {

namespace {

constexpr const char* kStrip = ".,?!'\"";

const std::array<const char*, 4> kGates = {"i", "f", "g", "o"};

std::string gate_param(const std::string& dir, const char* gate, const char* kind) {
    return "encoder." + dir + "." + kind + gate;
}

}  // namespace

Vocabulary::Vocabulary() {
    tokens_ = {"<pad>", "<unk>"};
    index_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) != 0; }

std::vector<std::string> tokenize(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("tokenize: empty input");
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        if (std::strchr(kStrip, c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    std::vector<std::string> tokens;
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    if (tokens.empty()) {
        throw std::invalid_argument("tokenize: no tokens remain after stripping punctuation");
    }
    return tokens;
}

std::vector<int> to_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word vectors file: " + path.string());
    WordVectors wv;
    std::vector<Real> flat;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<Real> row;
        double x;
        while (ls >> x) row.push_back(static_cast<Real>(x));
        if (row.empty()) throw ParseError("word vector line has no values", lineno);
        if (dim == 0) {
            dim = row.size();
        } else if (row.size() != dim) {
            throw ParseError("inconsistent word vector dimension", lineno);
        }
        wv.tokens.push_back(token);
        flat.insert(flat.end(), row.begin(), row.end());
    }
    wv.table = Tensor({wv.tokens.size(), dim}, std::move(flat));
    return wv;
}

void add_encoder_parameters(ModelParameters& params, const Vocabulary& vocab,
                            const EncoderConfig& cfg, Rng& rng, const WordVectors* pretrained) {
    if (cfg.hidden_dim % 2 != 0) throw ConfigError("hidden_dim must be even");
    if (cfg.word_dim == 0 || cfg.hidden_dim == 0) throw ConfigError("encoder dims must be > 0");

    Tensor table = uniform_tensor({static_cast<std::size_t>(vocab.size()), cfg.word_dim},
                                  Real(-0.1), Real(0.1), rng);
    if (pretrained) {
        if (pretrained->table.cols() != cfg.word_dim) {
            throw ConfigError("word vectors dimension does not match word_dim");
        }
        for (std::size_t r = 0; r < pretrained->tokens.size(); ++r) {
            if (!vocab.contains(pretrained->tokens[r])) continue;
            int id = vocab.id(pretrained->tokens[r]);
            for (std::size_t j = 0; j < cfg.word_dim; ++j) {
                table.at(static_cast<std::size_t>(id), j) = pretrained->table.at(r, j);
            }
        }
    }
    params.add("encoder.embed", std::move(table));

    std::size_t h = cfg.hidden_dim / 2;
    for (const char* dir : {"fw", "bw"}) {
        for (const char* gate : kGates) {
            params.add(gate_param(dir, gate, "W"), glorot_tensor(h, cfg.word_dim, rng));
            params.add(gate_param(dir, gate, "U"), glorot_tensor(h, h, rng));
            params.add(gate_param(dir, gate, "b"), Tensor({h}));
        }
    }
}

TensorId embed_tokens(Tape& tape, const Binding& binding, const std::vector<int>& token_ids) {
    std::vector<std::int64_t> idx(token_ids.begin(), token_ids.end());
    return tape.gather_rows(binding.id("encoder.embed"), std::move(idx));
}

namespace {

struct GateIds {
    TensorId W, U, b;
};

struct DirectionIds {
    GateIds i, f, g, o;
};

DirectionIds direction_ids(const Binding& binding, const std::string& dir) {
    auto gate = [&](const char* name) {
        return GateIds{binding.id(gate_param(dir, name, "W")),
                       binding.id(gate_param(dir, name, "U")),
                       binding.id(gate_param(dir, name, "b"))};
    };
    return DirectionIds{gate("i"), gate("f"), gate("g"), gate("o")};
}

// One recurrence over `order`; returns the hidden state at each position
// (indexed by original position).
std::vector<TensorId> run_lstm(Tape& tape, const DirectionIds& dir, TensorId inputs,
                               const std::vector<std::size_t>& order, std::size_t h) {
    std::vector<TensorId> hidden(order.size());
    TensorId h_prev = tape.constant(Tensor({h}));
    TensorId c_prev = tape.constant(Tensor({h}));
    auto gate_pre = [&](const GateIds& gids, TensorId x) {
        return tape.add(tape.add(tape.matvec(gids.W, x), tape.matvec(gids.U, h_prev)), gids.b);
    };
    for (std::size_t pos : order) {
        TensorId x = tape.row(inputs, pos);
        TensorId ig = tape.sigmoid_op(gate_pre(dir.i, x));
        TensorId fg = tape.sigmoid_op(gate_pre(dir.f, x));
        TensorId gg = tape.tanh_op(gate_pre(dir.g, x));
        TensorId og = tape.sigmoid_op(gate_pre(dir.o, x));
        TensorId c = tape.add(tape.mul(fg, c_prev), tape.mul(ig, gg));
        TensorId hid = tape.mul(og, tape.tanh_op(c));
        hidden[pos] = hid;
        h_prev = hid;
        c_prev = c;
    }
    return hidden;
}

}  // namespace

Encoded encode(Tape& tape, const Binding& binding, const std::vector<int>& token_ids,
               const EncoderConfig& cfg) {
    if (token_ids.empty()) throw std::invalid_argument("encode: empty token sequence");
    if (cfg.hidden_dim % 2 != 0) throw ConfigError("hidden_dim must be even");
    std::size_t l = token_ids.size();
    std::size_t h = cfg.hidden_dim / 2;

    TensorId inputs = embed_tokens(tape, binding, token_ids);

    std::vector<std::size_t> fwd(l), bwd(l);
    for (std::size_t j = 0; j < l; ++j) {
        fwd[j] = j;
        bwd[j] = l - 1 - j;
    }
    std::vector<TensorId> fstates = run_lstm(tape, direction_ids(binding, "fw"), inputs, fwd, h);
    std::vector<TensorId> bstates = run_lstm(tape, direction_ids(binding, "bw"), inputs, bwd, h);

    Encoded out;
    out.token_vectors.reserve(l);
    for (std::size_t j = 0; j < l; ++j) {
        std::array<TensorId, 2> parts = {fstates[j], bstates[j]};
        out.token_vectors.push_back(tape.concat(parts));
    }
    out.token_matrix = tape.stack_rows(out.token_vectors);
    out.question_vector = out.token_vectors.back();
    return out;
}

EncodedQuestion encode_values(const ModelParameters& params, const std::vector<int>& token_ids,
                              const EncoderConfig& cfg) {
    Tape tape;
    Binding binding = bind_parameters(tape, params);
    Encoded enc = encode(tape, binding, token_ids, cfg);
    EncodedQuestion out;
    out.token_count = token_ids.size();
    for (TensorId id : enc.token_vectors) out.token_vectors.push_back(tape.value(id));
    out.question_vector = tape.value(enc.question_vector);
    return out;
}

}  // namespace kbqa::encoder
