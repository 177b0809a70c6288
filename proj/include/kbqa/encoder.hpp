#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbqa/model.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa::encoder {

// Token vocabulary with reserved ids: 0 = padding, 1 = unknown.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary();
    int add(const std::string& token);       // returns existing id if present
    int id(const std::string& token) const;  // kUnk if absent
    bool contains(const std::string& token) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Lowercases, strips .,?!'" and splits on whitespace. Throws
// std::invalid_argument when nothing survives.
std::vector<std::string> tokenize(const std::string& text);

std::vector<int> to_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens);

// Optional pretrained vectors: one token per line, values single-space
// separated after it.
struct WordVectors {
    std::vector<std::string> tokens;
    Tensor table;  // tokens.size() x dim
};
WordVectors load_word_vectors(const std::filesystem::path& path);

struct EncoderConfig {
    std::size_t word_dim = 300;
    std::size_t hidden_dim = 128;  // must be even: two directions of d/2
};

// Registers the embedding table and both recurrence directions. Rows of the
// embedding table whose token appears in `pretrained` are copied from it.
void add_encoder_parameters(ModelParameters& params, const Vocabulary& vocab,
                            const EncoderConfig& cfg, Rng& rng,
                            const WordVectors* pretrained = nullptr);

// Token-id rows of the embedding table, on tape.
TensorId embed_tokens(Tape& tape, const Binding& binding, const std::vector<int>& token_ids);

// Question encoding on tape: h_j is [forward_j ; backward_j] and q = h_l.
struct Encoded {
    std::vector<TensorId> token_vectors;  // h_1..h_l, each dim d
    TensorId token_matrix;                // l x d
    TensorId question_vector;             // q = h_l
};
Encoded encode(Tape& tape, const Binding& binding, const std::vector<int>& token_ids,
               const EncoderConfig& cfg);

// Plain-value view of an encoding (runs a private tape).
struct EncodedQuestion {
    std::vector<Tensor> token_vectors;
    Tensor question_vector;
    std::size_t token_count = 0;
};
EncodedQuestion encode_values(const ModelParameters& params, const std::vector<int>& token_ids,
                              const EncoderConfig& cfg);

}  // namespace kbqa::encoder
