#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbqa/encoder.hpp"
#include "testutil.hpp"

using namespace kbqa;
using encoder::EncoderConfig;
using encoder::Vocabulary;

TEST_CASE("tokenize applies the stripping rules") {
    auto t = encoder::tokenize("Who plays London Tipton?");
    CHECK(t == std::vector<std::string>{"who", "plays", "london", "tipton"});
    CHECK(encoder::tokenize("a") == std::vector<std::string>{"a"});
    CHECK(encoder::tokenize("Don't, STOP!") == std::vector<std::string>{"dont", "stop"});
    CHECK_THROWS_AS(encoder::tokenize("?!.,"), std::invalid_argument);
    CHECK_THROWS_AS(encoder::tokenize(""), std::invalid_argument);
}

TEST_CASE("tokenize is idempotent on its own output") {
    Rng rng(77);
    const std::string charset = "abcXYZ0 .,?!'\"  z";
    for (int trial = 0; trial < 100; ++trial) {
        std::string text;
        for (int i = 0; i < 40; ++i) text += charset[rng.uniform_int(charset.size())];
        std::vector<std::string> first;
        try {
            first = encoder::tokenize(text);
        } catch (const std::invalid_argument&) {
            continue;  // nothing survived stripping
        }
        std::string joined;
        for (const auto& tok : first) joined += tok + " ";
        CHECK(encoder::tokenize(joined) == first);
    }
}

TEST_CASE("vocabulary reserves pad and unk") {
    Vocabulary v;
    CHECK(v.size() == 2);
    CHECK(v.id("missing") == Vocabulary::kUnk);
    int a = v.add("alpha");
    CHECK(a == 2);
    CHECK(v.add("alpha") == 2);
    CHECK(v.id("alpha") == 2);
    CHECK(v.token(0) == "<pad>");
    CHECK(v.token(1) == "<unk>");
}

TEST_CASE("embed_tokens picks table rows, unknown tokens hit the unk row") {
    Vocabulary vocab;
    vocab.add("red");
    vocab.add("blue");
    ModelParameters params;
    Rng rng(1);
    encoder::add_encoder_parameters(params, vocab, {4, 6}, rng);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    auto ids = encoder::to_ids(vocab, {"blue", "martian"});
    TensorId emb = encoder::embed_tokens(tape, binding, ids);
    const Tensor& table = params.get("encoder.embed");
    const Tensor& out = tape.value(emb);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(out.at(0, j) == table.at(3, j));                  // "blue" row
        CHECK(out.at(1, j) == table.at(Vocabulary::kUnk, j));   // oov
    }
}

TEST_CASE("word vectors file round trip seeds the table bit-exactly") {
    auto path = std::filesystem::temp_directory_path() / "kbqa_vectors.txt";
    {
        std::ofstream out(path);
        out << "red 0.125 -0.5 0.75\n";
        out << "blue 1.5 2.25 -3.125\n";
        out << "green 0 0.0625 9\n";
        out << "yellow -1 2 -3\n";
        out << "cyan 4 5 6\n";
    }
    auto wv = encoder::load_word_vectors(path);
    REQUIRE(wv.tokens.size() == 5);
    REQUIRE(wv.table.cols() == 3);

    Vocabulary vocab;
    for (const auto& t : wv.tokens) vocab.add(t);
    ModelParameters params;
    Rng rng(2);
    encoder::add_encoder_parameters(params, vocab, {3, 4}, rng, &wv);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    auto ids = encoder::to_ids(vocab, wv.tokens);
    const Tensor& out = tape.value(encoder::embed_tokens(tape, binding, ids));
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(out.at(r, j) == wv.table.at(r, j));
    }
}

TEST_CASE("encode: q equals the last token vector, dimensions hold") {
    Vocabulary vocab;
    vocab.add("one");
    vocab.add("two");
    vocab.add("three");
    ModelParameters params;
    Rng rng(3);
    EncoderConfig cfg{5, 8};
    encoder::add_encoder_parameters(params, vocab, cfg, rng);

    for (std::size_t len : {std::size_t(1), std::size_t(3)}) {
        std::vector<int> ids(len, 2);
        auto enc = encoder::encode_values(params, ids, cfg);
        CHECK(enc.token_vectors.size() == len);
        for (const Tensor& h : enc.token_vectors) CHECK(h.size() == 8);
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(enc.question_vector[j] == enc.token_vectors.back()[j]);
        }
    }
}

TEST_CASE("encode is deterministic") {
    Vocabulary vocab;
    vocab.add("x");
    vocab.add("y");
    ModelParameters params;
    Rng rng(4);
    EncoderConfig cfg{4, 6};
    encoder::add_encoder_parameters(params, vocab, cfg, rng);
    auto a = encoder::encode_values(params, {2, 3, 2}, cfg);
    auto b = encoder::encode_values(params, {2, 3, 2}, cfg);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(a.token_vectors[t][j] == b.token_vectors[t][j]);
        }
    }
}

TEST_CASE("odd hidden size is a configuration error") {
    Vocabulary vocab;
    ModelParameters params;
    Rng rng(5);
    CHECK_THROWS_AS(encoder::add_encoder_parameters(params, vocab, {4, 7}, rng), ConfigError);
}

// d = 4, l = 3, small fixed weights: the production encoding must match a
// step-by-step recurrence computed with plain doubles.
TEST_CASE("encode matches an independent recurrence") {
    Vocabulary vocab;
    vocab.add("t0");
    vocab.add("t1");
    vocab.add("t2");
    ModelParameters params;
    Rng rng(6);
    EncoderConfig cfg{3, 4};  // word dim 3, hidden 4 (2 per direction)
    encoder::add_encoder_parameters(params, vocab, cfg, rng);

    std::vector<int> ids{2, 3, 4};
    auto enc = encoder::encode_values(params, ids, cfg);

    using Vec = std::vector<double>;
    auto matv = [](const Tensor& w, const Vec& x) {
        Vec out(w.rows(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) out[i] += w.at(i, j) * x[j];
        }
        return out;
    };
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

    const Tensor& table = params.get("encoder.embed");
    auto embed_row = [&](int id) {
        Vec x(3);
        for (std::size_t j = 0; j < 3; ++j) x[j] = table.at(static_cast<std::size_t>(id), j);
        return x;
    };

    auto run_direction = [&](const std::string& dir, const std::vector<int>& order) {
        Vec h(2, 0.0), c(2, 0.0);
        std::vector<Vec> states(3);
        for (int pos : order) {
            Vec x = embed_row(ids[static_cast<std::size_t>(pos)]);
            auto gate = [&](const char* gname) {
                Vec wx = matv(params.get("encoder." + dir + ".W" + gname), x);
                Vec uh = matv(params.get("encoder." + dir + ".U" + gname), h);
                const Tensor& b = params.get("encoder." + dir + ".b" + gname);
                Vec out(2);
                for (std::size_t j = 0; j < 2; ++j) out[j] = wx[j] + uh[j] + b[j];
                return out;
            };
            Vec ig = gate("i"), fg = gate("f"), gg = gate("g"), og = gate("o");
            for (std::size_t j = 0; j < 2; ++j) {
                c[j] = sig(fg[j]) * c[j] + sig(ig[j]) * std::tanh(gg[j]);
                h[j] = sig(og[j]) * std::tanh(c[j]);
            }
            states[static_cast<std::size_t>(pos)] = h;
        }
        return states;
    };

    auto fw = run_direction("fw", {0, 1, 2});
    auto bw = run_direction("bw", {2, 1, 0});
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(enc.token_vectors[t][j] - fw[t][j]) < 1e-10);
            CHECK(std::abs(enc.token_vectors[t][j + 2] - bw[t][j]) < 1e-10);
        }
    }
}

TEST_CASE("permuting vocabulary ids with table rows leaves encode unchanged") {
    // Two vocabularies listing the same tokens in different orders; the
    // embedding rows are forced equal per token via a vectors file.
    auto path = std::filesystem::temp_directory_path() / "kbqa_perm_vectors.txt";
    {
        std::ofstream out(path);
        out << "aa 0.1 0.2 0.3\n"
            << "bb -0.4 0.5 -0.6\n"
            << "cc 0.7 -0.8 0.9\n";
    }
    auto wv = encoder::load_word_vectors(path);

    Vocabulary v1;
    v1.add("aa");
    v1.add("bb");
    v1.add("cc");
    Vocabulary v2;
    v2.add("cc");
    v2.add("aa");
    v2.add("bb");

    EncoderConfig cfg{3, 4};
    // Identical recurrence weights for both models: same rng seed but the
    // embedding table (which differs in row order) is overwritten from wv.
    ModelParameters p1, p2;
    Rng r1(8), r2(8);
    encoder::add_encoder_parameters(p1, v1, cfg, r1, &wv);
    encoder::add_encoder_parameters(p2, v2, cfg, r2, &wv);

    std::vector<std::string> sentence{"bb", "cc", "aa"};
    auto e1 = encoder::encode_values(p1, encoder::to_ids(v1, sentence), cfg);
    auto e2 = encoder::encode_values(p2, encoder::to_ids(v2, sentence), cfg);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t j = 0; j < 4; ++j) {
            // same values flow through the same op sequence: bit-identical
            CHECK(e1.token_vectors[t][j] == e2.token_vectors[t][j]);
        }
    }
}
