#include <doctest.h>

#include <cmath>

#include "kbqa/reasoner.hpp"
#include "reference_model.hpp"
#include "testutil.hpp"

using namespace kbqa;
using reasoner::ReasonerConfig;
using testutil::make_subgraph;
using testutil::random_tensor;

namespace {

ModelParameters reasoner_params(std::int64_t relations, const ReasonerConfig& cfg,
                                std::uint64_t seed) {
    ModelParameters params;
    Rng rng(seed);
    reasoner::add_reasoner_parameters(params, relations, cfg, rng);
    return params;
}

void set_identity(Tensor& t) {
    REQUIRE(t.rows() == t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) t.at(i, j) = (i == j) ? 1 : 0;
    }
}

// Random token matrix + question vector standing in for an encoder output.
encoder::Encoded fake_question(Tape& tape, std::size_t tokens, std::size_t d, Rng& rng) {
    encoder::Encoded enc;
    for (std::size_t t = 0; t < tokens; ++t) {
        enc.token_vectors.push_back(tape.leaf(random_tensor({d}, rng, -0.5, 0.5)));
    }
    enc.token_matrix = tape.stack_rows(enc.token_vectors);
    enc.question_vector = enc.token_vectors.back();
    return enc;
}

}  // namespace

TEST_CASE("init embeddings: single triple with identity projection") {
    auto sg = make_subgraph(2, 1, {{0, 0, 1}}, {0});  // a -r-> b (+ inverse)
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 1);
    set_identity(params.get("reasoner.init.W"));

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    const Tensor& rows = tape.value(reasoner::init_entity_embeddings(tape, binding, sg));
    const Tensor& rel = params.get("reasoner.relations");
    for (std::size_t j = 0; j < 4; ++j) {
        // b is the tail of (a, r, b); a is the tail of the inverse edge
        CHECK(rows.at(1, j) == doctest::Approx(sigmoid(Tensor::scalar(rel.at(0, j)))[0]).epsilon(1e-12));
        CHECK(rows.at(0, j) == doctest::Approx(sigmoid(Tensor::scalar(rel.at(1, j)))[0]).epsilon(1e-12));
    }
}

TEST_CASE("init embeddings: identical incident relation multisets give identical rows") {
    // c -r0-> a, d -r0-> b : a and b see the same multiset {r0}
    auto sg = make_subgraph(4, 1, {{2, 0, 0}, {3, 0, 1}}, {2});
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 2);
    Tape tape;
    Binding binding = bind_parameters(tape, params);
    const Tensor& rows = tape.value(reasoner::init_entity_embeddings(tape, binding, sg));
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(rows.at(0, j) == rows.at(1, j));
        CHECK(rows.at(2, j) == rows.at(3, j));  // both heads see {r0^-1}
    }
}

TEST_CASE("init embeddings require materialized inverses; empty rows sit at one half") {
    kg::KnowledgeSubgraph raw;
    raw.entities.add_or_get("a");
    raw.relation_names = {"r"};
    raw.inverse_relation = {false};
    raw.topic_ids = {0};
    raw.rebuild_incident();
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(2, cfg, 3);
    Tape tape;
    Binding binding = bind_parameters(tape, params);
    CHECK_THROWS_AS(reasoner::init_entity_embeddings(tape, binding, raw), std::invalid_argument);

    auto inv = kg::add_inverse_relations(raw);
    const Tensor& rows = tape.value(reasoner::init_entity_embeddings(tape, binding, inv));
    for (std::size_t j = 0; j < 4; ++j) CHECK(rows.at(0, j) == 0.5);  // sigma(0)
}

TEST_CASE("init embeddings match a naive double loop on a random subgraph") {
    Rng rng(47);
    std::vector<std::array<std::int64_t, 3>> triples;
    for (int i = 0; i < 25; ++i) {
        triples.push_back({static_cast<std::int64_t>(rng.uniform_int(10)),
                           static_cast<std::int64_t>(rng.uniform_int(3)),
                           static_cast<std::int64_t>(rng.uniform_int(10))});
    }
    auto sg = make_subgraph(10, 3, triples, {0});
    ReasonerConfig cfg{6, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 4);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    const Tensor& rows = tape.value(reasoner::init_entity_embeddings(tape, binding, sg));

    auto ref = reference::init_entities(sg, reference::tensor_to_mat(params.get("reasoner.relations")),
                                        reference::tensor_to_mat(params.get("reasoner.init.W")), 6);
    for (std::size_t e = 0; e < 10; ++e) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(std::abs(rows.at(e, j) - ref[e][j]) < 1e-10);
        }
    }
}

TEST_CASE("aggregate_graph trivial cases") {
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(2, cfg, 5);
    Rng rng(6);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    Tensor q = random_tensor({4}, rng);

    // single entity: summary equals its embedding, attention [1]
    Tensor row = random_tensor({1, 4}, rng);
    auto [sum1, attn1] = reasoner::aggregate_graph(tape, binding, tape.leaf(row), tape.leaf(q));
    CHECK(tape.value(attn1)[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(tape.value(sum1)[j] == doctest::Approx(row.at(0, j)).epsilon(1e-12));
    }

    // identical rows: uniform attention, summary equals the shared row
    Tensor same({3, 4});
    for (std::size_t e = 0; e < 3; ++e) {
        for (std::size_t j = 0; j < 4; ++j) same.at(e, j) = row.at(0, j);
    }
    auto [sum3, attn3] = reasoner::aggregate_graph(tape, binding, tape.leaf(same), tape.leaf(q));
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(tape.value(attn3)[e] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(tape.value(sum3)[j] == doctest::Approx(row.at(0, j)).epsilon(1e-12));
    }
}

TEST_CASE("aggregate_graph matches the naive oracle") {
    ReasonerConfig cfg{5, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(2, cfg, 7);
    Rng rng(8);
    Tensor entities = random_tensor({5, 5}, rng);
    Tensor q = random_tensor({5}, rng);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    auto [sum, attn] = reasoner::aggregate_graph(tape, binding, tape.leaf(entities), tape.leaf(q));

    auto ref = reference::aggregate(reference::tensor_to_mat(entities), reference::tensor_to_vec(q),
                                    reference::tensor_to_mat(params.get("reasoner.gate.W")),
                                    reference::tensor_to_vec(params.get("reasoner.gate.b")));
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(tape.value(sum)[j] - ref.first[j]) < 1e-10);
    for (std::size_t e = 0; e < 5; ++e) CHECK(std::abs(tape.value(attn)[e] - ref.second[e]) < 1e-10);
}

TEST_CASE("next_instruction trivial and oracle cases") {
    ReasonerConfig cfg{2, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(2, cfg, 9);
    Rng rng(10);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    TensorId q = tape.leaf(random_tensor({2}, rng));
    TensorId prev = q;
    TensorId summary = tape.leaf(random_tensor({2}, rng));

    // single token: instruction equals it, attention [1]
    TensorId h1 = tape.leaf(random_tensor({2}, rng));
    std::array<TensorId, 1> one{h1};
    TensorId hm1 = tape.stack_rows(one);
    auto [i1, a1] = reasoner::next_instruction(tape, binding, prev, q, summary, hm1, 1, true);
    CHECK(tape.value(a1)[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(tape.value(i1)[j] == doctest::Approx(tape.value(h1)[j]).epsilon(1e-12));
    }

    // identical tokens: uniform attention, instruction equals the shared token
    std::array<TensorId, 3> rep{h1, h1, h1};
    TensorId hm3 = tape.stack_rows(rep);
    auto [i3, a3] = reasoner::next_instruction(tape, binding, prev, q, summary, hm3, 1, true);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(tape.value(a3)[t] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(tape.value(i3)[j] == doctest::Approx(tape.value(h1)[j]).epsilon(1e-10));
    }

    // 3 distinct tokens, d = 2: direct evaluation of the three equations
    Tensor tok = random_tensor({3, 2}, rng);
    auto [ins, attn] = reasoner::next_instruction(tape, binding, prev, q, summary,
                                                  tape.leaf(tok), 1, true);
    auto ref = reference::instruction(
        reference::tensor_to_vec(tape.value(prev)), reference::tensor_to_vec(tape.value(q)),
        reference::tensor_to_vec(tape.value(summary)), reference::tensor_to_mat(tok),
        reference::tensor_to_mat(params.get("reasoner.step1.W")),
        reference::tensor_to_vec(params.get("reasoner.step1.b")),
        reference::tensor_to_mat(params.get("reasoner.attn.W")), true);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(tape.value(ins)[j] - ref.first[j]) < 1e-10);
    for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(tape.value(attn)[t] - ref.second[t]) < 1e-10);
}

TEST_CASE("reason_step: zero-mass in-neighborhoods stay zero and symmetry holds") {
    // two entities, symmetric edges via one relation
    auto sg = make_subgraph(2, 1, {{0, 0, 1}, {1, 0, 0}}, {0});
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 11);
    Rng rng(12);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    TensorId instruction = tape.leaf(random_tensor({4}, rng));
    Tensor prev_embed({2, 4});
    for (std::size_t j = 0; j < 4; ++j) {
        prev_embed.at(0, j) = prev_embed.at(1, j) = static_cast<Real>(0.3);
    }
    Tensor symmetric_p = Tensor::vector({static_cast<Real>(0.5), static_cast<Real>(0.5)});
    auto [updated, dist] = reasoner::reason_step(tape, binding, instruction,
                                                 tape.leaf(prev_embed), tape.leaf(symmetric_p),
                                                 sg, 1);
    // fully symmetric graph + symmetric p: the distribution stays symmetric
    CHECK(tape.value(dist)[0] == doctest::Approx(tape.value(dist)[1]).epsilon(1e-12));

    // all-zero previous mass: the neighborhood term vanishes
    Tape t2;
    Binding b2 = bind_parameters(t2, params);
    Tensor zero_p = Tensor::vector({0, 0});
    TensorId ins2 = t2.leaf(tape.value(instruction));
    auto [upd2, dist2] = reasoner::reason_step(t2, b2, ins2, t2.leaf(prev_embed),
                                               t2.leaf(zero_p), sg, 1);
    // compare against the update computed with an explicitly zero neighborhood
    auto ref = reference::reason(reference::tensor_to_vec(t2.value(ins2)),
                                 reference::tensor_to_mat(prev_embed),
                                 {0.0, 0.0}, sg,
                                 reference::tensor_to_mat(params.get("reasoner.relations")),
                                 reference::tensor_to_mat(params.get("reasoner.match.W")),
                                 {{reference::tensor_to_mat(params.get("reasoner.update1.W")),
                                   reference::tensor_to_vec(params.get("reasoner.update1.b"))}},
                                 reference::tensor_to_vec(params.get("reasoner.score.w")));
    for (std::size_t e = 0; e < 2; ++e) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::abs(t2.value(upd2).at(e, j) - ref.first[e][j]) < 1e-12);
        }
    }
}

TEST_CASE("reason_step matches the per-triple loop oracle") {
    auto sg = make_subgraph(3, 2, {{0, 0, 1}, {1, 1, 2}, {0, 1, 2}}, {0});
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 13);
    Rng rng(14);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    Tensor instruction = random_tensor({4}, rng);
    Tensor prev = random_tensor({3, 4}, rng, 0, 1);
    Tensor p = testutil::random_simplex(3, rng);
    auto [updated, dist] = reasoner::reason_step(tape, binding, tape.leaf(instruction),
                                                 tape.leaf(prev), tape.leaf(p), sg, 1);
    auto ref = reference::reason(reference::tensor_to_vec(instruction),
                                 reference::tensor_to_mat(prev), reference::tensor_to_vec(p), sg,
                                 reference::tensor_to_mat(params.get("reasoner.relations")),
                                 reference::tensor_to_mat(params.get("reasoner.match.W")),
                                 {{reference::tensor_to_mat(params.get("reasoner.update1.W")),
                                   reference::tensor_to_vec(params.get("reasoner.update1.b"))}},
                                 reference::tensor_to_vec(params.get("reasoner.score.w")));
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(std::abs(tape.value(dist)[e] - ref.second[e]) < 1e-10);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::abs(tape.value(updated).at(e, j) - ref.first[e][j]) < 1e-10);
        }
    }
}

TEST_CASE("forward produces a well-formed trace on a star graph") {
    auto sg = make_subgraph(4, 2, {{0, 0, 1}, {0, 0, 2}, {0, 1, 3}}, {0});
    ReasonerConfig cfg{6, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 15);
    Rng rng(16);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    encoder::Encoded enc = fake_question(tape, 3, 6, rng);
    auto pass = reasoner::forward(tape, binding, enc, sg, cfg);

    CHECK(pass.trace.steps.size() == 2);
    CHECK(pass.step_distributions.size() == 2);
    const Tensor& p1 = pass.trace.steps[1].entity_distribution;
    Real total = 0;
    for (std::size_t e = 0; e < 4; ++e) {
        CHECK(p1[e] >= 0);
        total += p1[e];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    // step 0 carries the uniform topic mass and i^(0) = q
    CHECK(pass.trace.steps[0].entity_distribution[0] == 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(pass.trace.steps[0].instruction[j] == tape.value(enc.question_vector)[j]);
    }
    // n reasoning steps consumed exactly n instruction generations
    CHECK(pass.trace.steps[1].token_attention.size() == 3);
    CHECK(pass.trace.steps[0].token_attention.size() == 0);
}

TEST_CASE("forward requires a topic in the subgraph") {
    auto sg = make_subgraph(2, 1, {{0, 0, 1}}, {});
    ReasonerConfig cfg{4, 1, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 17);
    Rng rng(18);
    Tape tape;
    Binding binding = bind_parameters(tape, params);
    encoder::Encoded enc = fake_question(tape, 2, 4, rng);
    CHECK_THROWS_AS(reasoner::forward(tape, binding, enc, sg, cfg), std::invalid_argument);
}

TEST_CASE("ablated instructions ignore the subgraph bit-exactly") {
    auto sg_a = make_subgraph(3, 2, {{0, 0, 1}, {1, 1, 2}}, {0});
    auto sg_b = make_subgraph(5, 2, {{0, 1, 3}, {3, 0, 4}, {0, 0, 2}, {2, 1, 1}}, {0});
    ReasonerConfig cfg{6, 2, false, 1, 0.5};
    ModelParameters params = reasoner_params(4, cfg, 19);

    auto run = [&](const kg::KnowledgeSubgraph& sg, std::vector<Tensor>& instructions) {
        Tape tape;
        Binding binding = bind_parameters(tape, params);
        Rng rng(20);  // identical fake encoder output both times
        encoder::Encoded enc = fake_question(tape, 4, 6, rng);
        auto pass = reasoner::forward(tape, binding, enc, sg, cfg);
        for (const auto& s : pass.trace.steps) instructions.push_back(s.instruction);
    };
    std::vector<Tensor> ia, ib;
    run(sg_a, ia);
    run(sg_b, ib);
    REQUIRE(ia.size() == ib.size());
    for (std::size_t k = 0; k < ia.size(); ++k) {
        for (std::size_t j = 0; j < 6; ++j) CHECK(ia[k][j] == ib[k][j]);
    }
}

TEST_CASE("graph summary makes second instructions diverge on a witness pair") {
    auto sg_a = make_subgraph(3, 2, {{0, 0, 1}, {1, 1, 2}}, {0});
    auto sg_b = make_subgraph(3, 2, {{0, 1, 1}, {1, 1, 2}, {0, 0, 2}}, {0});
    ReasonerConfig cfg{6, 2, true, 1, 0.5};
    ModelParameters params = reasoner_params(4, cfg, 21);

    auto second_instruction = [&](const kg::KnowledgeSubgraph& sg) {
        Tape tape;
        Binding binding = bind_parameters(tape, params);
        Rng rng(22);
        encoder::Encoded enc = fake_question(tape, 4, 6, rng);
        auto pass = reasoner::forward(tape, binding, enc, sg, cfg);
        return pass.trace.steps[2].instruction;
    };
    Tensor a = second_instruction(sg_a);
    Tensor b = second_instruction(sg_b);
    Real diff = 0;
    for (std::size_t j = 0; j < 6; ++j) diff = std::max(diff, std::abs(a[j] - b[j]));
    CHECK(diff > 1e-9);
}

TEST_CASE("full forward matches the sequential reference on a chain") {
    auto sg = make_subgraph(3, 2, {{0, 0, 1}, {1, 1, 2}}, {0});
    ReasonerConfig cfg{6, 2, true, 1, 0.5};
    ModelParameters params = reasoner_params(sg.relation_count(), cfg, 23);

    Tape tape;
    Binding binding = bind_parameters(tape, params);
    Rng rng(24);
    encoder::Encoded enc = fake_question(tape, 3, 6, rng);
    auto pass = reasoner::forward(tape, binding, enc, sg, cfg);

    reference::Mat tokens = reference::tensor_to_mat(tape.value(enc.token_matrix));
    reference::Vec q = reference::tensor_to_vec(tape.value(enc.question_vector));
    auto ref = reference::forward(params, tokens, q, sg, cfg.steps, cfg.use_graph_summary,
                                  cfg.update_mlp_depth);

    REQUIRE(ref.steps.size() == pass.trace.steps.size());
    for (std::size_t k = 0; k < ref.steps.size(); ++k) {
        const auto& got = pass.trace.steps[k];
        const auto& want = ref.steps[k];
        for (std::size_t e = 0; e < 3; ++e) {
            CHECK(std::abs(got.entity_distribution[e] - want.distribution[e]) < 1e-9);
            for (std::size_t j = 0; j < 6; ++j) {
                CHECK(std::abs(got.entity_embeddings.at(e, j) - want.entities[e][j]) < 1e-9);
            }
        }
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(std::abs(got.instruction[j] - want.instruction[j]) < 1e-9);
            CHECK(std::abs(got.graph_summary[j] - want.graph_summary[j]) < 1e-9);
        }
    }
}

TEST_CASE("distributions stay normalized across random models and graphs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 3000);
        std::int64_t entities = 2 + static_cast<std::int64_t>(rng.uniform_int(8));
        std::int64_t relations = 1 + static_cast<std::int64_t>(rng.uniform_int(3));
        std::vector<std::array<std::int64_t, 3>> triples;
        std::size_t count = 1 + rng.uniform_int(12);
        for (std::size_t i = 0; i < count; ++i) {
            triples.push_back({static_cast<std::int64_t>(rng.uniform_int(entities)),
                               static_cast<std::int64_t>(rng.uniform_int(relations)),
                               static_cast<std::int64_t>(rng.uniform_int(entities))});
        }
        auto sg = make_subgraph(entities, relations, triples,
                                {static_cast<std::int64_t>(rng.uniform_int(entities))});
        ReasonerConfig cfg{4, 2, rng.uniform() < 0.5, 1, 0.5};
        ModelParameters params = reasoner_params(sg.relation_count(), cfg, seed);
        Tape tape;
        Binding binding = bind_parameters(tape, params);
        encoder::Encoded enc = fake_question(tape, 1 + rng.uniform_int(5), 4, rng);
        auto pass = reasoner::forward(tape, binding, enc, sg, cfg);
        for (const auto& step : pass.trace.steps) {
            auto check_dist = [](const Tensor& d) {
                if (d.size() == 0) return;
                Real total = 0;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    CHECK(d[i] >= 0);
                    total += d[i];
                }
                CHECK(std::abs(total - 1.0) < 1e-6);
            };
            check_dist(step.entity_distribution);
            check_dist(step.entity_attention);
            check_dist(step.token_attention);
        }
    }
}

TEST_CASE("entity relabeling permutes distributions and leaves instructions unchanged") {
    // same triples under two entity insertion orders
    auto sg1 = make_subgraph(4, 2, {{0, 0, 1}, {1, 1, 2}, {0, 1, 3}}, {0});

    kg::KnowledgeSubgraph sg2;
    // permutation: old -> new ids via reordered names
    std::vector<std::int64_t> perm{2, 0, 3, 1};  // old id -> new id
    std::vector<std::string> names(4);
    for (std::int64_t old = 0; old < 4; ++old) {
        names[static_cast<std::size_t>(perm[old])] = "E" + std::to_string(old);
    }
    for (const std::string& n : names) sg2.entities.add_or_get(n);
    sg2.relation_names = {"r0", "r1"};
    sg2.inverse_relation = {false, false};
    for (auto [h, r, t] : std::vector<std::array<std::int64_t, 3>>{{0, 0, 1}, {1, 1, 2}, {0, 1, 3}}) {
        sg2.triples.push_back(kg::Triple{perm[h], r, perm[t]});
    }
    sg2.topic_ids = {perm[0]};
    sg2.rebuild_incident();
    auto sg2i = kg::add_inverse_relations(sg2);

    ReasonerConfig cfg{6, 2, true, 1, 0.5};
    ModelParameters params = reasoner_params(4, cfg, 29);

    auto run = [&](const kg::KnowledgeSubgraph& sg) {
        Tape tape;
        Binding binding = bind_parameters(tape, params);
        Rng rng(30);
        encoder::Encoded enc = fake_question(tape, 3, 6, rng);
        return reasoner::forward(tape, binding, enc, sg, cfg).trace;
    };
    auto t1 = run(sg1);
    auto t2 = run(sg2i);
    for (std::size_t k = 0; k < t1.steps.size(); ++k) {
        for (std::int64_t e = 0; e < 4; ++e) {
            CHECK(std::abs(t1.steps[k].entity_distribution[static_cast<std::size_t>(e)] -
                           t2.steps[k].entity_distribution[static_cast<std::size_t>(perm[e])]) <
                  1e-12);
        }
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(std::abs(t1.steps[k].instruction[j] - t2.steps[k].instruction[j]) < 1e-12);
        }
    }
}

TEST_CASE("select_answers thresholds with argmax fallback") {
    Tensor p1 = Tensor::vector({static_cast<Real>(0.7), static_cast<Real>(0.3)});
    CHECK(reasoner::select_answers(p1, static_cast<Real>(0.5)) == std::vector<kg::EntityId>{0});
    CHECK(reasoner::select_answers(p1, static_cast<Real>(0.2)) ==
          std::vector<kg::EntityId>{0, 1});
    Tensor p2 = Tensor::vector({static_cast<Real>(0.4), static_cast<Real>(0.35),
                                static_cast<Real>(0.25)});
    CHECK(reasoner::select_answers(p2, static_cast<Real>(0.9)) == std::vector<kg::EntityId>{0});
    // ties break toward the lower id
    Tensor tie = Tensor::vector({static_cast<Real>(0.5), static_cast<Real>(0.5)});
    CHECK(reasoner::select_answers(tie, static_cast<Real>(0.9)) == std::vector<kg::EntityId>{0});
}
