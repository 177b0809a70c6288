#include "kbqa/reasoner.hpp"

#include <array>
#include <string>

namespace kbqa::reasoner {

namespace {

std::string step_name(int k, const char* kind) {
    return "reasoner.step" + std::to_string(k) + "." + kind;
}

struct TripleIndex {
    std::vector<std::int64_t> heads;
    std::vector<std::int64_t> relations;
    std::vector<std::int64_t> tails;
};

TripleIndex index_triples(const kg::KnowledgeSubgraph& sg) {
    TripleIndex ix;
    ix.heads.reserve(sg.triples.size());
    ix.relations.reserve(sg.triples.size());
    ix.tails.reserve(sg.triples.size());
    for (const kg::Triple& t : sg.triples) {
        ix.heads.push_back(t.head);
        ix.relations.push_back(t.relation);
        ix.tails.push_back(t.tail);
    }
    return ix;
}

}  // namespace

void add_reasoner_parameters(ModelParameters& params, std::int64_t relation_count,
                             const ReasonerConfig& cfg, Rng& rng) {
    if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
    if (cfg.update_mlp_depth < 1) throw ConfigError("update_mlp_depth must be >= 1");
    std::size_t d = cfg.hidden_dim;

    params.add("reasoner.relations",
               uniform_tensor({static_cast<std::size_t>(relation_count), d}, Real(-1), Real(1),
                              rng));
    params.add("reasoner.init.W", glorot_tensor(d, d, rng));

    std::size_t ctx = cfg.use_graph_summary ? 3 * d : 2 * d;
    for (int k = 1; k <= cfg.steps; ++k) {
        params.add(step_name(k, "W"), glorot_tensor(d, ctx, rng));
        params.add(step_name(k, "b"), Tensor({d}));
    }
    params.add("reasoner.attn.W", glorot_tensor(d, d, rng));
    params.add("reasoner.gate.W", glorot_tensor(d, d, rng));
    params.add("reasoner.gate.b", Tensor({d}));
    // The instruction-relation product needs healthy pre-sigmoid magnitudes
    // from the start or the routing signal takes hundreds of epochs to grow.
    {
        Tensor match = glorot_tensor(d, d, rng);
        for (std::size_t i = 0; i < match.size(); ++i) match[i] *= Real(2);
        params.add("reasoner.match.W", std::move(match));
    }
    params.add("reasoner.update1.W", glorot_tensor(d, 2 * d, rng));
    params.add("reasoner.update1.b", Tensor({d}));
    for (int layer = 2; layer <= cfg.update_mlp_depth; ++layer) {
        params.add("reasoner.update" + std::to_string(layer) + ".W", glorot_tensor(d, d, rng));
        params.add("reasoner.update" + std::to_string(layer) + ".b", Tensor({d}));
    }
    params.add("reasoner.score.w", uniform_tensor({d}, Real(-0.1), Real(0.1), rng));
}

TensorId init_entity_embeddings(Tape& tape, const Binding& binding,
                                const kg::KnowledgeSubgraph& sg) {
    if (!sg.inverses_applied) {
        throw std::invalid_argument("init_entity_embeddings: inverse relations not materialized");
    }
    TripleIndex ix = index_triples(sg);
    // (W r)^T rows for every relation, gathered per triple, summed per tail.
    TensorId projected = tape.matmul_nt(binding.id("reasoner.relations"),
                                        binding.id("reasoner.init.W"));
    TensorId per_triple = tape.gather_rows(projected, std::move(ix.relations));
    TensorId summed = tape.scatter_add_rows(per_triple, std::move(ix.tails),
                                            static_cast<std::size_t>(sg.entity_count()));
    return tape.sigmoid_op(summed);
}

std::pair<TensorId, TensorId> aggregate_graph(Tape& tape, const Binding& binding,
                                              TensorId entity_matrix, TensorId question) {
    TensorId gated = tape.add_rowwise(tape.matmul_nt(entity_matrix, binding.id("reasoner.gate.W")),
                                      binding.id("reasoner.gate.b"));
    TensorId scores = tape.matvec(gated, question);
    TensorId attention = tape.softmax_op(scores);
    TensorId summary = tape.weighted_row_sum(entity_matrix, attention);
    return {summary, attention};
}

std::pair<TensorId, TensorId> next_instruction(Tape& tape, const Binding& binding,
                                               TensorId instruction_prev, TensorId question,
                                               TensorId graph_summary_prev,
                                               TensorId token_matrix, int step,
                                               bool use_graph_summary) {
    TensorId ctx;
    if (use_graph_summary) {
        std::array<TensorId, 3> parts = {instruction_prev, question, graph_summary_prev};
        ctx = tape.concat(parts);
    } else {
        std::array<TensorId, 2> parts = {instruction_prev, question};
        ctx = tape.concat(parts);
    }
    TensorId projected = tape.affine(binding.id(step_name(step, "W")), ctx,
                                     binding.id(step_name(step, "b")));
    // score_j = sum of W_attn (q_step ⊙ h_j); softmax over tokens
    TensorId gated = tape.rowwise_mul(token_matrix, projected);
    TensorId transformed = tape.matmul_nt(gated, binding.id("reasoner.attn.W"));
    TensorId attention = tape.softmax_op(tape.row_sum(transformed));
    TensorId instruction = tape.weighted_row_sum(token_matrix, attention);
    return {instruction, attention};
}

std::pair<TensorId, TensorId> reason_step(Tape& tape, const Binding& binding,
                                          TensorId instruction, TensorId entity_matrix_prev,
                                          TensorId distribution_prev,
                                          const kg::KnowledgeSubgraph& sg, int update_mlp_depth) {
    TripleIndex ix = index_triples(sg);
    std::size_t entity_count = static_cast<std::size_t>(sg.entity_count());

    // m = sigma(i ⊙ W_R r) per triple
    TensorId projected = tape.matmul_nt(binding.id("reasoner.relations"),
                                        binding.id("reasoner.match.W"));
    TensorId per_triple = tape.gather_rows(projected, std::move(ix.relations));
    TensorId match = tape.sigmoid_op(tape.rowwise_mul(per_triple, instruction));

    // neighborhood message: sum of p_head * m over incoming triples
    TensorId head_mass = tape.gather(distribution_prev, std::move(ix.heads));
    TensorId weighted = tape.scale_rows(match, head_mass);
    TensorId neighborhood = tape.scatter_add_rows(weighted, std::move(ix.tails), entity_count);

    // entity update: sigma-affine layers over [e_prev ; e_hat]
    TensorId features = tape.concat_cols(entity_matrix_prev, neighborhood);
    TensorId updated = features;
    for (int layer = 1; layer <= update_mlp_depth; ++layer) {
        std::string base = "reasoner.update" + std::to_string(layer);
        updated = tape.sigmoid_op(
            tape.add_rowwise(tape.matmul_nt(updated, binding.id(base + ".W")),
                             binding.id(base + ".b")));
    }
    TensorId distribution = tape.softmax_op(tape.matvec(updated, binding.id("reasoner.score.w")));
    return {updated, distribution};
}

ForwardPass forward(Tape& tape, const Binding& binding, const encoder::Encoded& question,
                    const kg::KnowledgeSubgraph& sg, const ReasonerConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
    if (sg.topic_ids.empty()) {
        throw std::invalid_argument("forward: no topic entity present in subgraph");
    }
    std::size_t entity_count = static_cast<std::size_t>(sg.entity_count());

    Tensor p0(std::vector<std::size_t>{entity_count});
    for (kg::EntityId t : sg.topic_ids) {
        p0[static_cast<std::size_t>(t)] = Real(1) / static_cast<Real>(sg.topic_ids.size());
    }

    ForwardPass pass;
    TensorId entity_matrix = init_entity_embeddings(tape, binding, sg);
    TensorId distribution = tape.constant(std::move(p0));
    TensorId instruction = question.question_vector;  // i^(0) = q
    auto [summary, entity_attention] = aggregate_graph(tape, binding, entity_matrix,
                                                       question.question_vector);

    auto snapshot = [&tape](int k, TensorId e, TensorId p, TensorId ins, TensorId sum,
                            TensorId tok_attn, TensorId ent_attn) {
        StepState s;
        s.step_index = k;
        s.entity_embeddings = tape.value(e);
        s.entity_distribution = tape.value(p);
        s.instruction = tape.value(ins);
        s.graph_summary = tape.value(sum);
        if (tok_attn >= 0) s.token_attention = tape.value(tok_attn);
        s.entity_attention = tape.value(ent_attn);
        return s;
    };

    pass.trace.steps.push_back(snapshot(0, entity_matrix, distribution, instruction, summary,
                                        TensorId(-1), entity_attention));
    pass.step_distributions.push_back(distribution);

    for (int k = 1; k <= cfg.steps; ++k) {
        auto [next_ins, token_attention] =
            next_instruction(tape, binding, instruction, question.question_vector, summary,
                             question.token_matrix, k, cfg.use_graph_summary);
        auto [next_entities, next_distribution] =
            reason_step(tape, binding, next_ins, entity_matrix, distribution, sg,
                        cfg.update_mlp_depth);
        auto [next_summary, next_attention] =
            aggregate_graph(tape, binding, next_entities, question.question_vector);

        instruction = next_ins;
        entity_matrix = next_entities;
        distribution = next_distribution;
        summary = next_summary;
        entity_attention = next_attention;

        pass.trace.steps.push_back(snapshot(k, entity_matrix, distribution, instruction, summary,
                                            token_attention, entity_attention));
        pass.step_distributions.push_back(distribution);
    }
    pass.final_distribution = distribution;
    pass.trace.answers = select_answers(tape.value(distribution), cfg.threshold);
    return pass;
}

std::vector<kg::EntityId> select_answers(const Tensor& distribution, Real threshold) {
    std::vector<kg::EntityId> out;
    for (std::size_t i = 0; i < distribution.size(); ++i) {
        if (distribution[i] > threshold) out.push_back(static_cast<kg::EntityId>(i));
    }
    if (out.empty() && distribution.size() > 0) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < distribution.size(); ++i) {
            if (distribution[i] > distribution[best]) best = i;
        }
        out.push_back(static_cast<kg::EntityId>(best));
    }
    return out;
}

}  // namespace kbqa::reasoner
