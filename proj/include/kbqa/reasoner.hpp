#pragma once

#include <utility>
#include <vector>

#include "kbqa/encoder.hpp"
#include "kbqa/kg.hpp"
#include "kbqa/model.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa::reasoner {

struct ReasonerConfig {
    std::size_t hidden_dim = 128;
    int steps = 3;
    bool use_graph_summary = true;  // false = fixed instructions from the question alone
    int update_mlp_depth = 1;
    Real threshold = static_cast<Real>(0.5);
};

// Registers relation embeddings, per-step instruction projections and the
// shared reasoning weights. With use_graph_summary the per-step projection
// reads [i; q; e_graph] (d x 3d); without it, [i; q] (d x 2d).
void add_reasoner_parameters(ModelParameters& params, std::int64_t relation_count,
                             const ReasonerConfig& cfg, Rng& rng);

// Snapshot of one reasoning step; step 0 is the initialization state.
struct StepState {
    int step_index = 0;
    Tensor entity_embeddings;     // |E| x d
    Tensor entity_distribution;   // p^(k)
    Tensor instruction;           // i^(k)
    Tensor graph_summary;         // e_graph^(k)
    Tensor token_attention;       // empty at step 0
    Tensor entity_attention;      // attention used for the graph summary
};

struct ForwardTrace {
    std::vector<StepState> steps;  // length steps+1
    std::vector<kg::EntityId> answers;

    const Tensor& final_distribution() const { return steps.back().entity_distribution; }
};

// Tape handles needed to build losses on top of a forward pass.
struct ForwardPass {
    ForwardTrace trace;
    std::vector<TensorId> step_distributions;  // p^(0)..p^(n)
    TensorId final_distribution;
};

// Initial entity rows: sigma of the summed projected embeddings of every
// relation arriving at the entity. Requires materialized inverse relations
// so original heads contribute through their inverse edges.
TensorId init_entity_embeddings(Tape& tape, const Binding& binding,
                                const kg::KnowledgeSubgraph& sg);

// Graph summary: scores beta_e = q . (W_gate e + b_q), attention over
// entities, attention-weighted sum of entity rows.
std::pair<TensorId, TensorId> aggregate_graph(Tape& tape, const Binding& binding,
                                              TensorId entity_matrix, TensorId question);

// Step-k instruction: project [i_prev; q; e_graph_prev] (or [i_prev; q]),
// score each token by the summed transformed gated product, softmax, and
// take the attention-weighted token sum.
std::pair<TensorId, TensorId> next_instruction(Tape& tape, const Binding& binding,
                                               TensorId instruction_prev, TensorId question,
                                               TensorId graph_summary_prev,
                                               TensorId token_matrix, int step,
                                               bool use_graph_summary);

// One reasoning hop: per-triple match gates, neighborhood aggregation
// weighted by the previous distribution, entity update, re-scoring.
std::pair<TensorId, TensorId> reason_step(Tape& tape, const Binding& binding,
                                          TensorId instruction, TensorId entity_matrix_prev,
                                          TensorId distribution_prev,
                                          const kg::KnowledgeSubgraph& sg, int update_mlp_depth);

ForwardPass forward(Tape& tape, const Binding& binding, const encoder::Encoded& question,
                    const kg::KnowledgeSubgraph& sg, const ReasonerConfig& cfg);

// Entities with probability strictly above the threshold; when none clear
// it, the single argmax entity (lowest id on ties).
std::vector<kg::EntityId> select_answers(const Tensor& distribution, Real threshold);

}  // namespace kbqa::reasoner
