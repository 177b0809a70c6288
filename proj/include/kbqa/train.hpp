#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbqa/encoder.hpp"
#include "kbqa/harness.hpp"
#include "kbqa/kg.hpp"
#include "kbqa/model.hpp"
#include "kbqa/reasoner.hpp"

namespace kbqa::train {

struct TrainConfig {
    Real learning_rate = static_cast<Real>(7e-4);
    int batch_size = 32;
    int steps = 3;
    Real lambda = static_cast<Real>(0.05);
    std::size_t hidden_dim = 128;
    std::size_t word_dim = 300;
    int epochs = 100;
    int patience = 10;
    std::uint64_t seed = 13;
    bool use_teacher = true;
    bool use_graph_summary = true;
    Real clip_norm = static_cast<Real>(1.0);
    Real threshold = static_cast<Real>(0.5);
    int update_mlp_depth = 1;
};

// A question with everything resolved into its reasoning subgraph.
struct TrainExample {
    std::string id;
    std::vector<int> token_ids;
    kg::KnowledgeSubgraph subgraph;           // inverses materialized
    std::vector<kg::EntityId> gold_local;     // sorted local ids; empty = unanswerable
    std::vector<kg::RelationId> gold_path;    // global relation ids; empty = none
    Tensor gold_distribution;                 // empty when unanswerable
};

struct SubgraphSettings {
    std::string mode = "nhop";  // nhop | ppr
    double ppr_damping = 0.8;
    std::int64_t ppr_max_entities = 2000;
};

struct PreparedDataset {
    std::vector<TrainExample> examples;
    std::size_t unanswerable = 0;  // gold missing from the subgraph
};

// Uniform mass over the gold answers present in the subgraph; throws
// UnanswerableError when the intersection is empty.
Tensor gold_distribution(const std::vector<kg::EntityId>& answers,
                         const kg::KnowledgeSubgraph& sg);

// Resolves questions against the graph: tokenize, extract the per-question
// subgraph (hop bound = steps), map topics/answers/path into it. With
// for_training, unanswerable examples are dropped (counted); otherwise they
// are kept and score zero downstream.
PreparedDataset prepare_examples(const kg::KnowledgeGraph& g,
                                 const std::vector<harness::QAExample>& examples,
                                 const encoder::Vocabulary& vocab, const TrainConfig& cfg,
                                 const SubgraphSettings& subgraph, bool for_training);

encoder::Vocabulary build_vocabulary(const std::vector<harness::QAExample>& examples);

// The full question-answering model: parameters plus the vocabularies they
// are indexed by.
struct KbqaModel {
    ModelParameters params;
    encoder::Vocabulary vocab;
    std::vector<std::string> relation_names;  // inverse-doubled, global ids
    TrainConfig cfg;

    encoder::EncoderConfig encoder_config() const {
        return {cfg.word_dim, cfg.hidden_dim};
    }
    reasoner::ReasonerConfig reasoner_config() const {
        return {cfg.hidden_dim, cfg.steps, cfg.use_graph_summary, cfg.update_mlp_depth,
                cfg.threshold};
    }
};

KbqaModel init_model(const encoder::Vocabulary& vocab,
                     const std::vector<std::string>& relation_names, const TrainConfig& cfg,
                     Rng& rng, const encoder::WordVectors* pretrained = nullptr);

reasoner::ForwardTrace run_forward(const KbqaModel& model, const TrainExample& ex);

// Per-step entity distributions p^(0)..p^(n) of one forward pass.
std::vector<Tensor> step_distributions(const KbqaModel& model, const TrainExample& ex);

struct LossReport {
    Real l1 = 0;               // final-answer KL
    Real l2 = 0;               // summed per-step KL against the teacher
    Real total = 0;            // l1 + lambda * l2, exactly as computed
    std::vector<Real> per_step;
};

// Value-level distillation loss over two finished traces.
LossReport student_loss(const reasoner::ForwardTrace& student,
                        const reasoner::ForwardTrace& teacher, const Tensor& gold, Real lambda);

struct OptimizerState {
    struct Slot {
        Tensor m;
        Tensor v;
    };
    std::vector<Slot> slots;  // aligned with ModelParameters order
    std::int64_t step = 0;
};

// Standard bias-corrected Adam update (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(ModelParameters& params, const std::map<std::string, Tensor>& grads,
               OptimizerState& state, Real learning_rate);

struct EpochStats {
    int epoch = 0;
    Real train_loss = 0;
    double dev_hits = 0;
    double dev_f1 = 0;
    double seconds = 0;
};

struct TrainResult {
    KbqaModel model;  // best-dev parameters
    std::vector<EpochStats> epochs;
    double best_dev_hits = 0;
    int best_epoch = 0;
};

harness::EvalReport evaluate(const KbqaModel& model, const std::vector<TrainExample>& examples);

// Final-answer supervision only; lambda and the teacher flag are ignored.
TrainResult train_teacher(const std::vector<TrainExample>& train_set,
                          const std::vector<TrainExample>& dev_set, const KbqaModel& init,
                          std::ostream* log = nullptr);

// Distillation per the loss above; with cfg.use_teacher == false the teacher
// is ignored entirely and the objective degenerates to the final-answer KL.
TrainResult train_student(const std::vector<TrainExample>& train_set,
                          const std::vector<TrainExample>& dev_set, const KbqaModel& init,
                          const KbqaModel* teacher, std::ostream* log = nullptr);

}  // namespace kbqa::train
