#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kbqa/kg.hpp"
#include "kbqa/reasoner.hpp"

namespace kbqa::harness {

struct QAExample {
    std::string id;
    std::string question;
    std::vector<std::string> topics;
    std::vector<std::string> answers;
    std::vector<std::string> path;  // gold relation sequence; empty = not provided
};

// 1 iff the argmax entity (lowest id on ties) is in the gold set.
int hits_at_1(const Tensor& distribution, const std::vector<kg::EntityId>& gold);

// Harmonic mean of set precision and recall; empty prediction scores 0.
double f1_score(const std::vector<kg::EntityId>& predicted,
                const std::vector<kg::EntityId>& gold);

// Exact relational composition: start from the topics, follow each path
// relation in order across matching triples. Returns sorted unique ids.
std::vector<kg::EntityId> oracle_answer(std::span<const kg::Triple> triples,
                                        const std::vector<kg::EntityId>& topics,
                                        std::span<const kg::RelationId> path);

enum class RevisionGroup { A, B, Other };

// A: some intermediate-step argmax leaves the gold hop set but the final
// answer is right. B: final right with every intermediate on the gold path.
// Other: final wrong. Requires a gold path.
RevisionGroup classify_revision(const reasoner::ForwardTrace& trace,
                                const kg::KnowledgeSubgraph& sg,
                                const std::vector<kg::RelationId>& gold_path,
                                const std::vector<kg::EntityId>& gold_answers);

struct ExampleRecord {
    std::string id;
    int hit = 0;
    double f1 = 0.0;
    bool answerable = true;
    bool has_path = false;
    RevisionGroup group = RevisionGroup::Other;
    std::vector<std::string> predicted;
};

struct EvalReport {
    double hits_at_1 = 0.0;
    double f1 = 0.0;
    std::size_t count = 0;
    std::size_t unanswerable = 0;
    std::size_t group_a = 0;
    std::size_t group_b = 0;
    std::size_t group_other = 0;
    std::vector<ExampleRecord> records;
};

// Fills the aggregate fields from `records`.
void finalize_report(EvalReport& report);

struct SyntheticSpec {
    std::int64_t entities = 100;
    std::int64_t relations = 10;
    int hops = 2;
    std::int64_t questions = 200;
    int distractor_branching = 0;
    // Fraction of questions built as a near-identical-sibling fork next to
    // the topic, where the correct final relation is readable only from the
    // graph around the gold intermediate.
    double ambiguous_fraction = 0.0;
};

struct SyntheticDataset {
    kg::KnowledgeGraph graph;
    std::vector<QAExample> examples;
    std::vector<std::string> relation_lexicon;
};

// Plants relation-path questions into a shared random graph. Every stored
// answer set is recomputed from the finished graph with oracle_answer, so
// each question is answerable by construction.
SyntheticDataset generate_synthetic_dataset(std::uint64_t seed, const SyntheticSpec& spec);

// Dataset JSONL round trip (one QAExample per line).
std::vector<QAExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples);

void save_graph(const std::filesystem::path& path, const kg::KnowledgeGraph& g);

// Re-checks the generation-time invariant: for every example with a path,
// oracle_answer over the graph equals the stored answer set. Returns the
// number of examples checked; throws DataError on any mismatch.
std::size_t validate_examples(const kg::KnowledgeGraph& g,
                              const std::vector<QAExample>& examples);

}  // namespace kbqa::harness
