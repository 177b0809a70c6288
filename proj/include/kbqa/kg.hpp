#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbqa/common.hpp"

namespace kbqa::kg {

using EntityId = std::int64_t;
using RelationId = std::int64_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    auto operator<=>(const Triple&) const = default;
};

// Dense string<->id vocabulary, ids in first-appearance order.
class Vocab {
public:
    std::int64_t add_or_get(const std::string& name);
    std::optional<std::int64_t> find(const std::string& name) const;
    const std::string& name(std::int64_t id) const { return names_[static_cast<std::size_t>(id)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::int64_t> index_;
};

// Immutable after construction; shareable across concurrent readers.
class KnowledgeGraph {
public:
    // Returns false if the triple was already present.
    bool add_triple(const std::string& head, const std::string& relation, const std::string& tail);

    // Registers an entity with no incident triples.
    EntityId add_entity(const std::string& name);

    const Vocab& entities() const { return entities_; }
    const Vocab& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }

    // Indices into triples() of every triple containing e (either position).
    const std::vector<std::size_t>& incident(EntityId e) const;

private:
    Vocab entities_;
    Vocab relations_;
    std::vector<Triple> triples_;
    std::vector<std::vector<std::size_t>> incident_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen_;  // dedup buckets
};

// Per-question reasoning graph. Entity ids are local and dense; relation ids
// are shared with the parent graph (doubled once inverses are materialized,
// inverse of r having id r + |R_original|).
struct KnowledgeSubgraph {
    Vocab entities;                         // local ids, surface strings preserved
    std::vector<std::string> relation_names;  // global id -> name
    std::vector<Triple> triples;            // local entity ids, global relation ids
    std::vector<EntityId> topic_ids;        // local
    std::vector<bool> inverse_relation;     // per relation id
    bool inverses_applied = false;

    std::vector<std::vector<std::size_t>> incident;  // local entity -> triple indices

    std::int64_t entity_count() const { return entities.size(); }
    std::int64_t relation_count() const { return static_cast<std::int64_t>(relation_names.size()); }
    void rebuild_incident();
};

// Reads the TAB-separated triples format: three fields per line, no header.
// Duplicates are dropped; vocabularies are built in first-appearance order.
KnowledgeGraph load_triples(const std::filesystem::path& path);

// All triples with e as head or tail.
std::vector<Triple> neighborhood(const KnowledgeGraph& g, EntityId e);

// Entities whose undirected distance from the nearest topic is <= hops,
// plus all induced triples.
KnowledgeSubgraph extract_subgraph_nhop(const KnowledgeGraph& g,
                                        const std::vector<EntityId>& topics, int hops);

// Personalized PageRank scores over all entities, restart mass uniform on
// topics. Power iteration to L1 residual < tol or max_iter sweeps. Dangling
// entities send their mass back to the restart distribution.
std::vector<double> personalized_pagerank(const KnowledgeGraph& g,
                                          const std::vector<EntityId>& topics, double damping,
                                          double tol = 1e-8, int max_iter = 100);

// Keeps the top-max_entities entities by PPR score (topics always kept,
// ties to the lower id) plus induced triples.
KnowledgeSubgraph extract_subgraph_ppr(const KnowledgeGraph& g,
                                       const std::vector<EntityId>& topics, double damping,
                                       std::int64_t max_entities);

// Materializes (t, r^-1, h) for every (h, r, t); doubles the relation space.
KnowledgeSubgraph add_inverse_relations(const KnowledgeSubgraph& sg);

// The graph's relation names extended with their inverses, matching the id
// layout every subgraph gets after add_inverse_relations.
std::vector<std::string> doubled_relation_names(const KnowledgeGraph& g);

}  // namespace kbqa::kg
