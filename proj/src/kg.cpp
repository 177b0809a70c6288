#include "kbqa/kg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>

namespace kbqa::kg {

namespace {

std::uint64_t triple_key(const Triple& t) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
        h ^= x;
        h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(t.head));
    mix(static_cast<std::uint64_t>(t.relation));
    mix(static_cast<std::uint64_t>(t.tail));
    return h;
}

const std::string kInverseSuffix = "^-1";

}  // namespace

std::int64_t Vocab::add_or_get(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    std::int64_t id = static_cast<std::int64_t>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
}

std::optional<std::int64_t> Vocab::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool KnowledgeGraph::add_triple(const std::string& head, const std::string& relation,
                                const std::string& tail) {
    EntityId h = entities_.add_or_get(head);
    RelationId r = relations_.add_or_get(relation);
    EntityId t = entities_.add_or_get(tail);
    Triple triple{h, r, t};
    auto& bucket = seen_[triple_key(triple)];
    for (std::size_t i : bucket) {
        if (triples_[i] == triple) return false;
    }
    std::size_t idx = triples_.size();
    bucket.push_back(idx);
    triples_.push_back(triple);
    incident_.resize(static_cast<std::size_t>(entities_.size()));
    incident_[static_cast<std::size_t>(h)].push_back(idx);
    if (t != h) incident_[static_cast<std::size_t>(t)].push_back(idx);
    return true;
}

EntityId KnowledgeGraph::add_entity(const std::string& name) {
    EntityId id = entities_.add_or_get(name);
    incident_.resize(static_cast<std::size_t>(entities_.size()));
    return id;
}

const std::vector<std::size_t>& KnowledgeGraph::incident(EntityId e) const {
    if (e < 0 || e >= entities_.size()) throw std::invalid_argument("unknown entity id");
    return incident_[static_cast<std::size_t>(e)];
}

void KnowledgeSubgraph::rebuild_incident() {
    incident.assign(static_cast<std::size_t>(entities.size()), {});
    for (std::size_t i = 0; i < triples.size(); ++i) {
        incident[static_cast<std::size_t>(triples[i].head)].push_back(i);
        if (triples[i].tail != triples[i].head) {
            incident[static_cast<std::size_t>(triples[i].tail)].push_back(i);
        }
    }
}

KnowledgeGraph load_triples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triples file: " + path.string());
    KnowledgeGraph g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t t1 = line.find('\t');
        if (t1 == std::string::npos) throw ParseError("expected 3 TAB-separated fields", lineno);
        std::size_t t2 = line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw ParseError("expected 3 TAB-separated fields", lineno);
        if (line.find('\t', t2 + 1) != std::string::npos) {
            throw ParseError("expected exactly 3 fields", lineno);
        }
        std::string head = line.substr(0, t1);
        std::string rel = line.substr(t1 + 1, t2 - t1 - 1);
        std::string tail = line.substr(t2 + 1);
        if (head.empty() || rel.empty() || tail.empty()) {
            throw ParseError("empty field in triple", lineno);
        }
        g.add_triple(head, rel, tail);
    }
    return g;
}

std::vector<Triple> neighborhood(const KnowledgeGraph& g, EntityId e) {
    std::vector<Triple> out;
    for (std::size_t idx : g.incident(e)) out.push_back(g.triples()[idx]);
    return out;
}

namespace {

// Shared tail end of both extraction paths: map the retained global entity
// set (sorted ascending) to local ids and copy induced triples.
KnowledgeSubgraph build_subgraph(const KnowledgeGraph& g, std::vector<EntityId> keep,
                                 const std::vector<EntityId>& topics) {
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

    KnowledgeSubgraph sg;
    std::unordered_map<EntityId, EntityId> local;
    local.reserve(keep.size());
    for (EntityId e : keep) {
        local[e] = sg.entities.add_or_get(g.entities().name(e));
    }
    sg.relation_names = g.relations().names();
    sg.inverse_relation.assign(sg.relation_names.size(), false);
    for (const Triple& t : g.triples()) {
        auto h = local.find(t.head);
        if (h == local.end()) continue;
        auto tl = local.find(t.tail);
        if (tl == local.end()) continue;
        sg.triples.push_back(Triple{h->second, t.relation, tl->second});
    }
    for (EntityId t : topics) {
        auto it = local.find(t);
        if (it != local.end()) sg.topic_ids.push_back(it->second);
    }
    std::sort(sg.topic_ids.begin(), sg.topic_ids.end());
    sg.topic_ids.erase(std::unique(sg.topic_ids.begin(), sg.topic_ids.end()),
                       sg.topic_ids.end());
    sg.rebuild_incident();
    return sg;
}

void check_topics(const KnowledgeGraph& g, const std::vector<EntityId>& topics) {
    if (topics.empty()) throw std::invalid_argument("topic set is empty");
    for (EntityId t : topics) {
        if (t < 0 || t >= g.entities().size()) {
            throw std::invalid_argument("unknown topic entity id " + std::to_string(t));
        }
    }
}

}  // namespace

KnowledgeSubgraph extract_subgraph_nhop(const KnowledgeGraph& g,
                                        const std::vector<EntityId>& topics, int hops) {
    check_topics(g, topics);
    if (hops < 1) throw std::invalid_argument("hop bound must be >= 1");

    std::vector<int> dist(static_cast<std::size_t>(g.entities().size()), -1);
    std::deque<EntityId> queue;
    for (EntityId t : topics) {
        if (dist[static_cast<std::size_t>(t)] == -1) {
            dist[static_cast<std::size_t>(t)] = 0;
            queue.push_back(t);
        }
    }
    while (!queue.empty()) {
        EntityId e = queue.front();
        queue.pop_front();
        int d = dist[static_cast<std::size_t>(e)];
        if (d == hops) continue;
        for (std::size_t idx : g.incident(e)) {
            const Triple& t = g.triples()[idx];
            EntityId other = (t.head == e) ? t.tail : t.head;
            if (dist[static_cast<std::size_t>(other)] == -1) {
                dist[static_cast<std::size_t>(other)] = d + 1;
                queue.push_back(other);
            }
        }
    }
    std::vector<EntityId> keep;
    for (std::size_t e = 0; e < dist.size(); ++e) {
        if (dist[e] >= 0) keep.push_back(static_cast<EntityId>(e));
    }
    return build_subgraph(g, std::move(keep), topics);
}

std::vector<double> personalized_pagerank(const KnowledgeGraph& g,
                                          const std::vector<EntityId>& topics, double damping,
                                          double tol, int max_iter) {
    check_topics(g, topics);
    if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("damping must be in (0,1)");
    std::size_t n = static_cast<std::size_t>(g.entities().size());

    std::vector<double> restart(n, 0.0);
    for (EntityId t : topics) restart[static_cast<std::size_t>(t)] += 1.0 / topics.size();

    // Undirected multigraph transition: each incident triple is one edge slot.
    std::vector<double> deg(n, 0.0);
    for (const Triple& t : g.triples()) {
        deg[static_cast<std::size_t>(t.head)] += 1.0;
        deg[static_cast<std::size_t>(t.tail)] += 1.0;
    }

    std::vector<double> x = restart;
    std::vector<double> next(n, 0.0);
    for (int it = 0; it < max_iter; ++it) {
        double dangling = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            if (deg[e] == 0.0) dangling += x[e];
        }
        for (std::size_t e = 0; e < n; ++e) {
            next[e] = (1.0 - damping) * restart[e] + damping * dangling * restart[e];
        }
        for (const Triple& t : g.triples()) {
            std::size_t h = static_cast<std::size_t>(t.head);
            std::size_t tl = static_cast<std::size_t>(t.tail);
            next[tl] += damping * x[h] / deg[h];
            next[h] += damping * x[tl] / deg[tl];
        }
        double resid = 0.0;
        for (std::size_t e = 0; e < n; ++e) resid += std::abs(next[e] - x[e]);
        x.swap(next);
        if (resid < tol) break;
    }
    return x;
}

KnowledgeSubgraph extract_subgraph_ppr(const KnowledgeGraph& g,
                                       const std::vector<EntityId>& topics, double damping,
                                       std::int64_t max_entities) {
    check_topics(g, topics);
    if (max_entities < static_cast<std::int64_t>(topics.size())) {
        throw std::invalid_argument("max_entities must be >= topic count");
    }
    std::vector<double> scores = personalized_pagerank(g, topics, damping);

    std::vector<EntityId> order(static_cast<std::size_t>(g.entities().size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&scores](EntityId a, EntityId b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        }
        return a < b;
    });

    std::set<EntityId> keep(topics.begin(), topics.end());
    for (EntityId e : order) {
        if (static_cast<std::int64_t>(keep.size()) >= max_entities) break;
        if (scores[static_cast<std::size_t>(e)] <= 0.0) break;  // unreachable from topics
        keep.insert(e);
    }
    return build_subgraph(g, std::vector<EntityId>(keep.begin(), keep.end()), topics);
}

KnowledgeSubgraph add_inverse_relations(const KnowledgeSubgraph& sg) {
    if (sg.inverses_applied) {
        throw std::logic_error("inverse relations already materialized");
    }
    KnowledgeSubgraph out;
    out.entities = sg.entities;
    out.topic_ids = sg.topic_ids;
    out.inverses_applied = true;

    std::int64_t base = sg.relation_count();
    out.relation_names = sg.relation_names;
    for (const std::string& name : sg.relation_names) {
        out.relation_names.push_back(name + kInverseSuffix);
    }
    out.inverse_relation.assign(out.relation_names.size(), false);
    for (std::int64_t r = base; r < out.relation_count(); ++r) {
        out.inverse_relation[static_cast<std::size_t>(r)] = true;
    }

    std::set<Triple> dedup;
    out.triples.reserve(sg.triples.size() * 2);
    for (const Triple& t : sg.triples) {
        if (dedup.insert(t).second) out.triples.push_back(t);
    }
    for (const Triple& t : sg.triples) {
        Triple inv{t.tail, t.relation + base, t.head};
        if (dedup.insert(inv).second) out.triples.push_back(inv);
    }
    out.rebuild_incident();
    return out;
}

std::vector<std::string> doubled_relation_names(const KnowledgeGraph& g) {
    std::vector<std::string> names = g.relations().names();
    names.reserve(names.size() * 2);
    for (std::int64_t r = 0; r < g.relations().size(); ++r) {
        names.push_back(g.relations().name(r) + kInverseSuffix);
    }
    return names;
}

}  // namespace kbqa::kg
