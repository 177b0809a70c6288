#include "kbqa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kbqa::harness {

namespace {

using nlohmann::json;

std::size_t argmax_lowest(const Tensor& distribution) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < distribution.size(); ++i) {
        if (distribution[i] > distribution[best]) best = i;
    }
    return best;
}

std::vector<kg::EntityId> sorted_unique(std::vector<kg::EntityId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

int hits_at_1(const Tensor& distribution, const std::vector<kg::EntityId>& gold) {
    if (distribution.size() == 0) throw std::invalid_argument("hits_at_1: empty distribution");
    kg::EntityId top = static_cast<kg::EntityId>(argmax_lowest(distribution));
    return std::find(gold.begin(), gold.end(), top) != gold.end() ? 1 : 0;
}

double f1_score(const std::vector<kg::EntityId>& predicted,
                const std::vector<kg::EntityId>& gold) {
    if (gold.empty()) throw std::invalid_argument("f1_score: empty gold set");
    std::vector<kg::EntityId> p = sorted_unique(predicted);
    std::vector<kg::EntityId> g = sorted_unique(gold);
    if (p.empty()) return 0.0;
    std::vector<kg::EntityId> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    if (both.empty()) return 0.0;
    double precision = static_cast<double>(both.size()) / static_cast<double>(p.size());
    double recall = static_cast<double>(both.size()) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<kg::EntityId> oracle_answer(std::span<const kg::Triple> triples,
                                        const std::vector<kg::EntityId>& topics,
                                        std::span<const kg::RelationId> path) {
    std::set<kg::EntityId> frontier(topics.begin(), topics.end());
    for (kg::RelationId rel : path) {
        std::set<kg::EntityId> next;
        for (const kg::Triple& t : triples) {
            if (t.relation == rel && frontier.count(t.head)) next.insert(t.tail);
        }
        frontier.swap(next);
        if (frontier.empty()) break;
    }
    return {frontier.begin(), frontier.end()};
}

RevisionGroup classify_revision(const reasoner::ForwardTrace& trace,
                                const kg::KnowledgeSubgraph& sg,
                                const std::vector<kg::RelationId>& gold_path,
                                const std::vector<kg::EntityId>& gold_answers) {
    if (gold_path.empty()) throw std::invalid_argument("classify_revision: missing gold path");
    if (trace.steps.empty()) throw std::invalid_argument("classify_revision: empty trace");

    if (hits_at_1(trace.final_distribution(), gold_answers) == 0) return RevisionGroup::Other;

    // Gold hop-k entity set: the oracle composition of the first
    // min(k, |path|) relations, evaluated inside the subgraph.
    std::size_t n = trace.steps.size() - 1;
    for (std::size_t k = 1; k + 1 <= n; ++k) {
        std::size_t prefix = std::min(k, gold_path.size());
        std::vector<kg::EntityId> hop_set =
            oracle_answer(sg.triples, sg.topic_ids,
                          std::span<const kg::RelationId>(gold_path.data(), prefix));
        kg::EntityId top = static_cast<kg::EntityId>(
            argmax_lowest(trace.steps[k].entity_distribution));
        if (!std::binary_search(hop_set.begin(), hop_set.end(), top)) {
            return RevisionGroup::A;
        }
    }
    return RevisionGroup::B;
}

void finalize_report(EvalReport& report) {
    report.count = report.records.size();
    report.hits_at_1 = 0.0;
    report.f1 = 0.0;
    report.unanswerable = 0;
    report.group_a = report.group_b = report.group_other = 0;
    for (const ExampleRecord& r : report.records) {
        report.hits_at_1 += r.hit;
        report.f1 += r.f1;
        if (!r.answerable) ++report.unanswerable;
        if (r.has_path) {
            switch (r.group) {
                case RevisionGroup::A: ++report.group_a; break;
                case RevisionGroup::B: ++report.group_b; break;
                case RevisionGroup::Other: ++report.group_other; break;
            }
        }
    }
    if (report.count > 0) {
        report.hits_at_1 /= static_cast<double>(report.count);
        report.f1 /= static_cast<double>(report.count);
    }
}

namespace {

struct GeneratorPools {
    std::int64_t path_relations;
    std::int64_t distractor_relations;
    std::int64_t constraint_relations;
};

std::string entity_name(std::int64_t i) { return "E" + std::to_string(i); }
std::string path_rel_name(std::int64_t i) { return "r" + std::to_string(i); }
std::string distractor_rel_name(std::int64_t i) { return "d" + std::to_string(i); }
std::string constraint_rel_name(std::int64_t i) { return "k" + std::to_string(i); }

std::int64_t sample_entity_except(Rng& rng, std::int64_t pool,
                                  const std::vector<std::int64_t>& avoid) {
    for (int tries = 0; tries < 256; ++tries) {
        std::int64_t e = static_cast<std::int64_t>(rng.uniform_int(
            static_cast<std::uint64_t>(pool)));
        if (std::find(avoid.begin(), avoid.end(), e) == avoid.end()) return e;
    }
    throw DataError("synthetic generation: entity pool too small for constraints");
}

std::string render_question(const std::vector<std::string>& reversed_relations,
                            const std::string& topic) {
    std::ostringstream out;
    out << "who";
    for (const std::string& r : reversed_relations) out << " " << r << " of";
    out << " " << topic;
    return out.str();
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(std::uint64_t seed, const SyntheticSpec& spec) {
    if (spec.hops < 1) throw std::invalid_argument("synthetic spec: hops must be >= 1");
    if (spec.entities < spec.hops + 1) {
        throw std::invalid_argument("synthetic spec: need at least hops+1 entities");
    }
    if (spec.relations < 1 || spec.questions < 1) {
        throw std::invalid_argument("synthetic spec: relations and questions must be >= 1");
    }
    if (spec.ambiguous_fraction > 0.0 && spec.hops < 2) {
        throw std::invalid_argument("synthetic spec: ambiguity requires hops >= 2");
    }
    if (spec.ambiguous_fraction > 0.0 && (spec.relations < 3 || spec.entities < spec.hops + 4)) {
        throw std::invalid_argument("synthetic spec: ambiguity needs >= 3 relations and more entities");
    }

    GeneratorPools pools{spec.relations,
                         spec.distractor_branching > 0 ? std::max<std::int64_t>(4, spec.relations / 2) : 0,
                         spec.ambiguous_fraction > 0.0 ? std::max<std::int64_t>(6, spec.relations / 2) : 0};

    Rng rng(seed);
    SyntheticDataset ds;

    auto sample_path_rel = [&] {
        return static_cast<std::int64_t>(rng.uniform_int(
            static_cast<std::uint64_t>(pools.path_relations)));
    };

    struct Planted {
        std::string topic;
        std::vector<std::string> path;      // relation surfaces, hop order
        std::vector<std::string> question_rels;  // reversed for rendering
        std::string suffix;                 // extra question text (constraint)
        std::vector<std::int64_t> distractor_sources;
    };
    std::vector<Planted> planted;
    planted.reserve(static_cast<std::size_t>(spec.questions));

    for (std::int64_t qi = 0; qi < spec.questions; ++qi) {
        Planted p;
        std::int64_t topic = static_cast<std::int64_t>(rng.uniform_int(
            static_cast<std::uint64_t>(spec.entities)));
        p.topic = entity_name(topic);
        bool fork = spec.hops >= 2 && rng.uniform() < spec.ambiguous_fraction;

        std::int64_t cursor = topic;
        p.distractor_sources.push_back(cursor);
        int plain_hops = fork ? spec.hops - 2 : spec.hops;
        for (int h = 0; h < plain_hops; ++h) {
            std::int64_t rel = sample_path_rel();
            std::int64_t next = sample_entity_except(rng, spec.entities, {cursor, topic});
            ds.graph.add_triple(entity_name(cursor), path_rel_name(rel), entity_name(next));
            p.path.push_back(path_rel_name(rel));
            cursor = next;
            p.distractor_sources.push_back(cursor);
        }

        if (fork) {
            // Two siblings reached by the same relation. The gold one carries
            // a constraint self-loop named in the question and continues with
            // the gold final relation; the decoy carries a different
            // constraint and continues with the other candidate.
            std::int64_t hop_rel = sample_path_rel();
            std::int64_t gold_rel = sample_path_rel();
            while (gold_rel == hop_rel) gold_rel = sample_path_rel();
            std::int64_t other_rel = sample_path_rel();
            while (other_rel == hop_rel || other_rel == gold_rel) other_rel = sample_path_rel();

            std::int64_t gold_mid = sample_entity_except(rng, spec.entities, {cursor, topic});
            std::int64_t decoy_mid =
                sample_entity_except(rng, spec.entities, {cursor, topic, gold_mid});
            std::int64_t answer =
                sample_entity_except(rng, spec.entities, {cursor, topic, gold_mid, decoy_mid});
            std::int64_t wrong = sample_entity_except(
                rng, spec.entities, {cursor, topic, gold_mid, decoy_mid, answer});
            std::int64_t gold_tag = static_cast<std::int64_t>(rng.uniform_int(
                static_cast<std::uint64_t>(pools.constraint_relations)));
            std::int64_t decoy_tag = gold_tag;
            while (decoy_tag == gold_tag) {
                decoy_tag = static_cast<std::int64_t>(rng.uniform_int(
                    static_cast<std::uint64_t>(pools.constraint_relations)));
            }

            ds.graph.add_triple(entity_name(cursor), path_rel_name(hop_rel), entity_name(gold_mid));
            ds.graph.add_triple(entity_name(cursor), path_rel_name(hop_rel), entity_name(decoy_mid));
            ds.graph.add_triple(entity_name(gold_mid), path_rel_name(gold_rel), entity_name(answer));
            ds.graph.add_triple(entity_name(decoy_mid), path_rel_name(other_rel), entity_name(wrong));
            ds.graph.add_triple(entity_name(gold_mid), constraint_rel_name(gold_tag),
                                entity_name(gold_mid));
            ds.graph.add_triple(entity_name(decoy_mid), constraint_rel_name(decoy_tag),
                                entity_name(decoy_mid));

            p.path.push_back(path_rel_name(hop_rel));
            p.path.push_back(path_rel_name(gold_rel));
            p.distractor_sources.push_back(gold_mid);
            p.distractor_sources.push_back(decoy_mid);

            std::string a = path_rel_name(gold_rel);
            std::string b = path_rel_name(other_rel);
            if (b < a) std::swap(a, b);
            p.question_rels.push_back(a + " or " + b);
            p.question_rels.push_back(path_rel_name(hop_rel));
            p.suffix = " with " + constraint_rel_name(gold_tag);
        } else {
            p.question_rels.assign(p.path.rbegin(), p.path.rend());
        }
        planted.push_back(std::move(p));
    }

    // Distractor edges use their own relation pool so they never extend a
    // question's oracle composition. Each path node gets the configured
    // branching once, not once per question it appears in.
    if (spec.distractor_branching > 0) {
        std::vector<std::int64_t> sources;
        std::vector<bool> seen(static_cast<std::size_t>(spec.entities), false);
        for (const Planted& p : planted) {
            for (std::int64_t src : p.distractor_sources) {
                if (!seen[static_cast<std::size_t>(src)]) {
                    seen[static_cast<std::size_t>(src)] = true;
                    sources.push_back(src);
                }
            }
        }
        for (std::int64_t src : sources) {
            for (int b = 0; b < spec.distractor_branching; ++b) {
                std::int64_t rel = static_cast<std::int64_t>(rng.uniform_int(
                    static_cast<std::uint64_t>(pools.distractor_relations)));
                std::int64_t dst = sample_entity_except(rng, spec.entities, {src});
                ds.graph.add_triple(entity_name(src), distractor_rel_name(rel),
                                    entity_name(dst));
            }
        }
    }

    // Answers come from the finished graph, so later plantings that happen
    // to extend earlier compositions are reflected in the stored gold sets.
    int width = static_cast<int>(std::to_string(spec.questions).size());
    for (std::size_t qi = 0; qi < planted.size(); ++qi) {
        const Planted& p = planted[qi];
        QAExample ex;
        std::string num = std::to_string(qi);
        ex.id = "q" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(
                                      num.size(), static_cast<std::size_t>(width)), '0') + num;
        ex.question = render_question(p.question_rels, p.topic) + p.suffix;
        ex.topics = {p.topic};
        ex.path = p.path;

        std::vector<kg::EntityId> topic_ids{*ds.graph.entities().find(p.topic)};
        std::vector<kg::RelationId> rel_ids;
        for (const std::string& r : p.path) rel_ids.push_back(*ds.graph.relations().find(r));
        std::vector<kg::EntityId> answers =
            oracle_answer(ds.graph.triples(), topic_ids, rel_ids);
        if (answers.empty()) throw DataError("synthetic generation: planted path has no answer");
        for (kg::EntityId a : answers) ex.answers.push_back(ds.graph.entities().name(a));
        ds.examples.push_back(std::move(ex));
    }

    ds.relation_lexicon = ds.graph.relations().names();
    return ds;
}

std::vector<QAExample> load_examples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    std::vector<QAExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError("invalid JSON record", lineno);
        try {
            QAExample ex;
            ex.id = j.at("id").get<std::string>();
            ex.question = j.at("question").get<std::string>();
            ex.topics = j.at("topics").get<std::vector<std::string>>();
            ex.answers = j.at("answers").get<std::vector<std::string>>();
            if (j.contains("path")) ex.path = j.at("path").get<std::vector<std::string>>();
            out.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad dataset record: ") + e.what(), lineno);
        }
    }
    return out;
}

void save_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file: " + path.string());
    for (const QAExample& ex : examples) {
        json j{{"id", ex.id},
               {"question", ex.question},
               {"topics", ex.topics},
               {"answers", ex.answers}};
        if (!ex.path.empty()) j["path"] = ex.path;
        out << j.dump() << "\n";
    }
}

void save_graph(const std::filesystem::path& path, const kg::KnowledgeGraph& g) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write graph file: " + path.string());
    for (const kg::Triple& t : g.triples()) {
        out << g.entities().name(t.head) << '\t' << g.relations().name(t.relation) << '\t'
            << g.entities().name(t.tail) << "\n";
    }
}

std::size_t validate_examples(const kg::KnowledgeGraph& g,
                              const std::vector<QAExample>& examples) {
    std::size_t checked = 0;
    for (const QAExample& ex : examples) {
        if (ex.path.empty()) continue;
        std::vector<kg::EntityId> topics;
        for (const std::string& t : ex.topics) {
            auto id = g.entities().find(t);
            if (!id) throw DataError("example " + ex.id + ": unknown topic " + t);
            topics.push_back(*id);
        }
        std::vector<kg::RelationId> rels;
        for (const std::string& r : ex.path) {
            auto id = g.relations().find(r);
            if (!id) throw DataError("example " + ex.id + ": unknown relation " + r);
            rels.push_back(*id);
        }
        std::vector<kg::EntityId> expect = oracle_answer(g.triples(), topics, rels);
        std::vector<std::string> expect_names;
        for (kg::EntityId e : expect) expect_names.push_back(g.entities().name(e));
        std::vector<std::string> stored = ex.answers;
        std::sort(stored.begin(), stored.end());
        std::sort(expect_names.begin(), expect_names.end());
        if (stored != expect_names) {
            throw DataError("example " + ex.id + ": stored answers disagree with the gold path");
        }
        ++checked;
    }
    return checked;
}

}  // namespace kbqa::harness
