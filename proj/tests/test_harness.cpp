#include <doctest.h>

#include <set>

#include "kbqa/harness.hpp"
#include "testutil.hpp"

using namespace kbqa;
using harness::QAExample;
using harness::RevisionGroup;

namespace {

reasoner::ForwardTrace trace_of(std::vector<Tensor> dists) {
    reasoner::ForwardTrace t;
    for (std::size_t k = 0; k < dists.size(); ++k) {
        reasoner::StepState s;
        s.step_index = static_cast<int>(k);
        s.entity_distribution = std::move(dists[k]);
        t.steps.push_back(std::move(s));
    }
    return t;
}

// brute force: enumerate every path assignment instead of composing frontiers
std::set<kg::EntityId> enumerate_paths(std::span<const kg::Triple> triples,
                                       const std::vector<kg::EntityId>& topics,
                                       std::span<const kg::RelationId> path) {
    std::set<kg::EntityId> result;
    struct Item {
        kg::EntityId at;
        std::size_t depth;
    };
    std::vector<Item> stack;
    for (kg::EntityId t : topics) stack.push_back({t, 0});
    while (!stack.empty()) {
        Item item = stack.back();
        stack.pop_back();
        if (item.depth == path.size()) {
            result.insert(item.at);
            continue;
        }
        for (const kg::Triple& t : triples) {
            if (t.head == item.at && t.relation == path[item.depth]) {
                stack.push_back({t.tail, item.depth + 1});
            }
        }
    }
    return result;
}

}  // namespace

TEST_CASE("hits_at_1 basics") {
    Tensor p = Tensor::vector({static_cast<Real>(0.6), static_cast<Real>(0.4)});
    CHECK(harness::hits_at_1(p, {0}) == 1);
    CHECK(harness::hits_at_1(p, {1}) == 0);
    // ties break toward the lower id
    Tensor tie = Tensor::vector({static_cast<Real>(0.5), static_cast<Real>(0.5)});
    CHECK(harness::hits_at_1(tie, {0}) == 1);
    CHECK(harness::hits_at_1(tie, {1}) == 0);
}

TEST_CASE("hits_at_1 mean equals a brute-force recount on random batches") {
    Rng rng(61);
    int total = 0;
    int expected = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng.uniform_int(6);
        Tensor p = testutil::random_simplex(n, rng);
        std::vector<kg::EntityId> gold;
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < 0.3) gold.push_back(static_cast<kg::EntityId>(i));
        }
        if (gold.empty()) gold.push_back(static_cast<kg::EntityId>(rng.uniform_int(n)));
        total += harness::hits_at_1(p, gold);
        // recount: scan for the argmax by hand
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (p[i] > p[best]) best = i;
        }
        bool in = false;
        for (kg::EntityId g : gold) in = in || (g == static_cast<kg::EntityId>(best));
        expected += in ? 1 : 0;
    }
    CHECK(total == expected);
}

TEST_CASE("f1 basics and symmetry") {
    CHECK(harness::f1_score({1, 2}, {1, 2}) == doctest::Approx(1.0));
    CHECK(harness::f1_score({1, 2}, {2, 3}) == doctest::Approx(0.5));
    CHECK(harness::f1_score({}, {1}) == 0.0);
    CHECK(harness::f1_score({5}, {1}) == 0.0);
    CHECK_THROWS_AS(harness::f1_score({1}, {}), std::invalid_argument);

    // precision(pred, gold) == recall(gold, pred): F1 is symmetric
    Rng rng(62);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<kg::EntityId> a, b;
        for (int i = 0; i < 8; ++i) {
            if (rng.uniform() < 0.4) a.push_back(i);
            if (rng.uniform() < 0.4) b.push_back(i);
        }
        if (a.empty() || b.empty()) continue;
        CHECK(harness::f1_score(a, b) == doctest::Approx(harness::f1_score(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("oracle_answer composes relation paths") {
    std::vector<kg::Triple> chain{{0, 0, 1}, {1, 1, 2}};
    CHECK(harness::oracle_answer(chain, {0}, std::vector<kg::RelationId>{}) ==
          std::vector<kg::EntityId>{0});
    std::vector<kg::RelationId> path{0, 1};
    CHECK(harness::oracle_answer(chain, {0}, path) == std::vector<kg::EntityId>{2});
    std::vector<kg::RelationId> dead{1};
    CHECK(harness::oracle_answer(chain, {0}, dead).empty());
}

TEST_CASE("oracle_answer equals exhaustive path enumeration on random graphs") {
    Rng rng(63);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<kg::Triple> triples;
        for (int i = 0; i < 40; ++i) {
            triples.push_back({static_cast<kg::EntityId>(rng.uniform_int(12)),
                               static_cast<kg::RelationId>(rng.uniform_int(3)),
                               static_cast<kg::EntityId>(rng.uniform_int(12))});
        }
        std::vector<kg::EntityId> topics{static_cast<kg::EntityId>(rng.uniform_int(12))};
        std::vector<kg::RelationId> path;
        for (std::size_t h = 0; h < 1 + rng.uniform_int(3); ++h) {
            path.push_back(static_cast<kg::RelationId>(rng.uniform_int(3)));
        }
        auto fast = harness::oracle_answer(triples, topics, path);
        auto slow = enumerate_paths(triples, topics, path);
        CHECK(std::set<kg::EntityId>(fast.begin(), fast.end()) == slow);
    }
}

TEST_CASE("synthetic generator: minimum instance") {
    harness::SyntheticSpec spec;
    spec.entities = 2;
    spec.relations = 1;
    spec.hops = 1;
    spec.questions = 1;
    spec.distractor_branching = 0;
    auto ds = harness::generate_synthetic_dataset(3, spec);
    CHECK(ds.graph.triples().size() == 1);
    REQUIRE(ds.examples.size() == 1);
    const QAExample& ex = ds.examples[0];
    REQUIRE(ex.answers.size() == 1);
    const kg::Triple& t = ds.graph.triples()[0];
    CHECK(ex.answers[0] == ds.graph.entities().name(t.tail));
    CHECK(ex.topics[0] == ds.graph.entities().name(t.head));
}

TEST_CASE("synthetic generator is deterministic and oracle-consistent") {
    harness::SyntheticSpec spec;
    spec.entities = 60;
    spec.relations = 8;
    spec.hops = 2;
    spec.questions = 80;
    spec.distractor_branching = 2;
    spec.ambiguous_fraction = 0.4;

    auto a = harness::generate_synthetic_dataset(17, spec);
    auto b = harness::generate_synthetic_dataset(17, spec);
    CHECK(a.graph.triples() == b.graph.triples());
    REQUIRE(a.examples.size() == b.examples.size());
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        CHECK(a.examples[i].id == b.examples[i].id);
        CHECK(a.examples[i].question == b.examples[i].question);
        CHECK(a.examples[i].answers == b.examples[i].answers);
        CHECK(a.examples[i].path == b.examples[i].path);
    }
    // every example passes the traversal re-check
    CHECK(harness::validate_examples(a.graph, a.examples) == a.examples.size());

    auto c = harness::generate_synthetic_dataset(18, spec);
    bool any_difference = false;
    for (std::size_t i = 0; i < std::min(a.examples.size(), c.examples.size()); ++i) {
        any_difference = any_difference || (a.examples[i].question != c.examples[i].question);
    }
    CHECK(any_difference);
}

TEST_CASE("generator rejects unsatisfiable specs") {
    harness::SyntheticSpec spec;
    spec.entities = 2;
    spec.relations = 1;
    spec.hops = 5;
    spec.questions = 1;
    CHECK_THROWS_AS(harness::generate_synthetic_dataset(1, spec), std::invalid_argument);
    harness::SyntheticSpec amb;
    amb.hops = 1;
    amb.ambiguous_fraction = 0.5;
    CHECK_THROWS_AS(harness::generate_synthetic_dataset(1, amb), std::invalid_argument);
}

TEST_CASE("classify_revision on constructed traces") {
    // chain a -r0-> b -r1-> c with decoy a -r0-> d
    auto sg = testutil::make_subgraph(4, 2, {{0, 0, 1}, {1, 1, 2}, {0, 0, 3}}, {0});
    std::vector<kg::RelationId> path{0, 1};
    std::vector<kg::EntityId> gold{2};

    auto dist = [](std::initializer_list<double> v) {
        std::vector<Real> vals;
        for (double x : v) vals.push_back(static_cast<Real>(x));
        return Tensor::vector(std::move(vals));
    };
    Tensor p0 = dist({1, 0, 0, 0});

    // every intermediate argmax on the gold path, final correct: group B
    auto b_trace = trace_of({p0, dist({0.1, 0.8, 0.05, 0.05}), dist({0.05, 0.1, 0.8, 0.05})});
    CHECK(harness::classify_revision(b_trace, sg, path, gold) == RevisionGroup::B);

    // step-1 argmax lands on the decoy, final still correct: group A
    auto a_trace = trace_of({p0, dist({0.1, 0.2, 0.05, 0.65}), dist({0.05, 0.1, 0.8, 0.05})});
    CHECK(harness::classify_revision(a_trace, sg, path, gold) == RevisionGroup::A);

    // final wrong: other, regardless of the intermediates
    auto o_trace = trace_of({p0, dist({0.1, 0.8, 0.05, 0.05}), dist({0.6, 0.1, 0.2, 0.1})});
    CHECK(harness::classify_revision(o_trace, sg, path, gold) == RevisionGroup::Other);

    CHECK_THROWS_AS(harness::classify_revision(b_trace, sg, {}, gold), std::invalid_argument);
}

TEST_CASE("report aggregation partitions groups and averages metrics") {
    harness::EvalReport report;
    Rng rng(64);
    std::size_t with_path = 0;
    for (int i = 0; i < 50; ++i) {
        harness::ExampleRecord rec;
        rec.id = "x" + std::to_string(i);
        rec.hit = rng.uniform() < 0.5 ? 1 : 0;
        rec.f1 = rng.uniform();
        rec.has_path = rng.uniform() < 0.7;
        if (rec.has_path) {
            ++with_path;
            double dice = rng.uniform();
            rec.group = dice < 0.3 ? RevisionGroup::A
                                   : (dice < 0.6 ? RevisionGroup::B : RevisionGroup::Other);
        }
        report.records.push_back(rec);
    }
    harness::finalize_report(report);
    CHECK(report.count == 50);
    CHECK(report.group_a + report.group_b + report.group_other == with_path);
    double hits = 0;
    for (const auto& r : report.records) hits += r.hit;
    CHECK(report.hits_at_1 == doctest::Approx(hits / 50.0).epsilon(1e-12));
}

TEST_CASE("a perfect predictor scores hits 1.0 on oracle-labeled data") {
    harness::SyntheticSpec spec;
    spec.entities = 30;
    spec.relations = 4;
    spec.hops = 1;
    spec.questions = 20;
    auto ds = harness::generate_synthetic_dataset(5, spec);
    double hits = 0;
    for (const QAExample& ex : ds.examples) {
        // oracle-backed fake trace: all mass on the first gold answer
        auto id = ds.graph.entities().find(ex.answers[0]);
        REQUIRE(id.has_value());
        Tensor p(std::vector<std::size_t>{static_cast<std::size_t>(ds.graph.entities().size())});
        p[static_cast<std::size_t>(*id)] = 1;
        std::vector<kg::EntityId> gold;
        for (const auto& a : ex.answers) gold.push_back(*ds.graph.entities().find(a));
        hits += harness::hits_at_1(p, gold);
    }
    CHECK(hits / ds.examples.size() == doctest::Approx(1.0));
}

TEST_CASE("dataset files round-trip through JSONL") {
    harness::SyntheticSpec spec;
    spec.entities = 20;
    spec.relations = 3;
    spec.hops = 2;
    spec.questions = 10;
    auto ds = harness::generate_synthetic_dataset(9, spec);
    auto dir = std::filesystem::temp_directory_path() / "kbqa_harness_io";
    std::filesystem::create_directories(dir);
    harness::save_examples(dir / "x.jsonl", ds.examples);
    auto loaded = harness::load_examples(dir / "x.jsonl");
    REQUIRE(loaded.size() == ds.examples.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == ds.examples[i].id);
        CHECK(loaded[i].question == ds.examples[i].question);
        CHECK(loaded[i].topics == ds.examples[i].topics);
        CHECK(loaded[i].answers == ds.examples[i].answers);
        CHECK(loaded[i].path == ds.examples[i].path);
    }
    harness::save_graph(dir / "g.tsv", ds.graph);
    auto g2 = kg::load_triples(dir / "g.tsv");
    CHECK(g2.triples().size() == ds.graph.triples().size());
    CHECK(harness::validate_examples(g2, loaded) == loaded.size());
}
