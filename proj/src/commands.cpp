#include "kbqa/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "kbqa/checkpoint.hpp"
#include "kbqa/train.hpp"

namespace kbqa::commands {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_config_header(std::ostream& out, const std::map<std::string, std::string>& snapshot) {
    out << "#";
    for (const auto& [k, v] : snapshot) out << " " << k << "=" << v;
    out << "\n";
}

struct LoadedData {
    kg::KnowledgeGraph graph;
    std::vector<harness::QAExample> examples;
};

LoadedData load_dataset(const std::filesystem::path& graph_path,
                        const std::filesystem::path& data_path) {
    LoadedData d;
    d.graph = kg::load_triples(graph_path);
    d.examples = harness::load_examples(data_path);
    harness::validate_examples(d.graph, d.examples);
    return d;
}

train::SubgraphSettings subgraph_from_snapshot(const std::map<std::string, std::string>& snap) {
    train::SubgraphSettings s;
    auto it = snap.find("subgraph_mode");
    if (it != snap.end()) s.mode = it->second;
    it = snap.find("ppr_damping");
    if (it != snap.end()) s.ppr_damping = std::stod(it->second);
    it = snap.find("ppr_max_entities");
    if (it != snap.end()) s.ppr_max_entities = std::stoll(it->second);
    return s;
}

void check_relation_space(const train::KbqaModel& model, const kg::KnowledgeGraph& graph) {
    if (model.relation_names != kg::doubled_relation_names(graph)) {
        throw DataError(
            "relation vocabulary mismatch: the checkpoint was trained against a different "
            "graph (relation ids would not line up with the embedding table)");
    }
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> nearest_entities(const kg::KnowledgeGraph& g, const std::string& query,
                                          std::size_t count) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const std::string& name : g.entities().names()) {
        scored.emplace_back(edit_distance(query, name), name);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(count, scored.size()); ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

json trace_record(const reasoner::StepState& step, const kg::KnowledgeSubgraph& sg) {
    const Tensor& p = step.entity_distribution;
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&p](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    json top = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(10, order.size()); ++i) {
        top.push_back({{"entity", sg.entities.name(static_cast<std::int64_t>(order[i]))},
                       {"p", p[order[i]]}});
    }
    json token_attention = json::array();
    for (std::size_t i = 0; i < step.token_attention.size(); ++i) {
        token_attention.push_back(step.token_attention[i]);
    }
    json entity_attention = json::array();
    for (std::size_t i = 0; i < step.entity_attention.size(); ++i) {
        entity_attention.push_back(step.entity_attention[i]);
    }
    return json{{"step", step.step_index},
                {"top_entities", top},
                {"token_attention", token_attention},
                {"entity_attention", entity_attention}};
}

}  // namespace

void gen_data(const GenDataOptions& opts, std::ostream& out) {
    harness::SyntheticDataset ds = harness::generate_synthetic_dataset(opts.seed, opts.spec);
    harness::validate_examples(ds.graph, ds.examples);

    std::filesystem::create_directories(opts.out_dir);
    harness::save_graph(opts.out_dir / "graph.tsv", ds.graph);

    std::vector<harness::QAExample> splits[3];
    for (const harness::QAExample& ex : ds.examples) {
        std::uint64_t bucket = fnv1a(ex.id) % 10;
        int split = bucket < 8 ? 0 : (bucket == 8 ? 1 : 2);
        splits[split].push_back(ex);
    }
    harness::save_examples(opts.out_dir / "train.jsonl", splits[0]);
    harness::save_examples(opts.out_dir / "dev.jsonl", splits[1]);
    harness::save_examples(opts.out_dir / "test.jsonl", splits[2]);

    {
        std::ofstream lex(opts.out_dir / "relations.txt");
        for (const std::string& r : ds.relation_lexicon) lex << r << "\n";
    }
    {
        std::ofstream meta(opts.out_dir / "meta.txt");
        meta << "seed=" << opts.seed << "\n"
             << "entities=" << opts.spec.entities << "\n"
             << "relations=" << opts.spec.relations << "\n"
             << "hops=" << opts.spec.hops << "\n"
             << "questions=" << opts.spec.questions << "\n"
             << "distractor_branching=" << opts.spec.distractor_branching << "\n"
             << "ambiguous_fraction=" << opts.spec.ambiguous_fraction << "\n"
             << "graph_triples=" << ds.graph.triples().size() << "\n"
             << "split_train=" << splits[0].size() << "\n"
             << "split_dev=" << splits[1].size() << "\n"
             << "split_test=" << splits[2].size() << "\n";
    }
    out << "wrote " << ds.graph.triples().size() << " triples, " << splits[0].size()
        << " train / " << splits[1].size() << " dev / " << splits[2].size() << " test examples to "
        << opts.out_dir.string() << "\n";
}

void train(const config::RunConfig& cfg, std::ostream& out) {
    config::validate(cfg, true);
    std::filesystem::create_directories(cfg.out_dir);
    std::map<std::string, std::string> snap = config::snapshot(cfg);

    LoadedData train_data = load_dataset(cfg.graph_path, cfg.train_path);
    std::vector<harness::QAExample> dev_examples = harness::load_examples(cfg.dev_path);
    harness::validate_examples(train_data.graph, dev_examples);

    encoder::Vocabulary vocab = train::build_vocabulary(train_data.examples);
    std::vector<std::string> relation_names = kg::doubled_relation_names(train_data.graph);

    train::PreparedDataset train_prepared = train::prepare_examples(
        train_data.graph, train_data.examples, vocab, cfg.train, cfg.subgraph, true);
    train::PreparedDataset dev_prepared = train::prepare_examples(
        train_data.graph, dev_examples, vocab, cfg.train, cfg.subgraph, false);
    if (train_prepared.unanswerable > 0) {
        out << "skipped " << train_prepared.unanswerable
            << " training examples with no gold answer in the subgraph\n";
    }

    encoder::WordVectors vectors;
    const encoder::WordVectors* pretrained = nullptr;
    if (!cfg.word_vectors_path.empty()) {
        vectors = encoder::load_word_vectors(cfg.word_vectors_path);
        pretrained = &vectors;
    }

    if (!cfg.train.use_teacher) {
        Rng rng(cfg.train.seed);
        train::KbqaModel init =
            train::init_model(vocab, relation_names, cfg.train, rng, pretrained);
        std::ofstream log(std::filesystem::path(cfg.out_dir) / "student.log");
        write_config_header(log, snap);
        train::TrainResult result =
            train::train_student(train_prepared.examples, dev_prepared.examples, init, nullptr,
                                 &log);
        checkpoint::save_checkpoint(std::filesystem::path(cfg.out_dir) / "student.ckpt",
                                    result.model, snap, cfg.train.seed);
        out << "student (no teacher): best dev hits@1 " << result.best_dev_hits << " at epoch "
            << result.best_epoch << "\n";
        return;
    }

    Rng teacher_rng(cfg.train.seed);
    train::KbqaModel teacher_init =
        train::init_model(vocab, relation_names, cfg.train, teacher_rng, pretrained);
    std::ofstream teacher_log(std::filesystem::path(cfg.out_dir) / "teacher.log");
    write_config_header(teacher_log, snap);
    train::TrainResult teacher =
        train::train_teacher(train_prepared.examples, dev_prepared.examples, teacher_init,
                             &teacher_log);
    checkpoint::save_checkpoint(std::filesystem::path(cfg.out_dir) / "teacher.ckpt",
                                teacher.model, snap, cfg.train.seed);
    out << "teacher: best dev hits@1 " << teacher.best_dev_hits << " at epoch "
        << teacher.best_epoch << "\n";

    Rng student_rng(cfg.train.seed + 1);
    train::KbqaModel student_init =
        train::init_model(vocab, relation_names, cfg.train, student_rng, pretrained);
    std::ofstream student_log(std::filesystem::path(cfg.out_dir) / "student.log");
    write_config_header(student_log, snap);
    train::TrainResult student =
        train::train_student(train_prepared.examples, dev_prepared.examples, student_init,
                             &teacher.model, &student_log);
    checkpoint::save_checkpoint(std::filesystem::path(cfg.out_dir) / "student.ckpt",
                                student.model, snap, cfg.train.seed);
    out << "student: best dev hits@1 " << student.best_dev_hits << " at epoch "
        << student.best_epoch << "\n";
}

void eval(const EvalOptions& opts, std::ostream& out) {
    checkpoint::LoadedCheckpoint loaded = checkpoint::load_checkpoint(opts.checkpoint);
    LoadedData data = load_dataset(opts.graph, opts.data);
    if (data.examples.empty()) {
        throw DataError("dataset file has no examples: " + opts.data.string());
    }
    check_relation_space(loaded.model, data.graph);

    train::SubgraphSettings subgraph = subgraph_from_snapshot(loaded.config_snapshot);
    train::PreparedDataset prepared = train::prepare_examples(
        data.graph, data.examples, loaded.model.vocab, loaded.model.cfg, subgraph, false);
    harness::EvalReport report = train::evaluate(loaded.model, prepared.examples);

    out << "examples\t" << report.count << "\n";
    out << "hits@1\t" << report.hits_at_1 << "\n";
    out << "f1\t" << report.f1 << "\n";
    out << "revision_group_a\t" << report.group_a << "\n";
    out << "revision_group_b\t" << report.group_b << "\n";
    out << "revision_group_other\t" << report.group_other << "\n";
    out << "unanswerable\t" << report.unanswerable << "\n";

    std::filesystem::path report_path = opts.report_path;
    if (report_path.empty()) {
        report_path = opts.data;
        report_path.replace_extension(".eval.jsonl");
    }
    std::ofstream rep(report_path);
    if (!rep) throw DataError("cannot write report: " + report_path.string());
    json meta{{"record", "meta"},
              {"config", loaded.config_snapshot},
              {"hits_at_1", report.hits_at_1},
              {"f1", report.f1},
              {"examples", report.count},
              {"group_a", report.group_a},
              {"group_b", report.group_b},
              {"group_other", report.group_other},
              {"unanswerable", report.unanswerable}};
    rep << meta.dump() << "\n";
    for (const harness::ExampleRecord& r : report.records) {
        json j{{"id", r.id},
               {"hit", r.hit},
               {"f1", r.f1},
               {"answerable", r.answerable},
               {"predicted", r.predicted}};
        if (r.has_path) {
            j["group"] = r.group == harness::RevisionGroup::A
                             ? "A"
                             : (r.group == harness::RevisionGroup::B ? "B" : "other");
        }
        rep << j.dump() << "\n";
    }
    out << "report written to " << report_path.string() << "\n";
}

void infer(const InferOptions& opts, std::ostream& out) {
    checkpoint::LoadedCheckpoint loaded = checkpoint::load_checkpoint(opts.checkpoint);
    kg::KnowledgeGraph graph = kg::load_triples(opts.graph);
    check_relation_space(loaded.model, graph);

    std::vector<kg::EntityId> topics;
    for (const std::string& t : opts.topics) {
        auto id = graph.entities().find(t);
        if (!id) {
            std::string msg = "unknown topic entity '" + t + "'; nearest names:";
            for (const std::string& near : nearest_entities(graph, t, 3)) msg += " " + near;
            throw DataError(msg);
        }
        topics.push_back(*id);
    }

    harness::QAExample ex;
    ex.id = "query";
    ex.question = opts.question;
    ex.topics = opts.topics;
    train::SubgraphSettings subgraph = subgraph_from_snapshot(loaded.config_snapshot);
    train::PreparedDataset prepared = train::prepare_examples(
        graph, {ex}, loaded.model.vocab, loaded.model.cfg, subgraph, false);
    const train::TrainExample& te = prepared.examples.front();

    reasoner::ForwardTrace trace = train::run_forward(loaded.model, te);
    std::vector<kg::EntityId> answers =
        reasoner::select_answers(trace.final_distribution(), loaded.model.cfg.threshold);

    const Tensor& p = trace.final_distribution();
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&p](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    out << "answers:";
    for (kg::EntityId a : answers) out << " " << te.subgraph.entities.name(a);
    out << "\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(10, order.size()); ++i) {
        out << std::setw(2) << (i + 1) << ". "
            << te.subgraph.entities.name(static_cast<std::int64_t>(order[i])) << "\t"
            << p[order[i]] << "\n";
    }

    if (!opts.trace_path.empty()) {
        std::ofstream tr(opts.trace_path);
        if (!tr) throw DataError("cannot write trace: " + opts.trace_path.string());
        for (const reasoner::StepState& step : trace.steps) {
            tr << trace_record(step, te.subgraph).dump() << "\n";
        }
        out << "trace written to " << opts.trace_path.string() << "\n";
    }
}

void inspect_trace(const std::filesystem::path& trace_path, std::ostream& out) {
    std::ifstream in(trace_path);
    if (!in) throw DataError("cannot open trace: " + trace_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("invalid trace record", lineno);
        out << "step " << j.value("step", -1) << "\n";
        out << "  top entities:";
        for (const json& e : j.value("top_entities", json::array())) {
            out << "  " << e.value("entity", std::string("?")) << "=" << e.value("p", 0.0);
        }
        out << "\n";
        const json& ta = j.value("token_attention", json::array());
        if (!ta.empty()) {
            out << "  token attention:";
            for (const json& a : ta) out << " " << a.get<double>();
            out << "\n";
        }
        const json& ea = j.value("entity_attention", json::array());
        out << "  entity attention:";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, ea.size()); ++i) {
            out << " " << ea[i].get<double>();
        }
        if (ea.size() > 10) out << " ...";
        out << "\n";
    }
}

}  // namespace kbqa::commands
