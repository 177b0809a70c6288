#include "kbqa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace kbqa::train {

namespace {

constexpr Real kAdamBeta1 = static_cast<Real>(0.9);
constexpr Real kAdamBeta2 = static_cast<Real>(0.999);
constexpr Real kAdamEps = static_cast<Real>(1e-8);

std::vector<kg::EntityId> resolve_topics(const kg::KnowledgeGraph& g,
                                         const std::vector<std::string>& topics) {
    std::vector<kg::EntityId> out;
    for (const std::string& t : topics) {
        auto id = g.entities().find(t);
        if (!id) throw DataError("unknown topic entity: " + t);
        out.push_back(*id);
    }
    return out;
}

}  // namespace

Tensor gold_distribution(const std::vector<kg::EntityId>& answers,
                         const kg::KnowledgeSubgraph& sg) {
    std::set<kg::EntityId> present;
    for (kg::EntityId a : answers) {
        if (a >= 0 && a < sg.entity_count()) present.insert(a);
    }
    if (present.empty()) {
        throw UnanswerableError("no gold answer is present in the subgraph");
    }
    Tensor p(std::vector<std::size_t>{static_cast<std::size_t>(sg.entity_count())});
    Real mass = Real(1) / static_cast<Real>(present.size());
    for (kg::EntityId a : present) p[static_cast<std::size_t>(a)] = mass;
    return p;
}

encoder::Vocabulary build_vocabulary(const std::vector<harness::QAExample>& examples) {
    encoder::Vocabulary vocab;
    for (const harness::QAExample& ex : examples) {
        for (const std::string& tok : encoder::tokenize(ex.question)) vocab.add(tok);
    }
    return vocab;
}

PreparedDataset prepare_examples(const kg::KnowledgeGraph& g,
                                 const std::vector<harness::QAExample>& examples,
                                 const encoder::Vocabulary& vocab, const TrainConfig& cfg,
                                 const SubgraphSettings& subgraph, bool for_training) {
    if (subgraph.mode != "nhop" && subgraph.mode != "ppr") {
        throw ConfigError("subgraph mode must be nhop or ppr");
    }
    PreparedDataset out;
    for (const harness::QAExample& ex : examples) {
        TrainExample te;
        te.id = ex.id;
        te.token_ids = encoder::to_ids(vocab, encoder::tokenize(ex.question));

        std::vector<kg::EntityId> topic_ids = resolve_topics(g, ex.topics);
        kg::KnowledgeSubgraph sg =
            subgraph.mode == "ppr"
                ? kg::extract_subgraph_ppr(g, topic_ids, subgraph.ppr_damping,
                                           subgraph.ppr_max_entities)
                : kg::extract_subgraph_nhop(g, topic_ids, cfg.steps);
        te.subgraph = kg::add_inverse_relations(sg);

        for (const std::string& a : ex.answers) {
            auto local = te.subgraph.entities.find(a);
            if (local) te.gold_local.push_back(*local);
        }
        std::sort(te.gold_local.begin(), te.gold_local.end());

        for (const std::string& r : ex.path) {
            auto id = g.relations().find(r);
            if (!id) throw DataError("example " + ex.id + ": unknown path relation " + r);
            te.gold_path.push_back(*id);
        }

        if (te.gold_local.empty()) {
            ++out.unanswerable;
            if (for_training) continue;
        } else {
            te.gold_distribution = gold_distribution(te.gold_local, te.subgraph);
        }
        out.examples.push_back(std::move(te));
    }
    return out;
}

KbqaModel init_model(const encoder::Vocabulary& vocab,
                     const std::vector<std::string>& relation_names, const TrainConfig& cfg,
                     Rng& rng, const encoder::WordVectors* pretrained) {
    KbqaModel model;
    model.vocab = vocab;
    model.relation_names = relation_names;
    model.cfg = cfg;
    encoder::add_encoder_parameters(model.params, vocab, model.encoder_config(), rng, pretrained);
    reasoner::add_reasoner_parameters(model.params,
                                      static_cast<std::int64_t>(relation_names.size()),
                                      model.reasoner_config(), rng);
    return model;
}

reasoner::ForwardTrace run_forward(const KbqaModel& model, const TrainExample& ex) {
    Tape tape;
    Binding binding = bind_parameters(tape, model.params);
    encoder::Encoded enc = encoder::encode(tape, binding, ex.token_ids, model.encoder_config());
    reasoner::ForwardPass pass =
        reasoner::forward(tape, binding, enc, ex.subgraph, model.reasoner_config());
    return std::move(pass.trace);
}

std::vector<Tensor> step_distributions(const KbqaModel& model, const TrainExample& ex) {
    reasoner::ForwardTrace trace = run_forward(model, ex);
    std::vector<Tensor> out;
    out.reserve(trace.steps.size());
    for (const reasoner::StepState& s : trace.steps) out.push_back(s.entity_distribution);
    return out;
}

LossReport student_loss(const reasoner::ForwardTrace& student,
                        const reasoner::ForwardTrace& teacher, const Tensor& gold, Real lambda) {
    if (student.steps.size() != teacher.steps.size()) {
        throw std::invalid_argument("student_loss: traces have different step counts");
    }
    if (student.final_distribution().size() != teacher.final_distribution().size()) {
        throw std::invalid_argument("student_loss: traces cover different entity spaces");
    }
    // Supervision targets sit in the p slot, the trained network in the
    // clamped q slot (the torch kl_div convention this model family uses).
    LossReport report;
    report.l1 = kl_divergence(gold, student.final_distribution());
    for (std::size_t k = 1; k < student.steps.size(); ++k) {
        Real term = kl_divergence(teacher.steps[k].entity_distribution,
                                  student.steps[k].entity_distribution);
        report.per_step.push_back(term);
        report.l2 += term;
    }
    report.total = report.l1 + lambda * report.l2;
    return report;
}

void adam_step(ModelParameters& params, const std::map<std::string, Tensor>& grads,
               OptimizerState& state, Real learning_rate) {
    if (state.slots.empty()) {
        state.slots.reserve(params.count());
        for (std::size_t i = 0; i < params.count(); ++i) {
            state.slots.push_back({Tensor(params.tensor(i).shape()),
                                   Tensor(params.tensor(i).shape())});
        }
    }
    if (state.slots.size() != params.count()) {
        throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    }
    ++state.step;
    Real bc1 = Real(1) - std::pow(kAdamBeta1, static_cast<Real>(state.step));
    Real bc2 = Real(1) - std::pow(kAdamBeta2, static_cast<Real>(state.step));
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto it = grads.find(params.name(i));
        if (it == grads.end()) throw std::invalid_argument("adam_step: missing gradient");
        const Tensor& g = it->second;
        Tensor& p = params.tensor(i);
        OptimizerState::Slot& slot = state.slots[i];
        if (!g.same_shape(p)) throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            slot.m[j] = kAdamBeta1 * slot.m[j] + (Real(1) - kAdamBeta1) * g[j];
            slot.v[j] = kAdamBeta2 * slot.v[j] + (Real(1) - kAdamBeta2) * g[j] * g[j];
            Real mhat = slot.m[j] / bc1;
            Real vhat = slot.v[j] / bc2;
            p[j] -= learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

harness::EvalReport evaluate(const KbqaModel& model, const std::vector<TrainExample>& examples) {
    harness::EvalReport report;
    for (const TrainExample& ex : examples) {
        harness::ExampleRecord rec;
        rec.id = ex.id;
        rec.answerable = !ex.gold_local.empty();
        reasoner::ForwardTrace trace = run_forward(model, ex);
        std::vector<kg::EntityId> predicted =
            reasoner::select_answers(trace.final_distribution(), model.cfg.threshold);
        for (kg::EntityId p : predicted) {
            rec.predicted.push_back(ex.subgraph.entities.name(p));
        }
        if (rec.answerable) {
            rec.hit = harness::hits_at_1(trace.final_distribution(), ex.gold_local);
            rec.f1 = harness::f1_score(predicted, ex.gold_local);
        }
        if (!ex.gold_path.empty()) {
            rec.has_path = true;
            rec.group = rec.answerable
                            ? harness::classify_revision(trace, ex.subgraph, ex.gold_path,
                                                         ex.gold_local)
                            : harness::RevisionGroup::Other;
        }
        report.records.push_back(std::move(rec));
    }
    harness::finalize_report(report);
    return report;
}

namespace {

// Shared epoch loop; `teacher` null trains on the final-answer KL alone.
TrainResult run_training(const std::vector<TrainExample>& train_set,
                         const std::vector<TrainExample>& dev_set, const KbqaModel& init,
                         const KbqaModel* teacher, bool distill, std::ostream* log) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    const TrainConfig& cfg = init.cfg;
    if (distill && teacher != nullptr && teacher->cfg.steps != cfg.steps) {
        throw std::invalid_argument("teacher and student were configured with different steps");
    }

    TrainResult result;
    result.model = init;
    KbqaModel& model = result.model;
    OptimizerState opt;
    Rng shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ull + 1);

    KbqaModel best = model;
    double best_hits = -1.0;
    int best_epoch = 0;
    int stale = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        Real epoch_loss = 0;
        std::size_t seen = 0;
        GradientBuffer buffer(model.params);
        std::size_t in_batch = 0;

        auto flush = [&] {
            if (in_batch == 0) return;
            buffer.scale(Real(1) / static_cast<Real>(in_batch));
            buffer.clip_global_norm(cfg.clip_norm);
            adam_step(model.params, buffer.grads(), opt, cfg.learning_rate);
            buffer.reset();
            in_batch = 0;
        };

        for (std::size_t idx : order) {
            const TrainExample& ex = train_set[idx];
            Tape tape;
            Binding binding = bind_parameters(tape, model.params);
            encoder::Encoded enc =
                encoder::encode(tape, binding, ex.token_ids, model.encoder_config());
            reasoner::ForwardPass pass =
                reasoner::forward(tape, binding, enc, ex.subgraph, model.reasoner_config());

            TensorId gold = tape.constant(ex.gold_distribution);
            TensorId loss = tape.kl_divergence_op(gold, pass.final_distribution);
            if (distill && teacher != nullptr) {
                std::vector<Tensor> teacher_steps = step_distributions(*teacher, ex);
                TensorId l2 = TensorId(-1);
                for (std::size_t k = 1; k < teacher_steps.size(); ++k) {
                    TensorId term = tape.kl_divergence_op(tape.constant(teacher_steps[k]),
                                                          pass.step_distributions[k]);
                    l2 = (l2 < 0) ? term : tape.add(l2, term);
                }
                loss = tape.add(loss, tape.scale(l2, cfg.lambda));
            }

            Real loss_value = tape.value(loss)[0];
            if (!std::isfinite(loss_value)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", example " + ex.id);
            }
            epoch_loss += loss_value;
            ++seen;

            tape.backward(loss);
            buffer.accumulate(gradient(tape, loss, binding));
            if (++in_batch == static_cast<std::size_t>(cfg.batch_size)) flush();
        }
        flush();

        harness::EvalReport dev = evaluate(model, dev_set);
        auto t1 = std::chrono::steady_clock::now();

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen > 0 ? epoch_loss / static_cast<Real>(seen) : Real(0);
        stats.dev_hits = dev.hits_at_1;
        stats.dev_f1 = dev.f1;
        stats.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.epochs.push_back(stats);
        if (log) {
            (*log) << epoch << '\t' << stats.train_loss << '\t' << stats.dev_hits << '\t'
                   << stats.dev_f1 << '\t' << stats.seconds << '\n';
            log->flush();
        }

        if (dev.hits_at_1 > best_hits) {
            best_hits = dev.hits_at_1;
            best_epoch = epoch;
            best = model;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }

    result.model = std::move(best);
    result.best_dev_hits = std::max(best_hits, 0.0);
    result.best_epoch = best_epoch;
    return result;
}

}  // namespace

TrainResult train_teacher(const std::vector<TrainExample>& train_set,
                          const std::vector<TrainExample>& dev_set, const KbqaModel& init,
                          std::ostream* log) {
    return run_training(train_set, dev_set, init, nullptr, false, log);
}

TrainResult train_student(const std::vector<TrainExample>& train_set,
                          const std::vector<TrainExample>& dev_set, const KbqaModel& init,
                          const KbqaModel* teacher, std::ostream* log) {
    bool distill = init.cfg.use_teacher;
    if (distill && teacher == nullptr) {
        throw std::invalid_argument("train_student: teacher required when use_teacher is set");
    }
    return run_training(train_set, dev_set, init, teacher, distill, log);
}

}  // namespace kbqa::train
