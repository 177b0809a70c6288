#include <iostream>

#include <CLI11.hpp>

#include "kbqa/checkpoint.hpp"
#include "kbqa/commands.hpp"
#include "kbqa/config.hpp"

namespace {

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

kbqa::config::RunConfig assemble_config(const std::string& config_file,
                                        const std::vector<std::string>& overrides) {
    kbqa::config::RunConfig cfg;  // built-in defaults
    if (!config_file.empty()) {
        kbqa::config::apply_settings(cfg, kbqa::config::parse_config_file(config_file));
    }
    kbqa::config::apply_overrides(cfg, overrides);  // highest precedence
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-hop knowledge-graph question answering"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    kbqa::commands::GenDataOptions gen_opts;
    std::string gen_out = "data";
    gen->add_option("--seed", gen_opts.seed, "generation seed");
    gen->add_option("--entities", gen_opts.spec.entities, "entity pool size");
    gen->add_option("--relations", gen_opts.spec.relations, "path relation count");
    gen->add_option("--hops", gen_opts.spec.hops, "reasoning path length");
    gen->add_option("--questions", gen_opts.spec.questions, "question count");
    gen->add_option("--branching", gen_opts.spec.distractor_branching,
                    "distractor edges per path node");
    gen->add_option("--ambiguity", gen_opts.spec.ambiguous_fraction,
                    "fraction of fork questions (0..1)");
    gen->add_option("--out", gen_out, "output directory");

    // train
    auto* tr = app.add_subcommand("train", "train the teacher and the distilled student");
    std::string train_config_file;
    std::vector<std::string> train_overrides;
    tr->add_option("--config", train_config_file, "key=value config file");
    tr->add_option("--set", train_overrides, "config override key=value (repeatable)");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    kbqa::commands::EvalOptions eval_opts;
    ev->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
    ev->add_option("--graph", eval_opts.graph, "triples file")->required();
    ev->add_option("--data", eval_opts.data, "JSONL dataset")->required();
    ev->add_option("--report", eval_opts.report_path, "per-example report path");

    // infer
    auto* in = app.add_subcommand("infer", "answer one question");
    kbqa::commands::InferOptions infer_opts;
    in->add_option("--checkpoint", infer_opts.checkpoint, "checkpoint file")->required();
    in->add_option("--graph", infer_opts.graph, "triples file")->required();
    in->add_option("--question", infer_opts.question, "question text")->required();
    in->add_option("--topics", infer_opts.topics, "topic entities")->required();
    in->add_option("--trace", infer_opts.trace_path, "write a JSONL reasoning trace here");

    // inspect-trace
    auto* insp = app.add_subcommand("inspect-trace", "pretty-print a reasoning trace");
    std::string trace_file;
    insp->add_option("trace", trace_file, "trace JSONL file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            gen_opts.out_dir = gen_out;
            kbqa::commands::gen_data(gen_opts, std::cout);
        } else if (tr->parsed()) {
            kbqa::commands::train(assemble_config(train_config_file, train_overrides),
                                  std::cout);
        } else if (ev->parsed()) {
            kbqa::commands::eval(eval_opts, std::cout);
        } else if (in->parsed()) {
            kbqa::commands::infer(infer_opts, std::cout);
        } else if (insp->parsed()) {
            kbqa::commands::inspect_trace(trace_file, std::cout);
        }
    } catch (const kbqa::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const kbqa::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
