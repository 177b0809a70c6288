#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kbqa/config.hpp"
#include "kbqa/harness.hpp"

namespace kbqa::commands {

struct GenDataOptions {
    std::uint64_t seed = 7;
    harness::SyntheticSpec spec;
    std::filesystem::path out_dir = "data";
};

// Writes graph.tsv, relations.txt, meta.txt and the 80/10/10 JSONL splits
// (assignment by example-id hash).
void gen_data(const GenDataOptions& opts, std::ostream& out);

// Trains the teacher and then the distilled student (one model only when
// use_teacher is off); writes checkpoints and per-epoch logs to out_dir.
void train(const config::RunConfig& cfg, std::ostream& out);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path graph;
    std::filesystem::path data;
    std::filesystem::path report_path;  // empty = next to the data file
};

void eval(const EvalOptions& opts, std::ostream& out);

struct InferOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path graph;
    std::string question;
    std::vector<std::string> topics;
    std::filesystem::path trace_path;  // empty = no trace dump
};

void infer(const InferOptions& opts, std::ostream& out);

void inspect_trace(const std::filesystem::path& trace_path, std::ostream& out);

}  // namespace kbqa::commands
