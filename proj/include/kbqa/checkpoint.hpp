#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "kbqa/train.hpp"

namespace kbqa::checkpoint {

class VersionError : public DataError {
    using DataError::DataError;
};
class ShapeTableError : public DataError {
    using DataError::DataError;
};
class TruncatedPayloadError : public DataError {
    using DataError::DataError;
};

// Plain-text key=value manifest (format version, config snapshot, vocab,
// relation table, parameter name->shape table) followed by a `---` line and
// the raw little-endian parameter payload in manifest order.
void save_checkpoint(const std::filesystem::path& path, const train::KbqaModel& model,
                     const std::map<std::string, std::string>& config_snapshot,
                     std::uint64_t seed);

struct LoadedCheckpoint {
    train::KbqaModel model;
    std::map<std::string, std::string> config_snapshot;
    std::uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kbqa::checkpoint
