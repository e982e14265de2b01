#pragma once

#include <stdexcept>
#include <string>

namespace crashsev {

// Shape or dimension disagreement between tensors.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A caller violated an operation's precondition.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad input data (CSV ingestion, unknown labels). Carries file/line context
// when available.
struct DataError : std::runtime_error {
    DataError(std::string msg, std::string file = {}, long line = -1)
        : std::runtime_error(line >= 0 ? file + ":" + std::to_string(line) + ": " + msg
                                       : (file.empty() ? msg : file + ": " + msg)),
          file_path(std::move(file)),
          line_number(line) {}

    std::string file_path;
    long line_number;
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
    DivergenceError(std::string msg, std::size_t epoch)
        : std::runtime_error(std::move(msg)), epoch(epoch) {}

    std::size_t epoch;
};

// A checkpoint's schema hash does not match the data it is applied to.
struct SchemaMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A row id or other key was not found.
struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed configuration: config file, search-space file, bad flag values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace crashsev
