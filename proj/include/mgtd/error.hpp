#pragma once

#include <stdexcept>
#include <string>

namespace mgtd {

// Base of all toolkit errors. The CLI maps any of these to exit code 1.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (JSONL corpus, matrix file, split CSV). Messages carry
// file path and 1-based line number where applicable.
class parse_error : public error {
public:
    using error::error;
};

// Invalid run configuration or missing referenced path.
class config_error : public error {
public:
    using error::error;
};

// Contract violation on in-memory data (bad label, unmapped generator,
// mismatched lengths, non-stochastic rows, ...).
class data_error : public error {
public:
    using error::error;
};

// Training diverged (non-finite loss); names epoch and batch.
class train_error : public error {
public:
    using error::error;
};

}  // namespace mgtd
