#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lbsimex {

// One rule violation found while validating raw subject data.
struct Violation {
    std::size_t row = 0;  // 0-based subject index (or CSV line for ingestion)
    std::string rule;
    std::string message;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::string what, std::vector<Violation> violations = {})
        : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Non-convergence, singular risk sets, bracket failures and the like.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lbsimex
