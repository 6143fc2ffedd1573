#pragma once

#include <stdexcept>
#include <string>

namespace trussrl {

enum class ErrorCategory {
    input,       // malformed scenario/config or non-finite numbers
    encoding,    // state tensor cannot hold the inventory
    decode,      // flat action index out of range
    model,       // structural model cannot be built (e.g. load with no attachment)
    analysis,    // singular stiffness (mechanism / floating structure)
    numeric,     // overflow or non-finite results
    contract,    // caller broke a precondition (e.g. infeasible action)
    generation,  // baseline retries exhausted
    shape,       // network/checkpoint tensor shape mismatch
    io,
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::input: return "input";
        case ErrorCategory::encoding: return "encoding";
        case ErrorCategory::decode: return "decode";
        case ErrorCategory::model: return "model";
        case ErrorCategory::analysis: return "analysis";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::contract: return "contract";
        case ErrorCategory::generation: return "generation";
        case ErrorCategory::shape: return "shape";
        case ErrorCategory::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Process exit code used by the CLI for each category.
inline int exit_code(ErrorCategory c) { return 10 + static_cast<int>(c); }

}  // namespace trussrl
