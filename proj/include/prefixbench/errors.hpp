#pragma once

#include <stdexcept>
#include <string>

namespace pbench {

// Shape/dimension mismatch between operands.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate numeric input (e.g. zero-norm vector fed to cosine similarity).
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejection sampling or expert oracle could not produce a valid result.
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A word outside the vocabulary was encountered.
struct TokenizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training loss left the finite range.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An expected artifact (file) is missing or malformed.
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pbench
