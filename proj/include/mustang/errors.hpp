#pragma once

#include <stdexcept>
#include <string>

namespace mustang {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension / shape mismatch between operands.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A caller violated an operation's precondition (non-scalar loss,
// missing self-loops, empty graph, degenerate projection, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Malformed input data: bad manifest, inconsistent embedding file,
// non-binary label, stain filter emptying a bag.
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failure (missing or unreadable file).
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Corrupted or inconsistent checkpoint file.
struct CheckpointError : Error {
    explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

// Train/test split cannot satisfy the stratification contract.
struct StratifyError : Error {
    explicit StratifyError(const std::string& msg) : Error(msg) {}
};

}  // namespace mustang
