#pragma once

#include <stdexcept>
#include <string>

namespace wzjscc {

// Error taxonomy. The CLI maps each family onto a distinct exit code.

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedVariant : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// All-zero encoder output reached power normalization.
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A dataset file or a pretrained asset is absent.
class MissingResource : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf during training or evaluation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace wzjscc
