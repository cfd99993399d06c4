#pragma once

#include <stdexcept>
#include <string>

namespace bdeu {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input (CSV structure, sidecar JSON, grid descriptors).
class FormatError : public Error {
public:
    using Error::Error;
};

// Column-level preprocessing failure (discretization, imputation, encoding).
class PreprocessError : public Error {
public:
    using Error::Error;
};

// An operation was called with arguments that violate its contract.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// A numerical function was evaluated outside its domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Problem size exceeds what the exact algorithms support.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace bdeu
