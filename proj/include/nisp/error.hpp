#pragma once

#include <stdexcept>
#include <string>

namespace nisp {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed serialized input (model JSON, dataset CSV, plan JSON).
class ParseError : public Error {
public:
    using Error::Error;
};

// Incompatible shapes or dimensions between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside an operation's domain (index out of range, bad ratio, unsupported kind).
class DomainError : public Error {
public:
    using Error::Error;
};

// A numerical procedure could not produce a valid result (singular system, non-finite data).
class NumericError : public Error {
public:
    using Error::Error;
};

// The library broke one of its own guarantees. Indicates a bug, not bad input.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace nisp
