#pragma once

#include <stdexcept>
#include <string>

namespace carbon_audit {

// Base of every error raised by the library. Callers that only care about
// "this input was rejected" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class SchemaError : public ParseError {
public:
    using ParseError::ParseError;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ClassificationError : public Error {
public:
    using Error::Error;
};

class UnsupportedFormatError : public Error {
public:
    using Error::Error;
};

class OutOfBoundsError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class UnsupportedExtentError : public GeometryError {
public:
    using GeometryError::GeometryError;
};

class EmptyZoneError : public Error {
public:
    using Error::Error;
};

class NodataZoneError : public Error {
public:
    using Error::Error;
};

class RenderError : public Error {
public:
    using Error::Error;
};

} // namespace carbon_audit
