// Exception types shared by every tatt module.
#pragma once

#include <stdexcept>
#include <string>

namespace tatt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible matrix / vector shapes. Messages carry both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A value became NaN or infinite.
class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Token or time id outside the model's vocabularies.
class VocabError : public Error {
public:
    using Error::Error;
};

/// Sequence longer than the model's max_len.
class LengthError : public Error {
public:
    using Error::Error;
};

/// ||T|| at or below the norm floor in temporal attention.
class DegenerateTimeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptyCorpusError : public Error {
public:
    using Error::Error;
};

/// Checkpoint bytes are truncated or fail validation.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class AbsentWordError : public Error {
public:
    using Error::Error;
};

/// Zero vector passed to cosine distance.
class DegenerateVectorError : public Error {
public:
    using Error::Error;
};

/// Zero variance or all-tied input to a correlation.
class DegenerateMetricError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Malformed line in a text input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace tatt
