#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsvlm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed corpus input. `line` and `column` are 1-based; 0 means unknown.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus contains no series") {}
};

class StratificationError : public Error {
public:
    explicit StratificationError(std::string label);
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

class LabelMapError : public Error {
public:
    explicit LabelMapError(std::string label);
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& what = "empty input") : Error(what) {}
};

class RenderError : public Error {
public:
    using Error::Error;
};

class PathError : public Error {
public:
    using Error::Error;
};

class EmitError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

} // namespace tsvlm
