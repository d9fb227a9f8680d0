#pragma once

#include <stdexcept>
#include <string>

namespace linkq {

// Every failure raised by the library derives from Error. The category maps
// onto the CLI exit codes: config 1, data 2, numerical 3.
class Error : public std::runtime_error {
public:
    enum class Category { config = 1, data = 2, numerical = 3 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    Category category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

// Malformed trace file; line is 1-based.
class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

// Model file failures, kept distinct so callers can tell them apart.
class ModelVersionError : public DataError {
public:
    using DataError::DataError;
};

class ModelFormatError : public DataError {
public:
    using DataError::DataError;
};

class ModelShapeError : public DataError {
public:
    using DataError::DataError;
};

} // namespace linkq
