#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rfharvest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class InsufficientPoints : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

class ProblemTooLarge : public Error {
public:
    using Error::Error;
};

class DegenerateModel : public Error {
public:
    using Error::Error;
};

/// Raised when a demand cannot be met; carries the best achievable value.
class Infeasible : public Error {
public:
    Infeasible(const std::string& what, double max_achievable)
        : Error(what), max_achievable_(max_achievable) {}
    double max_achievable() const noexcept { return max_achievable_; }

private:
    double max_achievable_;
};

/// Configuration problems. `path` is the dotted location of the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class IngestionError : public Error {
public:
    IngestionError(const std::string& what, std::vector<std::size_t> lines)
        : Error(what), lines_(std::move(lines)) {}
    const std::vector<std::size_t>& lines() const noexcept { return lines_; }

private:
    std::vector<std::size_t> lines_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rfharvest
