#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace factdnf {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GroundingError : public Error { using Error::Error; };
class ValueError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };

class CacheError : public Error {
public:
    CacheError(const std::string& what, std::size_t line)
        : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BackendError : public Error {
public:
    // `unreachable` marks failures to reach any backend at all, as opposed to a
    // backend that answered badly.
    BackendError(const std::string& what, std::string question_id, bool unreachable = false)
        : Error(what), question_id_(std::move(question_id)), unreachable_(unreachable) {}
    const std::string& question_id() const noexcept { return question_id_; }
    bool unreachable() const noexcept { return unreachable_; }

private:
    std::string question_id_;
    bool unreachable_;
};

}  // namespace factdnf
