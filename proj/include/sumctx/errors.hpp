#ifndef SUMCTX_ERRORS_HPP
#define SUMCTX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sumctx {

// Base class for all domain errors. The CLI maps these to exit code 1;
// usage errors (bad flags, missing files) exit 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Precondition violation on an operation argument.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// External tokenizer process failed or produced invalid output.
class TokenizerError : public Error {
public:
    using Error::Error;
};

// A summarizer or generator backend failed (after retries, for remote kinds).
class BackendError : public Error {
public:
    using Error::Error;
};

// The assembled input cannot fit the token budget even after dropping
// every droppable segment.
class BudgetError : public Error {
public:
    using Error::Error;
};

// Summary cache persistence failed. Distinct from BackendError so callers
// can tell storage problems from backend problems.
class CacheIoError : public Error {
public:
    using Error::Error;
};

} // namespace sumctx

#endif // SUMCTX_ERRORS_HPP
