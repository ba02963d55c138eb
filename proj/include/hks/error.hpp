#pragma once

#include <stdexcept>
#include <string>

namespace hks {

/// Process exit code associated with an error category.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, resource = 3 };

class Error : public std::runtime_error {
   public:
    Error(ExitCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

   private:
    ExitCode code_;
};

struct UsageError : Error {
    explicit UsageError(const std::string &what) : Error(ExitCode::usage, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string &what) : Error(ExitCode::data, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string &what) : Error(ExitCode::data, what) {}
};

struct ResourceError : Error {
    explicit ResourceError(const std::string &what) : Error(ExitCode::resource, what) {}
};

struct EmptyPoolError : DataError {
    explicit EmptyPoolError(const std::string &what) : DataError(what) {}
};

/// Raised for documents with zero tokens; such documents cannot be scored.
struct DegenerateDocumentError : DataError {
    explicit DegenerateDocumentError(const std::string &what) : DataError(what) {}
};

struct StratumExhaustedError : DataError {
    StratumExhaustedError(std::string stratum, const std::string &what)
        : DataError(what), stratum_(std::move(stratum)) {}
    const std::string &stratum() const noexcept { return stratum_; }

   private:
    std::string stratum_;
};

/// Precondition violated by the caller (negative score input, bad tau, ...).
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace hks
