#pragma once

#include <stdexcept>
#include <string>

namespace grouprec {

/// Base of every exception raised by the library. `kind()` is a stable,
/// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DataIntegrityError : Error {
    explicit DataIntegrityError(const std::string& what) : Error("data_integrity", what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct CapacityError : Error {
    explicit CapacityError(const std::string& what) : Error("capacity", what) {}
};

struct IngestionError : Error {
    explicit IngestionError(const std::string& what) : Error("ingestion", what) {}
};

struct StrategyError : Error {
    explicit StrategyError(const std::string& what) : Error("strategy", what) {}
};

struct SplitError : Error {
    explicit SplitError(const std::string& what) : Error("split", what) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

struct InternalError : Error {
    explicit InternalError(const std::string& what) : Error("internal", what) {}
};

}  // namespace grouprec
