#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace okh {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed fact, snapshot or configuration document. `path` is a
// JSON-pointer-like location ("line 3: /entities/1/confidence").
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ConflictingHorizon : public Error {
public:
    using Error::Error;
};

class CycleDetected : public Error {
public:
    explicit CycleDetected(std::vector<std::string> cycle)
        : Error(describe(cycle)), cycle_(std::move(cycle)) {}
    const std::vector<std::string>& cycle() const noexcept { return cycle_; }

private:
    static std::string describe(const std::vector<std::string>& cycle) {
        std::string out = "precedence cycle:";
        for (const auto& id : cycle) out += " " + id;
        return out;
    }
    std::vector<std::string> cycle_;
};

class ZeroNorm : public Error {
public:
    ZeroNorm() : Error("vector has zero norm") {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t actual)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(actual)) {}
};

class ProviderError : public Error {
public:
    ProviderError(int status, std::string body_excerpt)
        : Error("provider error (status " + std::to_string(status) + "): " + body_excerpt),
          status_(status), body_(std::move(body_excerpt)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class EmptyBatch : public Error {
public:
    EmptyBatch() : Error("contrastive batch is empty") {}
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus has no hyperedges") {}
};

class UnknownEdge : public Error {
public:
    explicit UnknownEdge(const std::string& id) : Error("unknown hyperedge: " + id) {}
};

class UnparseableNumeric : public Error {
public:
    explicit UnparseableNumeric(const std::string& value)
        : Error("not a numeric answer: '" + value + "'") {}
};

class ElementMismatch : public Error {
public:
    ElementMismatch() : Error("orders do not contain the same elements") {}
    explicit ElementMismatch(const std::string& detail)
        : Error("orders do not contain the same elements: " + detail) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace okh
