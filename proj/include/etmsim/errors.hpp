#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace etmsim {

/// Aggregated input validation failure. Each issue names the offending field.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::invalid_argument(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "validation failed";
        for (const auto& s : issues) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

/// Settings that are individually valid but unusable together (e.g. a quadrature
/// window that truncates the coupling function).
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline void throw_if_issues(std::vector<std::string> issues) {
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

} // namespace etmsim
