#pragma once

#include <stdexcept>
#include <string>

namespace smartgen {

// Base of every error the library raises. Callers that only care about
// success/failure catch this; the CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class EmptyOutputError : public Error { using Error::Error; };
class InsufficientDataError : public Error { using Error::Error; };
class DegenerateCorpusError : public Error { using Error::Error; };
class MetricsError : public Error { using Error::Error; };

class TransportError : public Error { using Error::Error; };

class EndpointError : public Error {
public:
    EndpointError(int status, const std::string& what)
        : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

} // namespace smartgen
