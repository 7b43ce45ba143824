#pragma once

#include <stdexcept>
#include <string>

namespace novsemi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridMismatchError : public Error { using Error::Error; };
class InconsistentDataError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class LabelDomainError : public Error { using Error::Error; };
class StateInvalidError : public Error { using Error::Error; };
class StepRejectedError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace novsemi
