#ifndef CAUSALEM_ERRORS_HPP
#define CAUSALEM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace causalem {

// All engine errors derive from Error so callers can catch the library
// exactly. Each condition gets its own type; messages carry the offending
// names/ids so failures are actionable from a log line alone.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class CyclicGraph : public Error {
 public:
  using Error::Error;
};

class UnknownVariable : public Error {
 public:
  using Error::Error;
};

class LatentWithParents : public Error {
 public:
  using Error::Error;
};

class CardinalityMismatch : public Error {
 public:
  using Error::Error;
};

class StateOutOfRange : public Error {
 public:
  using Error::Error;
};

class ScopeNotCovered : public Error {
 public:
  using Error::Error;
};

class ZeroProbabilityEvidence : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class UnsupportedSize : public Error {
 public:
  using Error::Error;
};

class DegenerateData : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalem

#endif
