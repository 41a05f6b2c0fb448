#pragma once

#include <stdexcept>
#include <string>

namespace pen {

/// Base of every error thrown by the library. `kind()` is a short stable tag
/// that the CLI prints and tests match on.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PEN_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

PEN_DEFINE_ERROR(InputError, "input")
PEN_DEFINE_ERROR(ParseError, "parse")
PEN_DEFINE_ERROR(SchemaError, "schema")
PEN_DEFINE_ERROR(ReferenceError, "reference")
PEN_DEFINE_ERROR(UnsupportedPrimitiveError, "unsupported-primitive")
PEN_DEFINE_ERROR(GeometryError, "geometry")
PEN_DEFINE_ERROR(AlignmentError, "alignment-failed")
PEN_DEFINE_ERROR(SamplingError, "sampling")
PEN_DEFINE_ERROR(OptimizerError, "optimizer")
PEN_DEFINE_ERROR(TrainingError, "training")
PEN_DEFINE_ERROR(ConfigError, "config")
PEN_DEFINE_ERROR(IoError, "io")

#undef PEN_DEFINE_ERROR

}  // namespace pen
