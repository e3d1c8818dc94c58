#pragma once

#include <stdexcept>
#include <string>

namespace ftstab {

// Typed failure used across the library. The kind is stable API (the CLI maps
// it onto exit codes); the message is for humans and names the offending
// operation plus the values that broke its contract.
class Error : public std::runtime_error {
public:
  enum class Kind {
    shape,         // dimension mismatch between operands
    size_limit,    // result would exceed a configured size cap
    definiteness,  // an eigenvalue violates a required sign condition
    contract,      // an input breaks a documented invariant (e.g. asymmetry)
    validation,    // user-supplied data rejected (config, parameters)
    io,            // filesystem or parse failure
    internal       // should-not-happen; a library bug if ever observed
  };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

[[noreturn]] inline void throw_shape(const std::string& msg) {
  throw Error(Error::Kind::shape, msg);
}
[[noreturn]] inline void throw_size_limit(const std::string& msg) {
  throw Error(Error::Kind::size_limit, msg);
}
[[noreturn]] inline void throw_definiteness(const std::string& msg) {
  throw Error(Error::Kind::definiteness, msg);
}
[[noreturn]] inline void throw_contract(const std::string& msg) {
  throw Error(Error::Kind::contract, msg);
}
[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(Error::Kind::validation, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(Error::Kind::io, msg);
}
[[noreturn]] inline void throw_internal(const std::string& msg) {
  throw Error(Error::Kind::internal, msg);
}

}  // namespace ftstab
