#pragma once

#include <stdexcept>
#include <string>

namespace memstab {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An improper integral that does not converge for the requested weight.
class DivergentIntegral : public Error {
public:
  using Error::Error;
};

// The stability constraint cannot be satisfied (coercivity does not dominate
// the memory terms).
class Infeasible : public Error {
public:
  using Error::Error;
};

// A function required to be bounded for the pathwise certificate is not.
class Unbounded : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace memstab
