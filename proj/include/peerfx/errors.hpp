#pragma once

#include <stdexcept>
#include <string>

namespace peerfx {

// Bad ensemble/parameter specification, detected before any compute.
class InvalidSpec : public std::invalid_argument {
 public:
  explicit InvalidSpec(const std::string& what) : std::invalid_argument(what) {}
};

// A resolvent (I - rho M)^{-1} was requested outside its region of validity.
class SpectralValidityError : public std::domain_error {
 public:
  explicit SpectralValidityError(const std::string& what) : std::domain_error(what) {}
};

// Iterative solver or eigensolver failed to converge.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (config, edge list, CSV).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Operation refused because the input exceeds a documented size cap.
class SizeError : public std::length_error {
 public:
  explicit SizeError(const std::string& what) : std::length_error(what) {}
};

}  // namespace peerfx
