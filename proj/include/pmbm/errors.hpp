#pragma once

#include <stdexcept>
#include <string>

namespace pmbm {

/// Invalid model or filter parameters (dimension mismatch, probability outside [0,1], ...).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Linear algebra failure during filtering, e.g. a singular innovation covariance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An exact computation would exceed its supported size (enumeration guards, integer ranges).
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Index or argument outside its admissible range.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

}  // namespace pmbm
