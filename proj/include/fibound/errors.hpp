#pragma once

#include <stdexcept>
#include <string>

namespace fibound {

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A token or config value could not be interpreted.
class parse_error : public error {
public:
    using error::error;
};

// A constructed object violates one of its invariants.
class validation_error : public error {
public:
    using error::error;
};

// A parameter lies outside the admissible domain of a model or formula.
class domain_error : public error {
public:
    using error::error;
};

// A sample or transformed sample is non-finite.
class invalid_sample_error : public error {
public:
    using error::error;
};

class insufficient_data_error : public error {
public:
    using error::error;
};

// Covariance has no usable spectrum (all eigenvalues at or below zero).
class degenerate_covariance_error : public error {
public:
    using error::error;
};

// Weight vector puts the bound into a 0/0 form.
class degenerate_weights_error : public error {
public:
    using error::error;
};

// A Fisher information value of zero or below, i.e. unbounded variance.
class degenerate_information_error : public error {
public:
    using error::error;
};

// The requested quantity is not available for this model.
class unsupported_error : public error {
public:
    using error::error;
};

class quadrature_failure_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

} // namespace fibound
