#pragma once

#include <stdexcept>
#include <string>

namespace ndtrace {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: the request itself is outside the domain of the library.
class InputError : public Error {
public:
    using Error::Error;
};

// The input was fine but a numerical stage could not deliver.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SpectralPointError : public InputError { public: using InputError::InputError; };
class InvalidPreset : public InputError { public: using InputError::InputError; };
class UnsupportedCoefficients : public InputError { public: using InputError::InputError; };
class ConfigError : public InputError { public: using InputError::InputError; };

class DivergentTail : public NumericalError { public: using NumericalError::NumericalError; };
class ContractionFailure : public NumericalError { public: using NumericalError::NumericalError; };
class SingularSystem : public NumericalError { public: using NumericalError::NumericalError; };
class IntegratorFailure : public NumericalError { public: using NumericalError::NumericalError; };
class NoValidAnchor : public NumericalError { public: using NumericalError::NumericalError; };
class NearSingular : public NumericalError { public: using NumericalError::NumericalError; };
class QuadratureFailure : public NumericalError { public: using NumericalError::NumericalError; };
class ZStepError : public NumericalError { public: using NumericalError::NumericalError; };
class NonIntegerWinding : public NumericalError { public: using NumericalError::NumericalError; };

}  // namespace ndtrace
