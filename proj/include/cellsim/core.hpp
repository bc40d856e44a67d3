#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace cellsim {

using UeIndex = std::size_t;
using BsIndex = std::size_t;

/// Marker for a UE that is not served by any base station.
inline constexpr BsIndex kUnassociated = std::numeric_limits<BsIndex>::max();

enum class Tier : std::uint8_t { macro, small };

inline const char* to_string(Tier t) { return t == Tier::macro ? "macro" : "small"; }

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidPairing : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

} // namespace cellsim
