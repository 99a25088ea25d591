#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace choicenet {

inline constexpr const char* kVersion = "0.1.0";

/// Schema, parse, and argument problems. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failures: non-finite values, domain violations. CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// FNV-1a over a byte string; used for provenance hashes of config documents.
std::uint64_t fnv1a(const std::string& bytes);

/// Shortest round-trip decimal form of a double (locale-free).
std::string format_double(double v);

/// Seed material carried into every output file header.
struct Provenance {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

} // namespace choicenet
