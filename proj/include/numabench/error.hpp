#pragma once

#include <stdexcept>
#include <string>

namespace numabench {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad spec, empty matrix dimension, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

class DiscoveryError : public Error {
public:
    using Error::Error;
};

/// The OS refused to pin a thread to `cpu()`.
class AffinityError : public Error {
public:
    AffinityError(int cpu, const std::string& what) : Error(what), cpu_(cpu) {}
    int cpu() const noexcept { return cpu_; }

private:
    int cpu_;
};

/// A run cell failed (child crashed, loader rejected a preload object, ...).
class RunError : public Error {
public:
    using Error::Error;
};

}  // namespace numabench
