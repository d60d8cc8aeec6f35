#pragma once

#include <stdexcept>
#include <string>

namespace wavefill {

// Base class for all recoverable errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

struct OddDimension : Error {
    explicit OddDimension(const std::string& msg) : Error("odd dimension: " + msg) {}
};

struct IndivisibleDimension : Error {
    explicit IndivisibleDimension(const std::string& msg)
        : Error("indivisible dimension: " + msg) {}
};

struct WrongLevelCount : Error {
    explicit WrongLevelCount(const std::string& msg) : Error("wrong level count: " + msg) {}
};

struct EmptyBBox : Error {
    explicit EmptyBBox(const std::string& msg) : Error("empty bounding box: " + msg) {}
};

struct LayerCountMismatch : Error {
    explicit LayerCountMismatch(const std::string& msg)
        : Error("layer count mismatch: " + msg) {}
};

struct ExtractorDepthMismatch : Error {
    explicit ExtractorDepthMismatch(const std::string& msg)
        : Error("extractor depth mismatch: " + msg) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& msg) : Error("non-finite loss: " + msg) {}
};

struct VersionMismatch : Error {
    explicit VersionMismatch(const std::string& msg) : Error("version mismatch: " + msg) {}
};

struct CorruptPayload : Error {
    explicit CorruptPayload(const std::string& msg) : Error("corrupt payload: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("i/o error: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

}  // namespace wavefill
