#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpad {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (detections, manifests, score files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A value outside its legal domain supplied as configuration (threshold, policy, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Referenced input files that do not exist. Carries the full list.
class MissingFilesError : public Error {
public:
    explicit MissingFilesError(std::vector<std::string> paths)
        : Error(describe(paths)), paths_(std::move(paths)) {}

    const std::vector<std::string>& paths() const noexcept { return paths_; }

private:
    static std::string describe(const std::vector<std::string>& paths) {
        std::string msg = "missing detections files (" + std::to_string(paths.size()) + "):";
        for (const auto& p : paths) msg += " " + p;
        return msg;
    }

    std::vector<std::string> paths_;
};

/// Filesystem write/read failures not covered above.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tpad
