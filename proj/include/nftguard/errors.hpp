#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nftguard {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CompilerNotFound : Error {
    using Error::Error;
};

struct CompilationFailed : Error {
    std::vector<std::string> diagnostics;
    CompilationFailed(const std::string& what, std::vector<std::string> diags)
        : Error(what), diagnostics(std::move(diags)) {}
};

struct VersionMismatch : Error {
    using Error::Error;
};

struct MalformedSourceMap : Error {
    using Error::Error;
};

struct UnsupportedType : Error {
    using Error::Error;
};

struct SolverFailure : Error {
    using Error::Error;
};

}  // namespace nftguard
