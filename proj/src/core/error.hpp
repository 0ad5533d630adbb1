#pragma once

#include <stdexcept>
#include <string>

namespace bnnkit {

// Error taxonomy shared by the library, the C API and the CLI. Each kind maps
// to one bnnkit_status code on the C side.
enum class ErrorKind {
    Dimension,    // shape mismatch between tensors
    Parameter,    // invalid scalar argument (negative std, S < 1, ...)
    Data,         // bad payload (label out of range, empty dataset, ...)
    Usage,        // API called out of order (missing cache, missing labels)
    Format,       // unrecognized file structure / magic
    Integrity,    // corrupt or truncated file
    Version,      // unsupported format version
    NotFound,     // missing file
    Parse,        // malformed text line
    Consistency,  // cross-file disagreement (manifest vs checkpoint)
    Config,       // invalid run configuration
    Protocol,     // collective protocol violation (length mismatch)
    Transport,    // channel/socket failure
    Stall,        // collective never completed on all ranks
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

const char* error_kind_name(ErrorKind kind);

} // namespace bnnkit
