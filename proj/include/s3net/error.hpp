// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The s3net Authors
#pragma once

#include <stdexcept>
#include <string>

namespace s3net {

enum class Errc {
    shape,      // size or factorization mismatch
    index,      // element index out of bounds
    capacity,   // refusing to allocate above a cap
    domain,     // non-finite or out-of-domain scalar
    input,      // empty sequence, bad argument
    format,     // malformed bytes on disk
    version,    // unsupported format version
    checksum,   // payload checksum mismatch
    data,       // file parses but violates a data invariant
    config,     // invalid run configuration
    numeric,    // training diverged
    io,         // filesystem failure
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace s3net
