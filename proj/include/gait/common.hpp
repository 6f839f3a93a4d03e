#pragma once

#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gait {

// Error categories map onto CLI exit codes: usage -> 1, data -> 2, numeric -> 3.
// Contract violations (bad shapes, bad parameters) throw std::invalid_argument
// and are treated as usage errors at the CLI boundary.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_data(bool ok, const std::string& msg) {
  if (!ok) throw DataError(msg);
}

inline void check_numeric(bool ok, const std::string& msg) {
  if (!ok) throw NumericError(msg);
}

// Training allocates multi-megabyte activation buffers every step; with glibc
// defaults those exceed the mmap threshold, so each step pays mmap/munmap and
// page-zeroing costs in the kernel. Raising the thresholds keeps the buffers
// in the heap where they are reused across steps. No-op on other libcs.
inline void tune_allocator_for_large_buffers() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace gait
