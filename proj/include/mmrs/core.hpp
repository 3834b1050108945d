/*
 * Copyright 2026 The mmrs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mmrs {

inline constexpr std::string_view kVersion = "1.0.0";

// Dense real matrices are row-major so that a row is one item/user vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Coarse failure class; the CLI maps it onto its exit code.
enum class ErrorKind {
  Input,    // unreadable or malformed files, missing paths
  Config,   // invalid parameters or configuration
  Runtime,  // numerical failure during training or evaluation
};

/// Library-wide exception. `what()` is prefixed with the owning module.
class Error : public std::runtime_error {
 public:
  Error(std::string_view module, ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(module) + ": " + message),
        module_(module),
        kind_(kind) {}

  const std::string& module() const noexcept { return module_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string module_;
  ErrorKind kind_;
};

[[noreturn]] inline void input_error(std::string_view module, const std::string& message) {
  throw Error(module, ErrorKind::Input, message);
}

[[noreturn]] inline void config_error(std::string_view module, const std::string& message) {
  throw Error(module, ErrorKind::Config, message);
}

[[noreturn]] inline void runtime_error(std::string_view module, const std::string& message) {
  throw Error(module, ErrorKind::Runtime, message);
}

/// Worker count for the parallel sections (graph construction, evaluation).
/// Read from MMRS_THREADS; 1 when unset or invalid. Results never depend on it.
inline unsigned thread_count() {
  if (const char* env = std::getenv("MMRS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return 1;
}

/// Runs fn(block) for block in [0, n_blocks). Blocks are claimed in a fixed
/// stride per worker, so each block is handled by exactly one thread and
/// callers that write only to block-owned slots get identical output for any
/// thread count.
inline void parallel_for(std::size_t n_blocks, const std::function<void(std::size_t)>& fn,
                         unsigned threads = thread_count()) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < n_blocks; b += workers) fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// 64-bit FNV-1a; used for config hashes and checkpoint checksums.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mmrs
