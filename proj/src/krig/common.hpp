#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace krig {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorKind {
  config,
  parse,
  shape,
  io,
  degenerate_scale,
  numerical,
  unsupported_phase,
  degenerate_batch,
  training_abort,
  contract,
  undefined_ratio,
  checkpoint_not_found,
};

/// Stable machine-readable name, e.g. "checkpoint-not-found".
const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using Coords = std::vector<Point>;

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

enum class Phase { train, validate, test };
const char* phase_name(Phase phase);
Phase parse_phase(const std::string& text);

/// Seeded random stream. Wraps mt19937_64 but draws uniforms, normals and
/// bounded integers with its own transforms so sequences do not depend on
/// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct elements of `pool`, in draw order.
  std::vector<int> sample_without_replacement(std::vector<int> pool, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a 64-bit hash rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace krig

namespace krig {

/// Cholesky of K + jitter*I, escalating jitter by 10x from `jitter_start`
/// (0 allowed, tried first) up to `jitter_max`. Throws ErrorKind::numerical
/// with a condition estimate when every attempt fails.
Eigen::LLT<Matrix> factor_spd(const Matrix& K, double jitter_start, double jitter_max,
                              double* jitter_used = nullptr);

}  // namespace krig
