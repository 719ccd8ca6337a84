#include "krig/common.hpp"

#include <cmath>
#include <cstdio>

namespace krig {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::parse: return "parse";
    case ErrorKind::shape: return "shape";
    case ErrorKind::io: return "io";
    case ErrorKind::degenerate_scale: return "degenerate-scale";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::unsupported_phase: return "unsupported-phase";
    case ErrorKind::degenerate_batch: return "degenerate-batch";
    case ErrorKind::training_abort: return "training-abort";
    case ErrorKind::contract: return "contract-violation";
    case ErrorKind::undefined_ratio: return "undefined-ratio";
    case ErrorKind::checkpoint_not_found: return "checkpoint-not-found";
  }
  return "unknown";
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::train: return "train";
    case Phase::validate: return "validate";
    case Phase::test: return "test";
  }
  return "unknown";
}

Phase parse_phase(const std::string& text) {
  if (text == "train") return Phase::train;
  if (text == "validate" || text == "val") return Phase::validate;
  if (text == "test") return Phase::test;
  throw Error(ErrorKind::config, "unknown phase '" + text + "'");
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire-style rejection on the top of the range keeps the draw unbiased.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::vector<int> Rng::sample_without_replacement(std::vector<int> pool, std::size_t k) {
  require(k <= pool.size(), ErrorKind::config, "sample size exceeds pool");
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace krig

namespace krig {

Eigen::LLT<Matrix> factor_spd(const Matrix& K, double jitter_start, double jitter_max,
                              double* jitter_used) {
  const Eigen::Index n = K.rows();
  std::vector<double> ladder;
  if (jitter_start <= 0.0) {
    ladder.push_back(0.0);
    jitter_start = 1e-10;
  }
  for (double j = jitter_start; j <= jitter_max * (1.0 + 1e-9); j *= 10.0) ladder.push_back(j);
  for (double j : ladder) {
    Matrix shifted = K;
    shifted.diagonal().array() += j;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      // LLT can "succeed" on matrices that are numerically indefinite;
      // reject factors with non-positive pivots.
      Vector d = llt.matrixLLT().diagonal();
      if ((d.array() > 0.0).all() && d.allFinite()) {
        if (jitter_used) *jitter_used = j;
        return llt;
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
  double lo = n > 0 ? es.eigenvalues()(0) : 0.0;
  double hi = n > 0 ? es.eigenvalues()(n - 1) : 0.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "kernel matrix not positive definite after jitter %.1e (eigenvalues in [%.3e, %.3e], "
                "condition estimate %.3e)",
                jitter_max, lo, hi, lo > 0 ? hi / lo : INFINITY);
  throw Error(ErrorKind::numerical, buf);
}

}  // namespace krig
