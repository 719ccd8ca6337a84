#pragma once

#include "krig/common.hpp"
#include "krig/field.hpp"

#include <filesystem>
#include <string>

namespace testutil {

inline krig::Coords random_coords(int n, krig::Rng& rng) {
  krig::Coords c(static_cast<std::size_t>(n));
  for (auto& p : c) p = {rng.uniform(), rng.uniform()};
  return c;
}

inline krig::Matrix random_matrix(int rows, int cols, krig::Rng& rng) {
  krig::Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

/// Fully observed field with random coordinates and values.
inline krig::SensorField random_field(int n, int t, std::uint64_t seed) {
  krig::Rng rng(seed);
  krig::SensorField f;
  f.coords = random_coords(n, rng);
  f.values = random_matrix(n, t, rng);
  f.mask = krig::BoolMatrix::Constant(n, t, true);
  f.meta.start_time = "2020-01-01T00:00";
  f.meta.interval_minutes = 60;
  return f;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("krigbench_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
