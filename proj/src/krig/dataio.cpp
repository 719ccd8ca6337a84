#include "krig/dataio.hpp"

#include "krig/binio.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <algorithm>
#include <numeric>
#include <sstream>

namespace krig {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw Error(ErrorKind::parse, path + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& cell, const std::string& path, int line) {
  char* end = nullptr;
  double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    parse_fail(path, line, "not a number: '" + cell + "'");
  return v;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NaN" || cell == "nan" || cell == "NAN";
}

std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  return (p.parent_path() / p.stem()).string();
}

struct CoordRows {
  Coords coords;
  std::optional<std::vector<double>> capacity;
};

CoordRows load_coords(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open coordinate sidecar " + path);
  std::string line;
  int lineno = 0;
  std::vector<std::array<double, 4>> rows;  // id, x, y, capacity
  bool has_capacity = false;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() < 3 || cells[0] != "node_id" || cells[1] != "x" || cells[2] != "y")
        parse_fail(path, lineno, "expected header node_id,x,y[,capacity]");
      has_capacity = cells.size() >= 4 && cells[3] == "capacity";
      continue;
    }
    std::size_t want = has_capacity ? 4 : 3;
    if (cells.size() != want)
      parse_fail(path, lineno, "expected " + std::to_string(want) + " columns");
    std::array<double, 4> r{};
    for (std::size_t i = 0; i < want; ++i) r[i] = parse_number(cells[i], path, lineno);
    rows.push_back(r);
  }
  CoordRows out;
  out.coords.resize(rows.size());
  std::vector<bool> seen(rows.size(), false);
  if (has_capacity) out.capacity.emplace(rows.size());
  for (const auto& r : rows) {
    double id = r[0];
    if (id < 0 || id >= static_cast<double>(rows.size()) || id != std::floor(id) ||
        seen[static_cast<std::size_t>(id)])
      throw Error(ErrorKind::parse, path + ": node ids must be a permutation of 0..N-1");
    auto i = static_cast<std::size_t>(id);
    seen[i] = true;
    out.coords[i] = {r[1], r[2]};
    if (has_capacity) (*out.capacity)[i] = r[3];
  }
  return out;
}

void save_coords(const SensorField& field, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  out << (field.meta.capacity ? "node_id,x,y,capacity\n" : "node_id,x,y\n");
  char buf[96];
  for (int v = 0; v < field.n_nodes(); ++v) {
    const Point& p = field.coords[static_cast<std::size_t>(v)];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g", v, p.x, p.y);
    out << buf;
    if (field.meta.capacity) {
      std::snprintf(buf, sizeof buf, ",%.17g", (*field.meta.capacity)[static_cast<std::size_t>(v)]);
      out << buf;
    }
    out << '\n';
  }
}

void load_meta(const std::string& path, FieldMeta& meta) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
  meta.name = j.value("name", meta.name);
  meta.start_time = j.value("start_time", meta.start_time);
  meta.interval_minutes = j.value("interval_minutes", meta.interval_minutes);
}

void save_meta(const FieldMeta& meta, const std::string& path) {
  nlohmann::json j;
  j["name"] = meta.name;
  j["start_time"] = meta.start_time;
  j["interval_minutes"] = meta.interval_minutes;
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

SensorField load_csv_values(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path);
  std::string line;
  int lineno = 0;
  int n = -1;
  std::vector<std::vector<double>> columns;  // per timestep
  std::vector<std::vector<bool>> observed;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (n < 0) {
      n = static_cast<int>(cells.size());
      for (int i = 0; i < n; ++i)
        if (cells[static_cast<std::size_t>(i)] != "node_" + std::to_string(i))
          parse_fail(path, lineno, "header must be node_0..node_{N-1}");
      continue;
    }
    if (static_cast<int>(cells.size()) != n)
      parse_fail(path, lineno,
                 "expected " + std::to_string(n) + " cells, got " + std::to_string(cells.size()));
    std::vector<double> col(static_cast<std::size_t>(n));
    std::vector<bool> obs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& c = cells[static_cast<std::size_t>(i)];
      if (is_missing(c)) {
        col[static_cast<std::size_t>(i)] = std::numeric_limits<double>::quiet_NaN();
        obs[static_cast<std::size_t>(i)] = false;
      } else {
        col[static_cast<std::size_t>(i)] = parse_number(c, path, lineno);
        obs[static_cast<std::size_t>(i)] = true;
      }
    }
    columns.push_back(std::move(col));
    observed.push_back(std::move(obs));
  }
  require(n > 0, ErrorKind::parse, path + ": missing header");
  SensorField f;
  const auto T = static_cast<Eigen::Index>(columns.size());
  f.values.resize(n, T);
  f.mask.resize(n, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      f.values(i, t) = columns[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      f.mask(i, t) = observed[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
    }
  return f;
}

constexpr char kFieldMagic[4] = {'K', 'R', 'G', 'F'};
constexpr std::uint32_t kFieldVersion = 1;

SensorField load_binary_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  require(in && std::equal(magic, magic + 4, kFieldMagic), ErrorKind::parse,
          path + ": bad magic (expected KRGF)");
  auto version = binio::read_le<std::uint32_t>(in);
  require(version == kFieldVersion, ErrorKind::parse,
          path + ": unsupported version " + std::to_string(version));
  auto n = binio::read_le<std::uint32_t>(in);
  auto t = binio::read_le<std::uint32_t>(in);
  SensorField f;
  f.values.resize(n, t);
  f.mask.resize(n, t);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t s = 0; s < t; ++s) f.values(i, s) = binio::read_le<double>(in);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t s = 0; s < t; ++s) f.mask(i, s) = binio::read_le<std::uint8_t>(in) != 0;
  return f;
}

}  // namespace

FieldFormat parse_field_format(const std::string& text) {
  if (text == "csv-wide") return FieldFormat::csv_wide;
  if (text == "packed-binary") return FieldFormat::packed_binary;
  throw Error(ErrorKind::config, "unknown field format '" + text + "'");
}

const char* field_format_name(FieldFormat format) {
  return format == FieldFormat::csv_wide ? "csv-wide" : "packed-binary";
}

std::string coords_sidecar_path(const std::string& path) { return stem_of(path) + ".coords.csv"; }
std::string meta_sidecar_path(const std::string& path) { return stem_of(path) + ".meta.json"; }

SensorField load_field(const std::string& path, FieldFormat format) {
  require(std::filesystem::exists(path), ErrorKind::io, "dataset not found: " + path);
  SensorField f = format == FieldFormat::csv_wide ? load_csv_values(path) : load_binary_values(path);
  CoordRows c = load_coords(coords_sidecar_path(path));
  require(static_cast<int>(c.coords.size()) == f.n_nodes(), ErrorKind::shape,
          "coordinate sidecar has " + std::to_string(c.coords.size()) + " rows but values have " +
              std::to_string(f.n_nodes()) + " nodes");
  f.coords = std::move(c.coords);
  f.meta.capacity = std::move(c.capacity);
  f.meta.name = std::filesystem::path(path).stem().string();
  load_meta(meta_sidecar_path(path), f.meta);
  f.validate();
  return f;
}

void save_field(const SensorField& field, const std::string& path, FieldFormat format) {
  field.validate();
  if (format == FieldFormat::csv_wide) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
    for (int i = 0; i < field.n_nodes(); ++i) out << (i ? "," : "") << "node_" << i;
    out << '\n';
    char buf[32];
    for (int t = 0; t < field.n_steps(); ++t) {
      for (int i = 0; i < field.n_nodes(); ++i) {
        if (i) out << ',';
        if (field.mask(i, t)) {
          std::snprintf(buf, sizeof buf, "%.17g", field.values(i, t));
          out << buf;
        } else {
          out << "NaN";
        }
      }
      out << '\n';
    }
  } else {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
    out.write(kFieldMagic, 4);
    binio::write_le<std::uint32_t>(out, kFieldVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.n_nodes()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.n_steps()));
    for (int i = 0; i < field.n_nodes(); ++i)
      for (int t = 0; t < field.n_steps(); ++t) binio::write_le<double>(out, field.values(i, t));
    for (int i = 0; i < field.n_nodes(); ++i)
      for (int t = 0; t < field.n_steps(); ++t)
        binio::write_le<std::uint8_t>(out, field.mask(i, t) ? 1 : 0);
  }
  save_coords(field, coords_sidecar_path(path));
  save_meta(field.meta, meta_sidecar_path(path));
}

NormalizerKind parse_normalizer_kind(const std::string& text) {
  if (text == "per-node-min-max-by-capacity" || text == "per-node-capacity")
    return NormalizerKind::per_node_capacity;
  if (text == "global-z-score") return NormalizerKind::global_z_score;
  throw Error(ErrorKind::config, "unknown normalizer '" + text + "'");
}

const char* normalizer_kind_name(NormalizerKind kind) {
  return kind == NormalizerKind::per_node_capacity ? "per-node-min-max-by-capacity"
                                                   : "global-z-score";
}

Matrix Normalizer::forward(const Matrix& values) const {
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index v = 0; v < values.rows(); ++v)
    out.row(v) = (values.row(v).array() - offset[v]) / scale[v];
  return out;
}

Matrix Normalizer::inverse(const Matrix& values) const {
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index v = 0; v < values.rows(); ++v)
    out.row(v) = values.row(v).array() * scale[v] + offset[v];
  return out;
}

Normalizer fit_normalizer(const FieldReader& reader, const CellBlock& fit_cells,
                          NormalizerKind kind) {
  const auto n = static_cast<std::size_t>(reader.n_nodes());
  Normalizer norm;
  norm.kind = kind;
  if (kind == NormalizerKind::per_node_capacity) {
    const auto& cap = reader.meta().capacity;
    require(cap.has_value(), ErrorKind::config,
            "per-node capacity normalization needs capacity metadata for every node");
    norm.offset.assign(n, 0.0);
    norm.scale.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      require((*cap)[v] > 0.0, ErrorKind::degenerate_scale,
              "node " + std::to_string(v) + " has non-positive capacity");
      norm.scale[v] = (*cap)[v];
    }
    return norm;
  }

  // Two-pass mean / population variance over observed fitting cells.
  double sum = 0.0;
  std::size_t count = 0;
  const int longest = fit_cells.periods.empty()
                          ? 0
                          : std::max_element(fit_cells.periods.begin(), fit_cells.periods.end(),
                                             [](const StepRange& a, const StepRange& b) {
                                               return a.length() < b.length();
                                             })->length();
  std::vector<double> buf(static_cast<std::size_t>(longest));
  std::unique_ptr<bool[]> obs(new bool[static_cast<std::size_t>(longest) + 1]);
  auto each_cell = [&](auto&& fn) {
    for (int v : fit_cells.nodes)
      for (const StepRange& r : fit_cells.periods) {
        reader.read(v, r, buf.data(), obs.get());
        for (int i = 0; i < r.length(); ++i)
          if (obs[static_cast<std::size_t>(i)]) fn(buf[static_cast<std::size_t>(i)]);
      }
  };
  each_cell([&](double x) {
    sum += x;
    ++count;
  });
  require(count > 0, ErrorKind::degenerate_scale, "no observed cells to fit the normalizer on");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  each_cell([&](double x) { ss += (x - mean) * (x - mean); });
  const double stddev = std::sqrt(ss / static_cast<double>(count));
  require(stddev > 1e-12 * std::max(1.0, std::abs(mean)), ErrorKind::degenerate_scale,
          "zero variance over the normalizer fitting cells");
  norm.offset.assign(n, mean);
  norm.scale.assign(n, stddev);
  return norm;
}

NodeAssignment make_missing_pattern(int n_nodes, std::array<double, 3> ratios,
                                    std::uint64_t seed) {
  require(n_nodes >= 3, ErrorKind::config, "need at least 3 nodes");
  for (double r : ratios) require(r > 0.0, ErrorKind::config, "split ratios must be positive");
  require(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) <= 1e-9, ErrorKind::config,
          "split ratios must sum to 1");
  NodeAssignment out;
  out.order.resize(static_cast<std::size_t>(n_nodes));
  std::iota(out.order.begin(), out.order.end(), 0);
  Rng rng(seed);
  rng.shuffle(out.order);
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
  const int n_train = static_cast<int>(std::floor(ratios[0] * n_nodes + 1e-9));
  const int n_val = static_cast<int>(std::floor(ratios[1] * n_nodes + 1e-9));
  out.sizes = {n_train, n_val, n_nodes - n_train - n_val};
  out.roles.assign(static_cast<std::size_t>(n_nodes), Role::test);
  for (int i = 0; i < n_nodes; ++i) {
    Role r = i < n_train ? Role::train : (i < n_train + n_val ? Role::val : Role::test);
    out.roles[static_cast<std::size_t>(out.order[static_cast<std::size_t>(i)])] = r;
  }
  return out;
}

Matrix se_kernel_matrix(const Coords& a, const Coords& b, double length_scale) {
  Matrix K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const double inv = 1.0 / (length_scale * length_scale);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double dx = a[i].x - b[j].x, dy = a[i].y - b[j].y;
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::exp(-(dx * dx + dy * dy) * inv);
    }
  return K;
}

SensorField synth_gp_field(const SynthParams& p) {
  require(p.n_nodes >= 4, ErrorKind::config, "synthetic field needs at least 4 nodes");
  require(p.n_steps >= 1, ErrorKind::config, "synthetic field needs at least 1 step");
  require(p.length_scale > 0.0, ErrorKind::config, "length_scale must be positive");
  require(p.temporal_rho > -1.0 && p.temporal_rho < 1.0, ErrorKind::config,
          "temporal_rho must lie in (-1, 1)");
  require(p.noise_std >= 0.0, ErrorKind::config, "noise_std must be non-negative");

  Rng rng(p.seed);
  SensorField f;
  f.coords.resize(static_cast<std::size_t>(p.n_nodes));
  for (auto& c : f.coords) {
    c.x = rng.uniform();
    c.y = rng.uniform();
  }
  const Matrix K = se_kernel_matrix(f.coords, f.coords, p.length_scale);
  const Eigen::LLT<Matrix> llt = factor_spd(K, 1e-10, 1e-6);
  const Matrix L = llt.matrixL();

  f.values.resize(p.n_nodes, p.n_steps);
  f.mask.setConstant(p.n_nodes, p.n_steps, true);
  const double innov = std::sqrt(1.0 - p.temporal_rho * p.temporal_rho);
  Vector z(p.n_nodes), state(p.n_nodes);
  for (int t = 0; t < p.n_steps; ++t) {
    for (int i = 0; i < p.n_nodes; ++i) z(i) = rng.normal();
    Vector draw = L * z;
    state = t == 0 ? draw : Vector(p.temporal_rho * state + innov * draw);
    for (int i = 0; i < p.n_nodes; ++i) f.values(i, t) = state(i) + p.noise_std * rng.normal();
  }
  f.meta.name = "synthetic-gp";
  f.meta.start_time = "2016-01-01T00:00";
  f.meta.interval_minutes = 60;
  return f;
}

}  // namespace krig
