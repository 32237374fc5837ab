#include "mlop/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mlop/error.hpp"
#include "mlop/rng.hpp"

namespace mlop {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void Grid2D::validate() const {
  if (nx < 1 || ny < 1) throw ConfigError("grid: nx and ny must be >= 1");
  if (!(dx > 0.0) || !(dy > 0.0) || !std::isfinite(dx) || !std::isfinite(dy))
    throw ConfigError("grid: dx and dy must be positive");
}

void SnapshotMatrix::validate(bool nonnegative) const {
  grid.validate();
  if (data.rows() != grid.size())
    throw ConfigError("snapshot matrix: row count " + std::to_string(data.rows()) +
                      " does not match grid size " + std::to_string(grid.size()));
  if (data.cols() < 1) throw ConfigError("snapshot matrix: no snapshots");
  if (static_cast<Eigen::Index>(labels.size()) != data.cols())
    throw ConfigError("snapshot matrix: label count does not match column count");
  if (!data.allFinite()) throw ConfigError("snapshot matrix: non-finite entry");
  if (nonnegative && data.minCoeff() < 0.0)
    throw ConfigError("snapshot matrix: negative entry in a non-negative field");
}

const std::vector<Eigen::Index>& DatasetSplit::part(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val" || name == "validation") return validation;
  if (name == "test") return test;
  throw ConfigError("unknown dataset part '" + name + "' (expected train|val|test)");
}

std::vector<std::uint8_t> encode_matrix(const Matrix& m) {
  if (!m.allFinite()) throw IoError("write_matrix: non-finite entries are not allowed");
  std::vector<std::uint8_t> out;
  out.reserve(kMatrixHeaderBytes + 8 * static_cast<std::size_t>(m.size()));
  out.insert(out.end(), std::begin(kMatrixMagic), std::end(kMatrixMagic));
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
  return out;
}

Matrix decode_matrix(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMatrixHeaderBytes) throw IoError("read_matrix: truncated header");
  if (std::memcmp(bytes.data(), kMatrixMagic, 8) != 0) throw IoError("read_matrix: bad magic");
  const std::uint64_t rows = get_u64(bytes.data() + 8);
  const std::uint64_t cols = get_u64(bytes.data() + 16);
  constexpr auto kMaxIndex = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max());
  if (rows > kMaxIndex || cols > kMaxIndex || (cols != 0 && rows > kMaxIndex / 8 / cols))
    throw IoError("read_matrix: size overflow");
  const std::uint64_t payload = rows * cols * 8;
  if (bytes.size() - kMatrixHeaderBytes < payload) throw IoError("read_matrix: truncated payload");
  if (bytes.size() - kMatrixHeaderBytes > payload) throw IoError("read_matrix: trailing bytes");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const std::uint8_t* p = bytes.data() + kMatrixHeaderBytes;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j, p += 8) m(i, j) = std::bit_cast<double>(get_u64(p));
  return m;
}

void write_matrix(const Matrix& m, const fs::path& path) {
  const auto bytes = encode_matrix(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_matrix(bytes);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " ('" + path.string() + "')");
  }
}

DatasetSplit split_by_fire(const std::vector<SnapshotLabel>& labels,
                           const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::map<std::int64_t, std::vector<Eigen::Index>> by_fire;
  for (std::size_t c = 0; c < labels.size(); ++c)
    by_fire[labels[c].fire_id].push_back(static_cast<Eigen::Index>(c));
  if (by_fire.size() < 3)
    throw ConfigError("split_by_fire: need at least 3 distinct fires, got " +
                      std::to_string(by_fire.size()));

  std::vector<std::int64_t> fires;
  for (const auto& [id, cols] : by_fire) fires.push_back(id);
  Rng rng(seed);
  rng.shuffle(fires);

  const double total = static_cast<double>(labels.size());
  std::array<std::vector<Eigen::Index>, 3> parts;
  std::size_t part = 0;
  for (std::size_t k = 0; k < fires.size(); ++k) {
    const std::size_t fires_left = fires.size() - k;
    if (part < 2 && !parts[part].empty()) {
      const bool met = static_cast<double>(parts[part].size()) >= fractions[part] * total - 1e-9;
      if (met || fires_left <= 2 - part) ++part;
    }
    const auto& cols = by_fire[fires[k]];
    parts[part].insert(parts[part].end(), cols.begin(), cols.end());
  }
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("split_by_fire: too few fires to populate every part");

  DatasetSplit s;
  s.train = std::move(parts[0]);
  s.validation = std::move(parts[1]);
  s.test = std::move(parts[2]);
  for (auto* p : {&s.train, &s.validation, &s.test}) std::sort(p->begin(), p->end());
  return s;
}

SnapshotMatrix filter_snapshots(const SnapshotMatrix& m,
                                const std::function<bool(const SnapshotLabel&)>& keep) {
  std::vector<Eigen::Index> cols;
  for (std::size_t c = 0; c < m.labels.size(); ++c)
    if (keep(m.labels[c])) cols.push_back(static_cast<Eigen::Index>(c));
  return select_columns(m, cols);
}

SnapshotMatrix select_columns(const SnapshotMatrix& m, const std::vector<Eigen::Index>& cols) {
  SnapshotMatrix out;
  out.grid = m.grid;
  out.data.resize(m.data.rows(), static_cast<Eigen::Index>(cols.size()));
  out.labels.reserve(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= m.data.cols()) throw ConfigError("column index out of range");
    out.data.col(static_cast<Eigen::Index>(k)) = m.data.col(cols[k]);
    out.labels.push_back(m.labels[static_cast<std::size_t>(cols[k])]);
  }
  return out;
}

std::vector<Eigen::Index> final_time_columns(const std::vector<SnapshotLabel>& labels) {
  std::map<std::int64_t, Eigen::Index> last;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    auto [it, inserted] = last.try_emplace(labels[c].fire_id, static_cast<Eigen::Index>(c));
    if (!inserted && labels[c].time_index > labels[static_cast<std::size_t>(it->second)].time_index)
      it->second = static_cast<Eigen::Index>(c);
  }
  std::vector<Eigen::Index> out;
  for (const auto& [id, c] : last) out.push_back(c);
  return out;
}

json to_json(const Grid2D& g) { return {{"nx", g.nx}, {"ny", g.ny}, {"dx", g.dx}, {"dy", g.dy}}; }

Grid2D grid_from_json(const json& j) {
  Grid2D g;
  g.nx = j.at("nx").get<std::int64_t>();
  g.ny = j.at("ny").get<std::int64_t>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.validate();
  return g;
}

json to_json(const SnapshotLabel& l) {
  return {{"fire_id", l.fire_id}, {"time_index", l.time_index}, {"condition", l.condition}};
}

SnapshotLabel label_from_json(const json& j) {
  return {j.at("fire_id").get<std::int64_t>(), j.at("time_index").get<std::int64_t>(),
          j.value("condition", std::string{})};
}

json to_json(const DatasetSplit& s) {
  return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

DatasetSplit split_from_json(const json& j) {
  DatasetSplit s;
  s.train = j.at("train").get<std::vector<Eigen::Index>>();
  s.validation = j.at("validation").get<std::vector<Eigen::Index>>();
  s.test = j.at("test").get<std::vector<Eigen::Index>>();
  return s;
}

fs::path save_dataset(const Dataset& d, const fs::path& dir) {
  d.inputs.validate();
  d.outputs.validate(true);
  if (d.inputs.labels != d.outputs.labels || !(d.inputs.grid == d.outputs.grid))
    throw ConfigError("save_dataset: inputs and outputs are not aligned");
  fs::create_directories(dir);
  write_matrix(d.inputs.data, dir / "inputs.mlop");
  write_matrix(d.outputs.data, dir / "outputs.mlop");
  json labels = json::array();
  for (const auto& l : d.inputs.labels) labels.push_back(to_json(l));
  json manifest = {{"grid", to_json(d.inputs.grid)},
                   {"inputs", "inputs.mlop"},
                   {"outputs", "outputs.mlop"},
                   {"labels", labels}};
  const fs::path path = dir / "manifest.json";
  write_text(path, manifest.dump(2) + "\n");
  return path;
}

Dataset load_dataset(const fs::path& manifest) {
  json j;
  try {
    j = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    throw IoError("manifest '" + manifest.string() + "': " + e.what());
  }
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  Dataset d;
  try {
    d.inputs.grid = grid_from_json(j.at("grid"));
    for (const auto& l : j.at("labels")) d.inputs.labels.push_back(label_from_json(l));
    d.inputs.data = read_matrix(resolve(j.at("inputs").get<std::string>()));
    d.outputs.grid = d.inputs.grid;
    d.outputs.labels = d.inputs.labels;
    d.outputs.data = read_matrix(resolve(j.at("outputs").get<std::string>()));
  } catch (const json::exception& e) {
    throw IoError("manifest '" + manifest.string() + "': " + e.what());
  }
  d.inputs.validate();
  d.outputs.validate(true);
  return d;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace mlop
