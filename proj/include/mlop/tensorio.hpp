#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mlop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Uniform cartesian grid. Fields are flattened row-major: index = ix + nx * iy.
struct Grid2D {
  std::int64_t nx = 1;
  std::int64_t ny = 1;
  double dx = 1.0;
  double dy = 1.0;

  std::int64_t size() const { return nx * ny; }
  std::int64_t index(std::int64_t ix, std::int64_t iy) const { return ix + nx * iy; }
  void validate() const;

  bool operator==(const Grid2D&) const = default;
};

struct SnapshotLabel {
  std::int64_t fire_id = 0;
  std::int64_t time_index = 0;
  std::string condition;

  bool operator==(const SnapshotLabel&) const = default;
};

/// Column-ordered field snapshots (one column per snapshot) with per-column labels.
struct SnapshotMatrix {
  Grid2D grid;
  Matrix data;
  std::vector<SnapshotLabel> labels;

  Eigen::Index cols() const { return data.cols(); }
  Eigen::Index rows() const { return data.rows(); }

  /// Checks shape, label count and finiteness. With `nonnegative`, also rejects
  /// negative entries (smoke snapshots).
  void validate(bool nonnegative = false) const;
};

/// Column indices of each part. The three parts partition the snapshot set and
/// never share a fire.
struct DatasetSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
  std::vector<Eigen::Index> test;

  const std::vector<Eigen::Index>& part(const std::string& name) const;
};

/// Inputs and outputs sharing one grid and one label list.
struct Dataset {
  SnapshotMatrix inputs;
  SnapshotMatrix outputs;
};

// Binary matrix format: "MLOPMAT1", u64 rows, u64 cols (little endian), then
// rows*cols little-endian f64 in row-major order.
inline constexpr char kMatrixMagic[8] = {'M', 'L', 'O', 'P', 'M', 'A', 'T', '1'};
inline constexpr std::size_t kMatrixHeaderBytes = 24;

void write_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path);

/// Serialized bytes of `m` in the on-disk format.
std::vector<std::uint8_t> encode_matrix(const Matrix& m);
Matrix decode_matrix(const std::vector<std::uint8_t>& bytes);

DatasetSplit split_by_fire(const std::vector<SnapshotLabel>& labels,
                           const std::array<double, 3>& fractions, std::uint64_t seed);

SnapshotMatrix filter_snapshots(const SnapshotMatrix& m,
                                const std::function<bool(const SnapshotLabel&)>& keep);

/// Column subset, order as given.
SnapshotMatrix select_columns(const SnapshotMatrix& m, const std::vector<Eigen::Index>& cols);

/// For each fire, the column with the largest time_index (ascending fire_id order).
std::vector<Eigen::Index> final_time_columns(const std::vector<SnapshotLabel>& labels);

nlohmann::json to_json(const Grid2D& g);
Grid2D grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SnapshotLabel& l);
SnapshotLabel label_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const nlohmann::json& j);

/// Writes `dir/inputs.mlop`, `dir/outputs.mlop` and `dir/manifest.json`; returns
/// the manifest path. Matrix paths in the manifest are relative to its directory.
std::filesystem::path save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mlop
