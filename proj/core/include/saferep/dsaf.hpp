#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "saferep/belief.hpp"
#include "saferep/statemap.hpp"

namespace saferep {

/// Uniform grid over [y1_min, y1_max] x [y2_min, y2_max]. Columns follow y1,
/// rows follow y2.
struct GridSpec {
  double y1_min = -30.0, y1_max = 30.0;
  double y2_min = -30.0, y2_max = 30.0;
  double step = 1.0;
  std::size_t n_rows = 60, n_cols = 60;

  /// Derives the cell counts; throws unless both spans are whole multiples
  /// of `step`.
  static GridSpec make(double y1_min, double y1_max, double y2_min, double y2_max, double step);

  void validate() const;
  std::size_t cell_count() const { return n_rows * n_cols; }
  /// Centre of cell [row, col] (1-based).
  Point2 cell_center(std::size_t row, std::size_t col) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Grid covering all `ys`: the step is the larger span divided by `cells`,
/// rounded up to a multiple of `quantum`; bounds are snapped to the step.
GridSpec fit_grid_spec(std::span<const Point2> ys, std::size_t cells, double quantum);

/// 1-based [row, col].
struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Cell containing y; the upper boundaries belong to the last row/column.
/// nullopt outside the grid.
std::optional<CellIndex> locate(const GridSpec& spec, const Point2& y);

struct DsafGrid {
  GridSpec spec;
  std::vector<Bba> cells;  // row-major, (row-1) * n_cols + (col-1)
  double p_t = 0.6;

  DsafGrid() = default;
  DsafGrid(const GridSpec& spec, const Bba& fill, double p_t);

  Bba& at(const CellIndex& v) { return cells[offset(v)]; }
  const Bba& at(const CellIndex& v) const { return cells[offset(v)]; }
  std::size_t offset(const CellIndex& v) const { return (v.row - 1) * spec.n_cols + (v.col - 1); }
  CellIndex index_of(std::size_t offset) const { return {offset / spec.n_cols + 1, offset % spec.n_cols + 1}; }

  void validate() const;

  friend bool operator==(const DsafGrid&, const DsafGrid&) = default;
};

/// (1 - mu_ini, 0, mu_ini) for safe records, (0, 1 - mu_ini, mu_ini) otherwise.
std::vector<Bba> init_training_bbas(std::span<const int> labels, double mu_ini);

/// Fuses the BBAs that fall in each cell when there are at least k_min of
/// them; other cells get `b_ini`. Records outside the grid are dropped.
DsafGrid prior_dsaf(std::span<const Bba> bbas, std::span<const std::optional<CellIndex>> cells,
                    const GridSpec& spec, std::size_t k_min, const Bba& b_ini, double p_t);

/// b_safe of the cell containing y, 0 outside the grid.
double dsaf_query(const DsafGrid& grid, const Point2& y);
double dsaf_query(const DsafGrid& grid, const SafetyFeatureMap& map, const SystemState& x);

/// Cells whose b_safe is strictly above p_t.
std::vector<CellIndex> safe_region_cells(const DsafGrid& grid);

/// Text dump: header with geometry and p_t, then "row col b_safe b_unsafe mu"
/// per cell.
void write_grid(const DsafGrid& grid, const std::filesystem::path& path);
DsafGrid read_grid(const std::filesystem::path& path);

}  // namespace saferep
