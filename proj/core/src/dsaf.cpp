#include "saferep/dsaf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "parallel.hpp"
#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

constexpr const char* kGridTag = "saferep-grid";
constexpr int kGridVersion = 1;

std::size_t cells_along(double lo, double hi, double step) {
  const double span = (hi - lo) / step;
  const double whole = std::round(span);
  if (!(whole >= 1.0) || std::abs(span - whole) > 1e-9 * std::max(1.0, whole)) {
    throw std::invalid_argument("grid: span " + format_double(hi - lo) + " is not a whole multiple of step " +
                                format_double(step));
  }
  return static_cast<std::size_t>(whole);
}

std::optional<std::size_t> axis_index(double y, double lo, double hi, double step, std::size_t count) {
  if (!(y >= lo) || !(y <= hi)) return std::nullopt;
  const auto k = static_cast<std::size_t>(std::floor((y - lo) / step));
  return std::min(k, count - 1) + 1;
}

}  // namespace

GridSpec GridSpec::make(double y1_min, double y1_max, double y2_min, double y2_max, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("grid: step must be > 0");
  if (!(y1_max > y1_min) || !(y2_max > y2_min)) throw std::invalid_argument("grid: empty range");
  GridSpec s;
  s.y1_min = y1_min;
  s.y1_max = y1_max;
  s.y2_min = y2_min;
  s.y2_max = y2_max;
  s.step = step;
  s.n_cols = cells_along(y1_min, y1_max, step);
  s.n_rows = cells_along(y2_min, y2_max, step);
  return s;
}

void GridSpec::validate() const {
  const GridSpec ref = make(y1_min, y1_max, y2_min, y2_max, step);
  if (ref.n_rows != n_rows || ref.n_cols != n_cols) throw std::invalid_argument("grid: cell counts inconsistent with range");
}

GridSpec fit_grid_spec(std::span<const Point2> ys, std::size_t cells, double quantum) {
  if (ys.empty()) throw std::invalid_argument("grid fit: no points");
  if (cells == 0 || !(quantum > 0.0)) throw std::invalid_argument("grid fit: need cells > 0 and quantum > 0");
  Point2 lo = ys.front(), hi = ys.front();
  for (const auto& y : ys) {
    if (!std::isfinite(y[0]) || !std::isfinite(y[1])) throw std::invalid_argument("grid fit: non-finite point");
    for (std::size_t k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], y[k]);
      hi[k] = std::max(hi[k], y[k]);
    }
  }
  const double span = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  const double step = std::max(quantum, std::ceil(span / static_cast<double>(cells) / quantum) * quantum);
  auto axis = [&](std::size_t k) {
    const double a = std::floor(lo[k] / step) * step;
    const double n = std::max(1.0, std::floor((hi[k] - a) / step) + 1.0);
    return std::pair{a, a + n * step};
  };
  const auto [a1, b1] = axis(0);
  const auto [a2, b2] = axis(1);
  return GridSpec::make(a1, b1, a2, b2, step);
}

Point2 GridSpec::cell_center(std::size_t row, std::size_t col) const {
  return {y1_min + (static_cast<double>(col) - 0.5) * step, y2_min + (static_cast<double>(row) - 0.5) * step};
}

std::optional<CellIndex> locate(const GridSpec& spec, const Point2& y) {
  const auto col = axis_index(y[0], spec.y1_min, spec.y1_max, spec.step, spec.n_cols);
  const auto row = axis_index(y[1], spec.y2_min, spec.y2_max, spec.step, spec.n_rows);
  if (!col || !row) return std::nullopt;
  return CellIndex{*row, *col};
}

DsafGrid::DsafGrid(const GridSpec& s, const Bba& fill, double pt) : spec(s), cells(s.cell_count(), fill), p_t(pt) {}

void DsafGrid::validate() const {
  spec.validate();
  if (!(p_t > 0.0 && p_t < 1.0)) throw std::invalid_argument("grid: p_t must be in (0, 1)");
  if (cells.size() != spec.cell_count()) throw std::invalid_argument("grid: cell count mismatch");
  for (const auto& c : cells) validate_bba(c);
}

std::vector<Bba> init_training_bbas(std::span<const int> labels, double mu_ini) {
  if (!(mu_ini > 0.0 && mu_ini < 1.0)) throw std::invalid_argument("mu_ini must be in (0, 1)");
  std::vector<Bba> out;
  out.reserve(labels.size());
  for (int label : labels) {
    out.push_back(label == 1 ? Bba{1.0 - mu_ini, 0.0, mu_ini} : Bba{0.0, 1.0 - mu_ini, mu_ini});
  }
  return out;
}

DsafGrid prior_dsaf(std::span<const Bba> bbas, std::span<const std::optional<CellIndex>> cells,
                    const GridSpec& spec, std::size_t k_min, const Bba& b_ini, double p_t) {
  if (k_min < 1) throw std::invalid_argument("k_min must be >= 1");
  if (bbas.size() != cells.size()) throw std::invalid_argument("prior_dsaf: BBA and cell counts differ");
  validate_bba(b_ini);
  DsafGrid grid(spec, b_ini, p_t);
  grid.validate();

  std::vector<std::vector<Bba>> members(spec.cell_count());
  for (std::size_t i = 0; i < bbas.size(); ++i) {
    if (cells[i]) members[grid.offset(*cells[i])].push_back(bbas[i]);
  }
  detail::parallel_for(members.size(), [&](std::size_t c) {
    auto& set = members[c];
    if (set.size() < k_min) return;
    if (set.size() == 1) {
      grid.cells[c] = set.front();
      return;
    }
    // Fixed summation order: the cell value depends on the multiset only.
    std::sort(set.begin(), set.end(), [](const Bba& a, const Bba& b) {
      return std::tie(a.b_safe, a.b_unsafe, a.mu) < std::tie(b.b_safe, b.b_unsafe, b.mu);
    });
    grid.cells[c] = wbf_fuse(set);
  });
  return grid;
}

double dsaf_query(const DsafGrid& grid, const Point2& y) {
  const auto v = locate(grid.spec, y);
  return v ? grid.at(*v).b_safe : 0.0;
}

double dsaf_query(const DsafGrid& grid, const SafetyFeatureMap& map, const SystemState& x) {
  return dsaf_query(grid, apply_feature_map(map, x));
}

std::vector<CellIndex> safe_region_cells(const DsafGrid& grid) {
  std::vector<CellIndex> out;
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    if (grid.cells[c].b_safe > grid.p_t) out.push_back(grid.index_of(c));
  }
  return out;
}

void write_grid(const DsafGrid& grid, const std::filesystem::path& path) {
  grid.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const auto& s = grid.spec;
  out << kGridTag << ' ' << kGridVersion << '\n'
      << "y1 " << format_double(s.y1_min) << ' ' << format_double(s.y1_max) << '\n'
      << "y2 " << format_double(s.y2_min) << ' ' << format_double(s.y2_max) << '\n'
      << "step " << format_double(s.step) << '\n'
      << "size " << s.n_rows << ' ' << s.n_cols << '\n'
      << "p_t " << format_double(grid.p_t) << '\n';
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto v = grid.index_of(c);
    const auto& b = grid.cells[c];
    out << v.row << ' ' << v.col << ' ' << format_double(b.b_safe) << ' ' << format_double(b.b_unsafe) << ' '
        << format_double(b.mu) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

DsafGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto tokens = [&]() {
    std::string line;
    if (!std::getline(in, line)) {
      ++line_no;
      fail("unexpected end of file");
    }
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    return tok;
  };
  auto keyed = [&](const char* key, std::size_t count) {
    auto tok = tokens();
    if (tok.size() != count + 1 || tok[0] != key) fail(std::string("expected '") + key + "'");
    tok.erase(tok.begin());
    return tok;
  };

  DsafGrid grid;
  try {
    const auto head = tokens();
    if (head.size() != 2 || head[0] != kGridTag) fail("not a saferep grid file");
    if (head[1] != std::to_string(kGridVersion)) fail("unsupported grid version " + head[1]);
    const auto y1 = keyed("y1", 2);
    const auto y2 = keyed("y2", 2);
    const auto step = keyed("step", 1);
    const auto size = keyed("size", 2);
    const auto pt = keyed("p_t", 1);
    grid.spec = GridSpec::make(parse_double(y1[0]), parse_double(y1[1]), parse_double(y2[0]), parse_double(y2[1]),
                               parse_double(step[0]));
    if (static_cast<std::size_t>(parse_int(size[0])) != grid.spec.n_rows ||
        static_cast<std::size_t>(parse_int(size[1])) != grid.spec.n_cols) {
      fail("size does not match range and step");
    }
    grid.p_t = parse_double(pt[0]);
    grid.cells.resize(grid.spec.cell_count());
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
      const auto tok = tokens();
      if (tok.size() != 5) fail("cell line needs 5 fields");
      const CellIndex v{static_cast<std::size_t>(parse_int(tok[0])), static_cast<std::size_t>(parse_int(tok[1]))};
      if (!(v == grid.index_of(c))) fail("cells out of order");
      grid.cells[c] = {parse_double(tok[2]), parse_double(tok[3]), parse_double(tok[4])};
      validate_bba(grid.cells[c]);
    }
    if (std::string rest; in >> rest) {
      ++line_no;
      fail("trailing data after last cell");
    }
    if (!(grid.p_t > 0.0 && grid.p_t < 1.0)) fail("p_t must be in (0, 1)");
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  return grid;
}

}  // namespace saferep
