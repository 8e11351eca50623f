#include "export.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "saferep/numeric_text.hpp"

namespace saferep::cli {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// Pixel coordinates are printed with two decimals so output is stable text.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string ramp_color(double value) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  const double v = std::clamp(std::isfinite(value) ? value : 0.0, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(v), stops.size() - 2);
  const double t = v - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + t * (stops[i + 1][k] - stops[i][k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

void export_heatmap(const DsafGrid& grid, const std::filesystem::path& svg, const std::filesystem::path& matrix,
                    int cell_px) {
  if (cell_px < 1) throw std::invalid_argument("heatmap: cell size must be >= 1 px");
  grid.validate();
  const auto& s = grid.spec;
  const long w = static_cast<long>(s.n_cols) * cell_px;
  const long h = static_cast<long>(s.n_rows) * cell_px;

  auto out = open_out(svg);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" shape-rendering=\"crispEdges\">\n";
  out << "<desc>b_safe per cell; y1 [" << format_double(s.y1_min) << ", " << format_double(s.y1_max) << "], y2 ["
      << format_double(s.y2_min) << ", " << format_double(s.y2_max) << "], step " << format_double(s.step)
      << ", p_t " << format_double(grid.p_t) << "</desc>\n";
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto v = grid.index_of(c);
    const long x = static_cast<long>(v.col - 1) * cell_px;
    const long y = static_cast<long>(s.n_rows - v.row) * cell_px;
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_px << "\" height=\"" << cell_px
        << "\" fill=\"" << ramp_color(grid.cells[c].b_safe) << "\"/>\n";
  }
  out << "</svg>\n";
  finish(out, svg);

  auto mat = open_out(matrix);
  for (std::size_t row = s.n_rows; row >= 1; --row) {
    for (std::size_t col = 1; col <= s.n_cols; ++col) {
      if (col > 1) mat << ' ';
      mat << format_double(grid.at({row, col}).b_safe);
    }
    mat << '\n';
  }
  finish(mat, matrix);
}

void export_scatter(const LabelledEmbedding& points, const std::filesystem::path& svg,
                    const std::filesystem::path& list) {
  const auto& e = points.embedding;
  if (e.n == 0) throw std::invalid_argument("scatter: no points");
  double lo[2] = {e.coord(0, 0), e.coord(0, 1)}, hi[2] = {lo[0], lo[1]};
  for (std::size_t i = 0; i < e.n; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], e.coord(i, k));
      hi[k] = std::max(hi[k], e.coord(i, k));
    }
  }
  constexpr double kSize = 600.0, kMargin = 20.0;
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
  const double scale = (kSize - 2 * kMargin) / span;

  auto out = open_out(svg);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n"
      << "<rect width=\"600\" height=\"600\" fill=\"#ffffff\"/>\n";
  for (std::size_t i = 0; i < e.n; ++i) {
    const double x = kMargin + (e.coord(i, 0) - lo[0]) * scale;
    const double y = kSize - kMargin - (e.coord(i, 1) - lo[1]) * scale;
    out << "<circle cx=\"" << px(x) << "\" cy=\"" << px(y) << "\" r=\"2\" fill=\""
        << (points.labels[i] == 1 ? "#2ca02c" : "#1f77b4") << "\"/>\n";
  }
  out << "</svg>\n";
  finish(out, svg);

  auto txt = open_out(list);
  for (std::size_t i = 0; i < e.n; ++i) {
    txt << i << ' ' << points.labels[i] << ' ' << format_double(e.coord(i, 0)) << ' ' << format_double(e.coord(i, 1))
        << '\n';
  }
  finish(txt, list);
}

}  // namespace saferep::cli
