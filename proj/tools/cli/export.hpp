#pragma once

#include <filesystem>
#include <string>

#include "saferep/dsaf.hpp"
#include "saferep/embed.hpp"

namespace saferep::cli {

/// Fixed five-stop ramp over [0, 1] (dark purple -> yellow), "#rrggbb".
std::string ramp_color(double value);

/// Heatmap of b_safe per cell (row 1 at the bottom) plus a plain matrix with
/// one line per row, top row first.
void export_heatmap(const DsafGrid& grid, const std::filesystem::path& svg, const std::filesystem::path& matrix,
                    int cell_px);

/// Scatter of the first two coordinates, safe points green, unsafe blue,
/// plus "index label y1 y2" point list.
void export_scatter(const LabelledEmbedding& points, const std::filesystem::path& svg,
                    const std::filesystem::path& list);

}  // namespace saferep::cli
