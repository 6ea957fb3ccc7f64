#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mal/errors.hpp"
#include "mal/lmc.hpp"
#include "mal/matrix.hpp"

namespace mal {

/// Grid of metric values keyed by (row_arch, col_arch); NaN marks missing or
/// undefined cells (rendered hatched).
struct HeatmapGrid {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    MatD values; // rows × cols, NaN = missing
    std::string metric;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

inline int find_or_add(std::vector<std::string>& labels, const std::string& label) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    labels.push_back(label);
    return static_cast<int>(labels.size()) - 1;
}

} // namespace detail

/// Reads a pairs CSV — a header naming at least row_arch, col_arch and the
/// requested metric column, then one row per cell. Labels keep first-seen
/// order; repeated cells are overwritten by later rows; unparsable or empty
/// metric fields become NaN.
inline HeatmapGrid heatmap_from_pairs_csv(std::istream& in, const std::string& metric) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("pairs CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = detail::split_csv_line(line);
    int row_col = -1, col_col = -1, metric_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "row_arch") row_col = static_cast<int>(i);
        if (header[i] == "col_arch") col_col = static_cast<int>(i);
        if (header[i] == metric) metric_col = static_cast<int>(i);
    }
    if (row_col < 0 || col_col < 0)
        throw FormatError("pairs CSV header lacks row_arch/col_arch columns");
    if (metric_col < 0) throw ConfigError("pairs CSV has no column named '" + metric + "'");

    struct Cell {
        std::string row, col;
        double value;
    };
    std::vector<Cell> cells;
    HeatmapGrid grid;
    grid.metric = metric;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        const int need = std::max(std::max(row_col, col_col), metric_col);
        if (static_cast<int>(fields.size()) <= need)
            throw FormatError("pairs CSV line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, need " +
                              std::to_string(need + 1));
        double value = std::numeric_limits<double>::quiet_NaN();
        const std::string& raw = fields[metric_col];
        if (!raw.empty()) {
            char* end = nullptr;
            const double parsed = std::strtod(raw.c_str(), &end);
            if (end && *end == '\0') value = parsed;
        }
        detail::find_or_add(grid.row_labels, fields[row_col]);
        detail::find_or_add(grid.col_labels, fields[col_col]);
        cells.push_back({fields[row_col], fields[col_col], value});
    }
    grid.values = MatD(static_cast<int>(grid.row_labels.size()),
                       static_cast<int>(grid.col_labels.size()),
                       std::numeric_limits<double>::quiet_NaN());
    for (const Cell& c : cells) {
        const int r = detail::find_or_add(grid.row_labels, c.row);
        const int col = detail::find_or_add(grid.col_labels, c.col);
        grid.values(r, col) = c.value;
    }
    return grid;
}

/// Echo of the rendered data: row_arch,col_arch,<metric>, skipping NaN cells.
inline void write_heatmap_csv(std::ostream& out, const HeatmapGrid& grid) {
    out << "row_arch,col_arch," << grid.metric << '\n';
    for (int r = 0; r < grid.values.rows; ++r)
        for (int c = 0; c < grid.values.cols; ++c)
            if (!std::isnan(grid.values(r, c)))
                out << grid.row_labels[r] << ',' << grid.col_labels[c] << ','
                    << format_g9(grid.values(r, c)) << '\n';
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string rgb_hex(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace detail

/// A static SVG heatmap: one rect per cell on a monotone light-to-dark ramp
/// (lighter = lower metric), value text inside each cell, hatched cells for
/// NaN, plus a min/max legend. Output depends only on the grid contents.
inline std::string render_heatmap_svg(const HeatmapGrid& grid) {
    const int rows = grid.values.rows, cols = grid.values.cols;
    if (rows == 0 || cols == 0) throw ConfigError("heatmap grid is empty");

    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (double v : grid.values.data) {
        if (std::isnan(v)) continue;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const bool any_value = vmin <= vmax;
    const double span = (any_value && vmax > vmin) ? vmax - vmin : 0.0;

    const int cell = 46, gap = 2;
    const int left = 170, top = 96, right = 24, bottom = 120, legend_h = 46;
    const int width = left + cols * (cell + gap) + right;
    const int height = top + rows * (cell + gap) + bottom + legend_h;

    // light #f7f7f7 → dark #27272a, monotone in the metric
    auto fill_for = [&](double v) {
        const double t = span > 0.0 ? (v - vmin) / span : 0.0;
        const int r = static_cast<int>(std::lround(247 + t * (39 - 247)));
        const int g = static_cast<int>(std::lround(247 + t * (39 - 247)));
        const int b = static_cast<int>(std::lround(247 + t * (42 - 247)));
        return detail::rgb_hex(r, g, b);
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<!-- mal heatmap format 1 -->\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "  <defs>\n"
           "    <pattern id=\"na\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">\n"
           "      <rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>\n"
           "      <path d=\"M0,6 l6,-6\" stroke=\"#b91c1c\" stroke-width=\"1\"/>\n"
           "    </pattern>\n"
           "  </defs>\n";
    svg << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
    svg << "  <text x=\"" << left << "\" y=\"28\" font-family=\"monospace\" font-size=\"16\">"
        << detail::xml_escape(grid.metric) << " (lighter = lower)</text>\n";

    for (int c = 0; c < cols; ++c) {
        const int x = left + c * (cell + gap) + cell / 2;
        svg << "  <text x=\"" << x << "\" y=\"" << top - 10
            << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-45 "
            << x << ' ' << top - 10 << ")\">" << detail::xml_escape(grid.col_labels[c])
            << "</text>\n";
    }
    for (int r = 0; r < rows; ++r) {
        const int y = top + r * (cell + gap) + cell / 2 + 4;
        svg << "  <text x=\"" << left - 8 << "\" y=\"" << y
            << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">"
            << detail::xml_escape(grid.row_labels[r]) << "</text>\n";
    }

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int x = left + c * (cell + gap);
            const int y = top + r * (cell + gap);
            const double v = grid.values(r, c);
            if (std::isnan(v)) {
                svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                    << "\" height=\"" << cell
                    << "\" fill=\"url(#na)\" stroke=\"#999999\" stroke-width=\"0.5\"><title>"
                    << detail::xml_escape(grid.row_labels[r]) << " / "
                    << detail::xml_escape(grid.col_labels[c]) << ": n/a</title></rect>\n";
                svg << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
                    << "\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"middle\" "
                       "fill=\"#b91c1c\">n/a</text>\n";
                continue;
            }
            const double t = span > 0.0 ? (v - vmin) / span : 0.0;
            svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << fill_for(v)
                << "\" stroke=\"#999999\" stroke-width=\"0.5\"><title>"
                << detail::xml_escape(grid.row_labels[r]) << " / "
                << detail::xml_escape(grid.col_labels[c]) << ": " << format_g9(v)
                << "</title></rect>\n";
            char text[32];
            std::snprintf(text, sizeof(text), "%.3g", v);
            svg << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
                << "\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"middle\" fill=\""
                << (t > 0.55 ? "#ffffff" : "#111111") << "\">" << text << "</text>\n";
        }
    }

    if (any_value) {
        const int ly = top + rows * (cell + gap) + bottom - 20;
        const int lw = std::min(240, cols * (cell + gap));
        svg << "  <defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">"
               "<stop offset=\"0\" stop-color=\"#f7f7f7\"/><stop offset=\"1\" stop-color=\"#27272a\"/>"
               "</linearGradient></defs>\n";
        svg << "  <rect x=\"" << left << "\" y=\"" << ly << "\" width=\"" << lw
            << "\" height=\"12\" fill=\"url(#ramp)\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
        svg << "  <text x=\"" << left << "\" y=\"" << ly + 26
            << "\" font-family=\"monospace\" font-size=\"10\">" << format_g9(vmin) << "</text>\n";
        svg << "  <text x=\"" << left + lw << "\" y=\"" << ly + 26
            << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">"
            << format_g9(vmax) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace mal
