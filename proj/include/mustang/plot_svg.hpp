#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mustang {

// Minimal self-contained SVG line chart for curve exports.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<std::pair<double, double>>& points);

}  // namespace mustang
