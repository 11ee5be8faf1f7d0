#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ganad/evaluation.hpp"

namespace ganad {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal standalone SVG charts.
std::string svg_line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label);
std::string svg_histogram(const std::string& title, const std::vector<double>& edges,
                          const std::map<std::string, std::vector<std::size_t>>& counts, bool normalize = true);
std::string svg_roc(const RocResult& roc);
std::string svg_latent_histogram(const LatentAnalysis& analysis);

// Collects whatever artifacts the run directory holds into report.md plus
// SVG figures, all written into the same directory. Returns the markdown.
std::string write_report(const std::filesystem::path& run_dir);

}  // namespace ganad
