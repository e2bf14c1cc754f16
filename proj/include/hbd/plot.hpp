#pragma once

// Static SVG charts rendered from the emitted CSV files only.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hbd {

struct BarSeries {
  std::string name;
  std::vector<std::optional<double>> values;  // one per category; nullopt draws nothing
};

/// Grouped bar chart with a [0, 1] value axis.
std::string render_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                             const std::vector<BarSeries>& series);

/// results.csv -> mean ASR, detection rate and clean accuracy per mode.
void plot_results_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path);
/// ablation.csv -> mean ASR per variant.
void plot_ablation_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path);
/// sweep.csv -> mean ASR per radial bin and mode.
void plot_sweep_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path);

}  // namespace hbd
