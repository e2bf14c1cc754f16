#include "hbd/plot.hpp"

#include "hbd/csv.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hbd {

namespace {

constexpr std::array<const char*, 6> kPalette{"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string escape(const std::string& s) {
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

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("plot: missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw std::runtime_error("plot: empty file " + path.string());
  Table t;
  for (auto f : csv::split(lines[0])) t.header.emplace_back(f);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> row;
    for (auto f : csv::split(lines[i])) row.emplace_back(f);
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": wrong field count");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::optional<double> cell(const std::string& s) { return s == "NA" ? std::nullopt : csv::parse_double(s); }

void write_svg(const std::filesystem::path& path, const std::string& svg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("plot: cannot write " + path.string());
  out << svg;
}

}  // namespace

std::string render_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                             const std::vector<BarSeries>& series) {
  const double width = 640, height = 400, left = 60, right = 20, top = 40, bottom = 70;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const double group_w = categories.empty() ? plot_w : plot_w / static_cast<double>(categories.size());
  const double bar_w = series.empty() ? 0 : group_w * 0.8 / static_cast<double>(series.size());

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0, y = top + plot_h * (1.0 - v);
    svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !series[s].values[c]) continue;
      const double v = std::clamp(*series[s].values[c], 0.0, 1.0);
      const double h = plot_h * v;
      svg << "<rect x=\"" << gx + bar_w * static_cast<double>(s) << "\" y=\"" << top + plot_h - h << "\" width=\""
          << bar_w * 0.95 << "\" height=\"" << h << "\" fill=\"" << kPalette[s % kPalette.size()] << "\"/>\n";
    }
    svg << "<text x=\"" << left + group_w * (static_cast<double>(c) + 0.5) << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double x = left + 130.0 * static_cast<double>(s), y = height - 22;
    svg << "<rect x=\"" << x << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[s % kPalette.size()] << "\"/>\n";
    svg << "<text x=\"" << x + 16 << "\" y=\"" << y << "\">" << escape(series[s].name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void plot_results_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
  const Table t = read_table(csv_path);
  const auto seed = t.column("seed"), mode = t.column("mode");
  const std::array<std::pair<const char*, const char*>, 3> metrics{
      {{"asr", "ASR"}, {"detection_rate", "detection rate"}, {"clean_accuracy", "clean accuracy"}}};
  std::vector<std::string> categories;
  std::vector<BarSeries> series;
  for (const auto& row : t.rows) {
    if (row[seed] != "mean") continue;
    BarSeries s{row[mode], {}};
    for (const auto& m : metrics) s.values.push_back(cell(row[t.column(m.first)]));
    series.push_back(std::move(s));
  }
  for (const auto& m : metrics) categories.emplace_back(m.second);
  write_svg(svg_path, render_bar_chart("Attack comparison (mean over trials)", categories, series));
}

void plot_ablation_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
  const Table t = read_table(csv_path);
  const auto variant = t.column("variant"), asr = t.column("asr_mean");
  std::vector<std::string> categories;
  BarSeries s{"mean ASR", {}};
  for (const auto& row : t.rows) {
    categories.push_back(row[variant]);
    s.values.push_back(cell(row[asr]));
  }
  write_svg(svg_path, render_bar_chart("Ablation", categories, {s}));
}

void plot_sweep_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
  const Table t = read_table(csv_path);
  const auto seed = t.column("seed"), mode = t.column("mode"), bin = t.column("bin"), asr = t.column("asr");
  std::vector<std::string> categories;
  std::vector<BarSeries> series;
  for (const auto& row : t.rows) {
    if (row[seed] != "mean") continue;
    auto c = std::find(categories.begin(), categories.end(), row[bin]);
    if (c == categories.end()) categories.push_back(row[bin]);
    auto s = std::find_if(series.begin(), series.end(), [&](const BarSeries& b) { return b.name == row[mode]; });
    if (s == series.end()) {
      series.push_back({row[mode], {}});
      s = series.end() - 1;
    }
    s->values.push_back(cell(row[asr]));
  }
  write_svg(svg_path, render_bar_chart("ASR by radial bin", categories, series));
}

}  // namespace hbd
