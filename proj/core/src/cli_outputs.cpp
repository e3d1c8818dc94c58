#include "ftstab/cli_outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ftstab/errors.hpp"

namespace ftstab {

std::string csv_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

void OutputSet::add(std::string name, std::string content) {
  for (const OutputFile& f : files_) {
    if (f.name == name) throw_internal("output set: duplicate file name '" + name + "'");
  }
  files_.push_back(OutputFile{std::move(name), std::move(content)});
}

std::string OutputSet::manifest() const {
  std::vector<const OutputFile*> sorted;
  sorted.reserve(files_.size());
  for (const OutputFile& f : files_) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(),
            [](const OutputFile* a, const OutputFile* b) { return a->name < b->name; });
  std::ostringstream out;
  for (const OutputFile* f : sorted) {
    out << "fnv1a64 " << fnv1a64_hex(f->content) << " " << f->content.size() << " " << f->name
        << "\n";
  }
  return out.str();
}

void OutputSet::write_to(const std::string& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create output directory '" + dir + "': " + ec.message());
  const auto write_one = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw_io("short write to '" + path.string() + "'");
  };
  for (const OutputFile& f : files_) write_one(f.name, f.content);
  write_one("manifest.txt", manifest());
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt4g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, std::span<const Series> series) {
  constexpr double kW = 820.0, kH = 500.0;
  constexpr double kLeft = 70.0, kRight = 20.0, kTop = 44.0, kBottom = 40.0;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmin <= xmax)) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (!(ymin <= ymax)) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-300) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-300) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  const auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  out << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  out << "<rect x=\"" << fmt2(kLeft) << "\" y=\"" << fmt2(kTop) << "\" width=\"" << fmt2(plot_w)
      << "\" height=\"" << fmt2(plot_h) << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    out << "<line x1=\"" << fmt2(px(fx)) << "\" y1=\"" << fmt2(kTop + plot_h) << "\" x2=\""
        << fmt2(px(fx)) << "\" y2=\"" << fmt2(kTop + plot_h + 5) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt2(px(fx)) << "\" y=\"" << fmt2(kTop + plot_h + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt4g(fx)
        << "</text>\n";
    out << "<line x1=\"" << fmt2(kLeft - 5) << "\" y1=\"" << fmt2(py(fy)) << "\" x2=\""
        << fmt2(kLeft) << "\" y2=\"" << fmt2(py(fy)) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt2(kLeft - 9) << "\" y=\"" << fmt2(py(fy) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt4g(fy)
        << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    const std::size_t count = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (i) out << " ";
      out << fmt2(px(s.x[i])) << "," << fmt2(py(s.y[i]));
    }
    out << "\"/>\n";
    // Legend entry; skip when every series has the same empty label.
    if (!s.label.empty() && si < 12) {
      const double ly = kTop + 14.0 + 16.0 * static_cast<double>(si);
      out << "<line x1=\"" << fmt2(kLeft + plot_w - 130) << "\" y1=\"" << fmt2(ly - 4)
          << "\" x2=\"" << fmt2(kLeft + plot_w - 110) << "\" y2=\"" << fmt2(ly - 4)
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << fmt2(kLeft + plot_w - 105) << "\" y=\"" << fmt2(ly)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ftstab
