#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftstab {

// Shortest representation that round-trips a double (17 significant digits).
std::string csv_real(double v);

std::uint64_t fnv1a64(std::string_view text);
std::string fnv1a64_hex(std::string_view text);

struct OutputFile {
  std::string name;
  std::string content;
};

// Collects artifacts in memory, then writes them plus manifest.txt. The
// manifest lists name, byte count and content hash of every file, sorted by
// name, so identical runs are provably identical byte for byte.
class OutputSet {
 public:
  void add(std::string name, std::string content);
  const std::vector<OutputFile>& files() const noexcept { return files_; }
  std::string manifest() const;
  void write_to(const std::string& dir) const;

 private:
  std::vector<OutputFile> files_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal polyline chart, no external renderer. Plots are a convenience; the
// CSVs are the contract.
std::string svg_line_chart(const std::string& title, std::span<const Series> series);

}  // namespace ftstab
