#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftstab/mcsim.hpp"
#include "ftstab/model.hpp"

namespace ftstab {

// How the uncertainty section pins down F realizations: one constant matrix,
// an explicit per-step sequence, or a scalar grid f in [lo, hi] applied to a
// unit-norm template (for square channels, f on the leading diagonal).
enum class UncKind { constant, sequence, grid };

struct UncConfig {
  UncKind kind = UncKind::constant;
  Mat constant_F = Mat(0, 0);
  std::vector<Mat> sequence;
  double lo = 0.0, hi = 0.0, step = 1.0;

  std::vector<double> grid_values() const;
};

struct McConfig {
  std::size_t runs = 10000;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
  // Initial state for simulation commands. When absent, the worst admissible
  // initial state on the eps1 ellipsoid is used.
  std::optional<std::vector<double>> x0;
};

struct LmiConfig {
  std::optional<double> gamma;
  std::vector<double> gamma_grid;  // replaces the default grid when nonempty
  std::size_t max_iters = 20000;
  double tol = 1e-6;
};

struct Config {
  PlantParams plant;
  GainPackage controller;
  FtSpec spec;
  UncConfig uncertainty;
  McConfig mc;
  LmiConfig lmi;
};

// Parses and fully validates a JSON config. Unknown keys are rejected; every
// error message names the offending path and the constraint it broke.
Config parse_config(const std::string& text);

Config load_config_file(const std::string& path);

// The realizations the uncertainty section denotes, tagged for reporting
// ("constant", "sequence", or "f=<value>" per grid point).
struct NamedRealization {
  std::string tag;
  UncRealization real;
};

std::vector<NamedRealization> realizations_from(const UncConfig& unc, std::size_t q,
                                                std::size_t p, std::size_t T);

}  // namespace ftstab
