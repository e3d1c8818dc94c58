#include "ftstab/cli_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "ftstab/errors.hpp"

namespace ftstab {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw_validation("config " + path + ": " + what);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
}

void expect_keys(const json& j, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) bad(path + "." + it.key(), "unknown key");
  }
}

const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const std::string& path, const char* key) {
  const json* v = find(j, key);
  if (v == nullptr) bad(path + "." + key, "required key missing");
  return *v;
}

double get_real(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a real number");
  return j.get<double>();
}

std::uint64_t get_u64(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) bad(path, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

Mat get_mat(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty array of row arrays");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.empty()) bad(path, "row " + std::to_string(r) + " is not an array");
    if (r == 0) {
      cols = row.size();
    } else if (row.size() != cols) {
      bad(path, "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                    " entries, row 0 has " + std::to_string(cols));
    }
  }
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const json& v = j[r][c];
      if (!v.is_number()) bad(path, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                        ") is not a number");
      m(r, c) = v.get<double>();
      if (!std::isfinite(m(r, c))) bad(path, "entry (" + std::to_string(r) + "," +
                                                 std::to_string(c) + ") is not finite");
    }
  return m;
}

// Accepts either a bare number (1x1) or nested arrays.
Mat get_mat_or_scalar(const json& j, const std::string& path) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  return get_mat(j, path);
}

void check_f_norm(const Mat& f, const std::string& path) {
  const double nrm = spectral_norm(f);
  if (nrm > 1.0 + 1e-12) {
    bad(path, "spectral norm " + std::to_string(nrm) + " exceeds 1; admissible F satisfy ||F|| <= 1");
  }
}

PlantParams parse_plant(const json& j) {
  expect_object(j, "plant");
  expect_keys(j, "plant", {"A1", "A2", "B", "C1", "C2", "D"});
  Mat a1 = get_mat(require(j, "plant", "A1"), "plant.A1");
  Mat a2 = get_mat(require(j, "plant", "A2"), "plant.A2");
  Mat b = get_mat(require(j, "plant", "B"), "plant.B");
  Mat c1 = get_mat(require(j, "plant", "C1"), "plant.C1");
  Mat c2 = get_mat(require(j, "plant", "C2"), "plant.C2");
  Mat d = get_mat(require(j, "plant", "D"), "plant.D");
  try {
    return PlantParams(std::move(a1), std::move(a2), std::move(b), std::move(c1), std::move(c2),
                       std::move(d));
  } catch (const Error& e) {
    bad("plant", e.what());
  }
}

GainPackage parse_controller(const json* j, const PlantParams& plant) {
  const std::size_t n = plant.n();
  const std::size_t m = plant.m();
  Mat k1(m, n), k2(m, n);
  Mat mm(m, 1), n1(1, n), n2(1, n);  // inactive channel when unspecified
  double alpha = 0.0;
  if (j != nullptr) {
    expect_object(*j, "controller");
    expect_keys(*j, "controller", {"K1", "K2", "M", "N1", "N2", "alpha_bar"});
    if (const json* v = find(*j, "K1")) k1 = get_mat(*v, "controller.K1");
    if (const json* v = find(*j, "K2")) k2 = get_mat(*v, "controller.K2");
    if (const json* v = find(*j, "M")) mm = get_mat(*v, "controller.M");
    if (const json* v = find(*j, "N1")) n1 = get_mat(*v, "controller.N1");
    if (const json* v = find(*j, "N2")) n2 = get_mat(*v, "controller.N2");
    if (const json* v = find(*j, "alpha_bar")) {
      alpha = get_real(*v, "controller.alpha_bar");
      if (alpha < 0.0 || alpha > 1.0) bad("controller.alpha_bar", "must lie in [0, 1]");
    }
  }
  try {
    return GainPackage(std::move(k1), std::move(k2), std::move(mm), std::move(n1), std::move(n2),
                       alpha);
  } catch (const Error& e) {
    bad("controller", e.what());
  }
}

FtSpec parse_spec(const json& j, const PlantParams& plant) {
  expect_object(j, "spec");
  expect_keys(j, "spec", {"eps1", "eps2", "T", "R"});
  const double eps1 = get_real(require(j, "spec", "eps1"), "spec.eps1");
  const double eps2 = get_real(require(j, "spec", "eps2"), "spec.eps2");
  if (!(eps1 > 0.0)) bad("spec.eps1", "must be positive");
  if (eps1 > eps2) bad("spec", "eps1 <= eps2 required");
  const json& jt = require(j, "spec", "T");
  if (!jt.is_number_unsigned()) bad("spec.T", "expected a nonnegative integer");
  const std::size_t T = jt.get<std::size_t>();
  if (T == 0) bad("spec.T", "horizon must be at least 1");

  const json& jr = require(j, "spec", "R");
  expect_object(jr, "spec.R");
  expect_keys(jr, "spec.R", {"explicit", "exp_decay"});
  const json* ex = find(jr, "explicit");
  const json* ed = find(jr, "exp_decay");
  if ((ex != nullptr) == (ed != nullptr)) {
    bad("spec.R", "exactly one of 'explicit' or 'exp_decay' required");
  }
  std::vector<SymMat> R;
  if (ed != nullptr) {
    expect_object(*ed, "spec.R.exp_decay");
    expect_keys(*ed, "spec.R.exp_decay", {"scale", "rate"});
    const double scale = get_real(require(*ed, "spec.R.exp_decay", "scale"), "spec.R.exp_decay.scale");
    const double rate = get_real(require(*ed, "spec.R.exp_decay", "rate"), "spec.R.exp_decay.rate");
    if (!(scale > 0.0)) bad("spec.R.exp_decay.scale", "must be positive");
    try {
      R = exp_decay_weights(plant.n(), T, scale, rate);
    } catch (const Error& e) {
      bad("spec.R.exp_decay", e.what());
    }
  } else {
    if (!ex->is_array() || ex->size() != T + 1) {
      bad("spec.R.explicit", "expected an array of T+1 = " + std::to_string(T + 1) + " matrices");
    }
    for (std::size_t k = 0; k <= T; ++k) {
      const std::string path = "spec.R.explicit[" + std::to_string(k) + "]";
      Mat rk = get_mat_or_scalar((*ex)[k], path);
      try {
        R.push_back(SymMat(rk));
      } catch (const Error& e) {
        bad(path, e.what());
      }
    }
  }
  try {
    return FtSpec(eps1, eps2, T, std::move(R));
  } catch (const Error& e) {
    bad("spec", e.what());
  }
}

UncConfig parse_uncertainty(const json* j, std::size_t q, std::size_t p, std::size_t T) {
  UncConfig unc;
  unc.constant_F = Mat(q, p);
  if (j == nullptr) return unc;
  expect_object(*j, "uncertainty");
  expect_keys(*j, "uncertainty", {"constant_F", "sequence", "grid"});
  const int given = (find(*j, "constant_F") != nullptr) + (find(*j, "sequence") != nullptr) +
                    (find(*j, "grid") != nullptr);
  if (given != 1) bad("uncertainty", "exactly one of constant_F, sequence, grid required");

  if (const json* v = find(*j, "constant_F")) {
    unc.kind = UncKind::constant;
    unc.constant_F = get_mat_or_scalar(*v, "uncertainty.constant_F");
    if (unc.constant_F.rows() != q || unc.constant_F.cols() != p) {
      bad("uncertainty.constant_F", "must be " + std::to_string(q) + "x" + std::to_string(p) +
                                        " to match the channel (M columns x N rows)");
    }
    check_f_norm(unc.constant_F, "uncertainty.constant_F");
  } else if (const json* s = find(*j, "sequence")) {
    unc.kind = UncKind::sequence;
    if (!s->is_array() || s->size() != T) {
      bad("uncertainty.sequence", "expected an array of T = " + std::to_string(T) + " matrices");
    }
    for (std::size_t k = 0; k < T; ++k) {
      const std::string path = "uncertainty.sequence[" + std::to_string(k) + "]";
      Mat f = get_mat_or_scalar((*s)[k], path);
      if (f.rows() != q || f.cols() != p) {
        bad(path, "must be " + std::to_string(q) + "x" + std::to_string(p));
      }
      check_f_norm(f, path);
      unc.sequence.push_back(std::move(f));
    }
  } else {
    const json& g = *find(*j, "grid");
    unc.kind = UncKind::grid;
    expect_object(g, "uncertainty.grid");
    expect_keys(g, "uncertainty.grid", {"lo", "hi", "step"});
    unc.lo = get_real(require(g, "uncertainty.grid", "lo"), "uncertainty.grid.lo");
    unc.hi = get_real(require(g, "uncertainty.grid", "hi"), "uncertainty.grid.hi");
    unc.step = get_real(require(g, "uncertainty.grid", "step"), "uncertainty.grid.step");
    if (!(unc.step > 0.0)) bad("uncertainty.grid.step", "must be positive");
    if (unc.lo > unc.hi) bad("uncertainty.grid", "lo <= hi required");
    if (std::max(std::abs(unc.lo), std::abs(unc.hi)) > 1.0 + 1e-12) {
      bad("uncertainty.grid", "endpoints must lie in [-1, 1] (||F|| <= 1)");
    }
  }
  return unc;
}

McConfig parse_mc(const json* j, std::size_t n) {
  McConfig mc;
  if (j == nullptr) return mc;
  expect_object(*j, "mc");
  expect_keys(*j, "mc", {"runs", "seed", "noise", "x0"});
  if (const json* v = find(*j, "runs")) {
    mc.runs = static_cast<std::size_t>(get_u64(*v, "mc.runs"));
    if (mc.runs == 0) bad("mc.runs", "must be at least 1");
  }
  if (const json* v = find(*j, "seed")) mc.seed = get_u64(*v, "mc.seed");
  if (const json* v = find(*j, "noise")) {
    if (!v->is_string()) bad("mc.noise", "expected \"gaussian\" or \"rademacher\"");
    const std::string s = v->get<std::string>();
    if (s == "gaussian") {
      mc.noise = NoiseKind::gaussian;
    } else if (s == "rademacher") {
      mc.noise = NoiseKind::rademacher;
    } else {
      bad("mc.noise", "expected \"gaussian\" or \"rademacher\", got \"" + s + "\"");
    }
  }
  if (const json* v = find(*j, "x0")) {
    if (!v->is_array() || v->size() != n) {
      bad("mc.x0", "expected an array of n = " + std::to_string(n) + " reals");
    }
    std::vector<double> x0(n);
    for (std::size_t i = 0; i < n; ++i) {
      x0[i] = get_real((*v)[i], "mc.x0[" + std::to_string(i) + "]");
    }
    mc.x0 = std::move(x0);
  }
  return mc;
}

LmiConfig parse_lmi(const json* j) {
  LmiConfig lmi;
  if (j == nullptr) return lmi;
  expect_object(*j, "lmi");
  expect_keys(*j, "lmi", {"gamma", "gamma_grid", "max_iters", "tol"});
  if (const json* v = find(*j, "gamma")) {
    const double g = get_real(*v, "lmi.gamma");
    if (!(g > 0.0)) bad("lmi.gamma", "must be positive");
    lmi.gamma = g;
  }
  if (const json* v = find(*j, "gamma_grid")) {
    if (!v->is_array() || v->empty()) bad("lmi.gamma_grid", "expected a nonempty array of reals");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const double g = get_real((*v)[i], "lmi.gamma_grid[" + std::to_string(i) + "]");
      if (!(g > 0.0)) bad("lmi.gamma_grid[" + std::to_string(i) + "]", "must be positive");
      lmi.gamma_grid.push_back(g);
    }
  }
  if (const json* v = find(*j, "max_iters")) {
    lmi.max_iters = static_cast<std::size_t>(get_u64(*v, "lmi.max_iters"));
    if (lmi.max_iters == 0) bad("lmi.max_iters", "must be at least 1");
  }
  if (const json* v = find(*j, "tol")) {
    lmi.tol = get_real(*v, "lmi.tol");
    if (!(lmi.tol > 0.0)) bad("lmi.tol", "must be positive");
  }
  return lmi;
}

}  // namespace

std::vector<double> UncConfig::grid_values() const {
  std::vector<double> vals;
  const double span = hi - lo;
  const std::size_t count = static_cast<std::size_t>(std::floor(span / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) vals.push_back(lo + static_cast<double>(i) * step);
  return vals;
}

Config parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_io(std::string("config: JSON parse error: ") + e.what());
  }
  expect_object(root, "(root)");
  expect_keys(root, "(root)", {"plant", "controller", "spec", "uncertainty", "mc", "lmi"});

  PlantParams plant = parse_plant(require(root, "(root)", "plant"));
  GainPackage controller = parse_controller(find(root, "controller"), plant);
  FtSpec spec = parse_spec(require(root, "(root)", "spec"), plant);
  UncConfig unc = parse_uncertainty(find(root, "uncertainty"), controller.q(), controller.p(),
                                    spec.T);
  McConfig mc = parse_mc(find(root, "mc"), plant.n());
  LmiConfig lmi = parse_lmi(find(root, "lmi"));

  return Config{std::move(plant), std::move(controller), std::move(spec), std::move(unc),
                std::move(mc), std::move(lmi)};
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<NamedRealization> realizations_from(const UncConfig& unc, std::size_t q,
                                                std::size_t p, std::size_t T) {
  std::vector<NamedRealization> out;
  switch (unc.kind) {
    case UncKind::constant:
      out.push_back({"constant", UncRealization::constant(unc.constant_F, T)});
      break;
    case UncKind::sequence:
      out.push_back({"sequence", UncRealization(unc.sequence)});
      break;
    case UncKind::grid: {
      // Unit-norm template: ones on the leading diagonal of the q x p slot.
      Mat unit(q, p);
      for (std::size_t i = 0; i < std::min(q, p); ++i) unit(i, i) = 1.0;
      for (const double f : unc.grid_values()) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "f=%g", f);
        out.push_back({tag, UncRealization::constant(f * unit, T)});
      }
      break;
    }
  }
  return out;
}

}  // namespace ftstab
