#include "carbcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "carbcal/error.hpp"
#include "carbcal/random.hpp"
#include "text_util.hpp"

namespace carbcal {

double DensityGrid::mass() const {
  double total = 0.0;
  for (double d : density) total += d;
  return total * resolution;
}

void validate(const Hyperparameters& h) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("hyperparameter ") + name + " must be positive");
  };
  positive(h.lambda, "lambda");
  positive(h.nu1, "nu1");
  positive(h.nu2, "nu2");
  positive(h.psi, "psi");
  positive(h.eta1, "eta1");
  positive(h.eta2, "eta2");
  positive(h.slice_width, "slice_width");
  positive(h.alpha_prop_sd, "alpha_prop_sd");
  if (!std::isfinite(h.xi)) throw std::invalid_argument("hyperparameter xi must be finite");
  if (h.slice_max_steps < 1) throw std::invalid_argument("slice_max_steps must be >= 1");
  if (h.n_init_clusters < 1) throw std::invalid_argument("n_init_clusters must be >= 1");
}

double log_likelihood(const Determination& det, const CalibrationCurve& curve, double theta) {
  const auto [m, rho] = curve.at(theta);
  return dist::normal_logpdf(det.c14_age, m, rho * rho + det.c14_sig * det.c14_sig);
}

double likelihood(const Determination& det, const CalibrationCurve& curve, double theta) {
  return std::exp(log_likelihood(det, curve, theta));
}

std::vector<double> uniform_grid(double lo, double hi, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  if (!(hi >= lo)) throw std::invalid_argument("grid upper bound below lower bound");
  // Tolerate round-off so that hi is included when (hi - lo) / res is integral.
  const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-9));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = lo + static_cast<double>(k) * resolution;
  return grid;
}

double default_resolution(double span) { return span <= 10000.0 ? 1.0 : 5.0; }

namespace {

std::pair<double, double> clip_range(const CalibrationCurve& curve,
                                     std::optional<std::pair<double, double>> range) {
  if (!range) return {curve.min_age(), curve.max_age()};
  const double lo = std::max(range->first, curve.min_age());
  const double hi = std::min(range->second, curve.max_age());
  if (!(hi > lo)) throw std::invalid_argument("calibration range does not overlap the curve");
  return {lo, hi};
}

void normalise_log(std::vector<double>& values, double resolution) {
  const double peak = *std::ranges::max_element(values);
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  const double scale = 1.0 / (total * resolution);
  for (double& v : values) v *= scale;
}

}  // namespace

DensityGrid calibrate_independent(const Determination& det, const CalibrationCurve& curve,
                                  double resolution,
                                  std::optional<std::pair<double, double>> range) {
  const auto [lo, hi] = clip_range(curve, range);
  DensityGrid grid;
  grid.resolution = resolution;
  grid.theta = uniform_grid(lo, hi, resolution);
  grid.density.resize(grid.theta.size());
  for (std::size_t k = 0; k < grid.theta.size(); ++k)
    grid.density[k] = log_likelihood(det, curve, grid.theta[k]);
  normalise_log(grid.density, resolution);
  return grid;
}

std::vector<HpdInterval> hpd_intervals(const DensityGrid& grid, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("HPD level must be in (0, 1)");
  if (std::abs(grid.mass() - 1.0) > 1e-6)
    throw std::invalid_argument("HPD requires a normalized density grid");

  std::vector<std::size_t> order(grid.density.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return grid.density[a] > grid.density[b];
  });

  std::vector<char> selected(grid.density.size(), 0);
  double mass = 0.0;
  for (std::size_t idx : order) {
    if (mass >= level) break;
    selected[idx] = 1;
    mass += grid.density[idx] * grid.resolution;
  }

  std::vector<HpdInterval> out;
  for (std::size_t k = 0; k < selected.size();) {
    if (!selected[k]) {
      ++k;
      continue;
    }
    HpdInterval iv{grid.theta[k], grid.theta[k], 0.0};
    while (k < selected.size() && selected[k]) {
      iv.hi = grid.theta[k];
      iv.mass += grid.density[k] * grid.resolution;
      ++k;
    }
    out.push_back(iv);
  }
  return out;
}

DensityGrid spd(std::span<const Determination> dets, const CalibrationCurve& curve,
                double resolution, std::optional<std::pair<double, double>> range) {
  if (dets.empty()) throw std::invalid_argument("SPD needs at least one determination");
  DensityGrid sum;
  for (const auto& det : dets) {
    auto one = calibrate_independent(det, curve, resolution, range);
    if (sum.theta.empty()) {
      sum = std::move(one);
      continue;
    }
    for (std::size_t k = 0; k < sum.density.size(); ++k) sum.density[k] += one.density[k];
  }
  const double inv_n = 1.0 / static_cast<double>(dets.size());
  for (double& d : sum.density) d *= inv_n;
  return sum;
}

std::vector<double> map_estimates(std::span<const Determination> dets,
                                  const CalibrationCurve& curve, double coarse_resolution) {
  const auto grid = uniform_grid(curve.min_age(), curve.max_age(), coarse_resolution);
  std::vector<CurvePoint> pts;
  pts.reserve(grid.size());
  for (double t : grid) pts.push_back(curve.at(t));

  std::vector<double> out;
  out.reserve(dets.size());
  for (const auto& det : dets) {
    double best = -std::numeric_limits<double>::infinity();
    double best_theta = grid.front();
    const double s2 = det.c14_sig * det.c14_sig;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double ll = dist::normal_logpdf(det.c14_age, pts[k].mean, pts[k].sd * pts[k].sd + s2);
      if (ll > best) {
        best = ll;
        best_theta = grid[k];
      }
    }
    out.push_back(best_theta);
  }
  return out;
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::ranges::sort(v);
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double spread_mad(std::span<const double> values, MadMode mode) {
  const double med = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - med));
  if (mode == MadMode::maximum) return *std::ranges::max_element(dev);
  return median(dev);
}

Hyperparameters default_hyperparameters_from_map(std::span<const double> theta_tilde,
                                                 MadMode mode) {
  if (theta_tilde.size() < 2)
    throw DataError("default hyperparameters need at least two determinations; supply hyperparameters manually");
  const auto [mn, mx] = std::ranges::minmax(theta_tilde);
  const double range = mx - mn;
  if (!(range > 0.0))
    throw DataError(
        "all preliminary calendar ages coincide (range 0); supply hyperparameters manually");
  const double mad = spread_mad(theta_tilde, mode);

  Hyperparameters h;
  h.nu1 = 0.25;
  h.nu2 = mad * mad * h.nu1 / 100.0;
  h.lambda = (100.0 / range) * (100.0 / range);
  h.xi = median(theta_tilde);
  h.psi = 1.0 / (range * range);
  h.eta1 = 1.0;
  h.eta2 = 1.0;
  const double iqr = quantile(theta_tilde, 0.75) - quantile(theta_tilde, 0.25);
  h.slice_width = std::max(50.0, 0.5 * iqr);
  h.slice_max_steps = 20;
  h.alpha_prop_sd = 1.0;
  h.n_init_clusters = 10;
  if (!(h.nu2 > 0.0))
    throw DataError("spread of preliminary calendar ages is 0; supply hyperparameters manually");
  return h;
}

Hyperparameters default_hyperparameters(std::span<const Determination> dets,
                                        const CalibrationCurve& curve,
                                        const DefaultsOptions& options) {
  const auto map = map_estimates(dets, curve, options.coarse_resolution);
  return default_hyperparameters_from_map(map, options.mad_mode);
}

std::vector<Determination> parse_determinations(std::istream& in, const std::string& source) {
  std::vector<Determination> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_csv(body);
    const auto where = source + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (fields.size() < 3 || fields[0] != "id" || fields[1] != "c14_age" || fields[2] != "c14_sig")
        throw DataError(where + ": expected header 'id,c14_age,c14_sig'");
      header_seen = true;
      continue;
    }
    if (fields.size() < 3) throw DataError(where + ": expected 3 columns");
    Determination det{std::string(fields[0]), parse_double(fields[1], where),
                      parse_double(fields[2], where)};
    if (!(det.c14_sig > 0.0)) throw DataError(where + ": c14_sig must be positive");
    out.push_back(std::move(det));
  }
  if (out.empty()) throw DataError(source + ": no determinations");
  return out;
}

std::vector<Determination> load_determinations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open determination file " + path.string());
  return parse_determinations(in, path.string());
}

void write_density_grid(std::ostream& out, const DensityGrid& grid) {
  out << "cal_age,density\n";
  for (std::size_t k = 0; k < grid.theta.size(); ++k)
    out << format_number(grid.theta[k]) << ',' << format_number(grid.density[k]) << '\n';
}

void write_hpd(std::ostream& out, std::span<const HpdInterval> intervals) {
  out << "lo,hi,mass\n";
  for (const auto& iv : intervals)
    out << format_number(iv.lo) << ',' << format_number(iv.hi) << ',' << format_number(iv.mass)
        << '\n';
}

}  // namespace carbcal
