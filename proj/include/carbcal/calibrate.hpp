#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carbcal/calcurve.hpp"

namespace carbcal {

// One radiocarbon measurement: age in 14C yr BP with lab sd.
struct Determination {
  std::string id;
  double c14_age;
  double c14_sig;
};

// Density on an ascending uniform calendar-age grid.
struct DensityGrid {
  std::vector<double> theta;
  std::vector<double> density;
  double resolution = 1.0;

  // Riemann sum of density * resolution.
  double mass() const;
};

struct HpdInterval {
  double lo;
  double hi;
  double mass;
};

enum class MadMode { median, maximum };

// Fixed model hyperparameters and sampler tuning constants.
//
// Cluster parameters follow NormalGamma(mu_phi, lambda, nu1, nu2):
// tau ~ Gamma(nu1, rate nu2), phi | tau ~ N(mu_phi, 1 / (lambda tau)).
// The centring has mu_phi ~ N(xi, 1 / psi) and the DP concentration
// alpha ~ Gamma(eta1, rate eta2).
struct Hyperparameters {
  double lambda = 1.0;
  double nu1 = 0.25;
  double nu2 = 1.0;
  double xi = 0.0;
  double psi = 1.0;
  double eta1 = 1.0;
  double eta2 = 1.0;
  double slice_width = 50.0;
  int slice_max_steps = 20;
  double alpha_prop_sd = 1.0;
  int n_init_clusters = 10;
};

// Throws std::invalid_argument naming the first offending field.
void validate(const Hyperparameters& hyper);

struct DefaultsOptions {
  double coarse_resolution = 5.0;
  MadMode mad_mode = MadMode::median;
};

// phi(x; m(theta), rho(theta)^2 + sigma^2). Throws std::out_of_range off-curve.
double likelihood(const Determination& det, const CalibrationCurve& curve, double theta);
double log_likelihood(const Determination& det, const CalibrationCurve& curve, double theta);

// lo, lo + res, lo + 2 res, ... up to hi (inclusive when it lands on the grid).
std::vector<double> uniform_grid(double lo, double hi, double resolution);

// 1 cal yr for spans up to 10000 yr, otherwise 5 cal yr.
double default_resolution(double span);

// Posterior under a uniform prior on calendar age. Covers the whole curve
// unless `range` restricts it (range is clipped to the curve support).
DensityGrid calibrate_independent(const Determination& det, const CalibrationCurve& curve,
                                  double resolution,
                                  std::optional<std::pair<double, double>> range = std::nullopt);

// Highest-density region as disjoint intervals. Cells are taken in
// descending density order until the enclosed mass reaches `level`.
std::vector<HpdInterval> hpd_intervals(const DensityGrid& grid, double level);

// Average of independent posteriors.
DensityGrid spd(std::span<const Determination> dets, const CalibrationCurve& curve,
                double resolution,
                std::optional<std::pair<double, double>> range = std::nullopt);

// Coarse-grid argmax of the likelihood per determination; ties go to the
// smallest calendar age.
std::vector<double> map_estimates(std::span<const Determination> dets,
                                  const CalibrationCurve& curve, double coarse_resolution);

double median(std::span<const double> values);
double quantile(std::span<const double> values, double p);  // linear interpolation
double spread_mad(std::span<const double> values, MadMode mode);

Hyperparameters default_hyperparameters_from_map(std::span<const double> theta_tilde,
                                                 MadMode mode = MadMode::median);
Hyperparameters default_hyperparameters(std::span<const Determination> dets,
                                        const CalibrationCurve& curve,
                                        const DefaultsOptions& options = {});

// `id,c14_age,c14_sig` with header. Throws DataError with line context.
std::vector<Determination> parse_determinations(std::istream& in,
                                                const std::string& source = "<stream>");
std::vector<Determination> load_determinations(const std::filesystem::path& path);

void write_density_grid(std::ostream& out, const DensityGrid& grid);
void write_hpd(std::ostream& out, std::span<const HpdInterval> intervals);

}  // namespace carbcal
