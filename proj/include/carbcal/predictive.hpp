#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "carbcal/calibrate.hpp"
#include "carbcal/dpmm.hpp"

namespace carbcal {

struct PredictiveDensity {
  std::vector<double> theta;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  double resolution = 1.0;
  double lower_prob = 0.025;
  double upper_prob = 0.975;
  // samples x grid, row-major; only filled when requested.
  std::vector<double> realisations;
};

struct PredictiveOptions {
  double lower_prob = 0.025;
  double upper_prob = 0.975;
  bool keep_realisations = false;
};

// Mixture weights of one stored state: per represented cluster plus the
// weight of a new cluster drawn from the base measure.
struct MixtureWeights {
  std::vector<double> cluster;
  double fresh = 0.0;
};

// Walker: (w_j, remainder). Polya: n_j / (n + alpha) and alpha / (n + alpha).
MixtureWeights mixture_weights(const StoredState& sample);

// sum_j p_j N(theta; phi_j, 1/tau_j) + p_new t(theta; mu_phi) on `grid`.
std::vector<double> predictive_realisation(const StoredState& sample, const Hyperparameters& hyper,
                                           std::span<const double> grid);

// Pointwise mean and quantiles over stored states. Throws on zero samples.
PredictiveDensity predictive_density(std::span<const StoredState> samples,
                                     const Hyperparameters& hyper, std::span<const double> grid,
                                     double resolution, const PredictiveOptions& options = {});

// k -> posterior probability of k occupied clusters.
std::map<std::size_t, double> cluster_count_posterior(std::span<const StoredState> samples);

// [min theta~ - 4 mad, max theta~ + 4 mad] clipped to the curve, at the
// fine default resolution for that span.
DensityGrid default_predictive_grid(std::span<const Determination> dets,
                                    const CalibrationCurve& curve);

// Histogram of MCMC draws as a normalized density; each draw goes to the
// nearest multiple of `resolution`.
DensityGrid draws_to_grid(std::span<const double> draws, double resolution);

// Total variation distance 0.5 * sum |f - g| * res on a shared grid.
double total_variation(std::span<const double> f, std::span<const double> g, double resolution);

void write_predictive(std::ostream& out, const PredictiveDensity& pred);
void write_cluster_histogram(std::ostream& out, const std::map<std::size_t, double>& hist);

}  // namespace carbcal
