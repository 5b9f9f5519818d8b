#include "carbcal/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "carbcal/error.hpp"
#include "text_util.hpp"

namespace carbcal {

MixtureWeights mixture_weights(const StoredState& s) {
  MixtureWeights out;
  if (!s.weights.empty()) {
    out.cluster = s.weights;
    out.fresh = s.remainder;
  } else {
    const double n = static_cast<double>(s.labels.size());
    const double denom = n + s.alpha;
    out.cluster.reserve(s.counts.size());
    for (auto c : s.counts) out.cluster.push_back(static_cast<double>(c) / denom);
    out.fresh = s.alpha / denom;
  }
  double total = out.fresh;
  for (double w : out.cluster) total += w;
  check_invariant(std::abs(total - 1.0) < 1e-9, "predictive mixture weights do not sum to 1");
  return out;
}

std::vector<double> predictive_realisation(const StoredState& s, const Hyperparameters& hyper,
                                           std::span<const double> grid) {
  const auto w = mixture_weights(s);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t j = 0; j < w.cluster.size(); ++j) {
    if (w.cluster[j] <= 0.0) continue;
    const double var = 1.0 / s.tau[j];
    for (std::size_t g = 0; g < grid.size(); ++g)
      out[g] += w.cluster[j] * dist::normal_pdf(grid[g], s.phi[j], var);
  }
  if (w.fresh > 0.0) {
    for (std::size_t g = 0; g < grid.size(); ++g)
      out[g] += w.fresh * base_marginal(grid[g], s.mu_phi, hyper);
  }
  return out;
}

namespace {

double realisation_at(const StoredState& s, const MixtureWeights& w, const Hyperparameters& hyper,
                      double theta) {
  double value = 0.0;
  for (std::size_t j = 0; j < w.cluster.size(); ++j)
    if (w.cluster[j] > 0.0) value += w.cluster[j] * dist::normal_pdf(theta, s.phi[j], 1.0 / s.tau[j]);
  if (w.fresh > 0.0) value += w.fresh * base_marginal(theta, s.mu_phi, hyper);
  return value;
}

}  // namespace

PredictiveDensity predictive_density(std::span<const StoredState> samples,
                                     const Hyperparameters& hyper, std::span<const double> grid,
                                     double resolution, const PredictiveOptions& options) {
  if (samples.empty()) throw std::invalid_argument("predictive density needs stored samples");
  const std::size_t n_s = samples.size();
  const std::size_t n_g = grid.size();

  std::vector<MixtureWeights> weights;
  weights.reserve(n_s);
  for (const auto& s : samples) weights.push_back(mixture_weights(s));

  PredictiveDensity out;
  out.theta.assign(grid.begin(), grid.end());
  out.resolution = resolution;
  out.lower_prob = options.lower_prob;
  out.upper_prob = options.upper_prob;
  out.mean.resize(n_g);
  out.lower.resize(n_g);
  out.upper.resize(n_g);
  if (options.keep_realisations) out.realisations.resize(n_s * n_g);

  // Grid-major so only one column of realisations is alive at a time.
  std::vector<double> column(n_s);
  for (std::size_t g = 0; g < n_g; ++g) {
    double sum = 0.0;
    for (std::size_t s = 0; s < n_s; ++s) {
      column[s] = realisation_at(samples[s], weights[s], hyper, grid[g]);
      sum += column[s];
      if (options.keep_realisations) out.realisations[s * n_g + g] = column[s];
    }
    out.mean[g] = sum / static_cast<double>(n_s);
    out.lower[g] = quantile(column, options.lower_prob);
    out.upper[g] = quantile(column, options.upper_prob);
  }
  return out;
}

std::map<std::size_t, double> cluster_count_posterior(std::span<const StoredState> samples) {
  if (samples.empty()) throw std::invalid_argument("cluster count posterior needs samples");
  std::map<std::size_t, double> hist;
  for (const auto& s : samples) hist[s.occupied()] += 1.0;
  for (auto& [k, p] : hist) p /= static_cast<double>(samples.size());
  return hist;
}

DensityGrid default_predictive_grid(std::span<const Determination> dets,
                                    const CalibrationCurve& curve) {
  const auto map = map_estimates(dets, curve, DefaultsOptions{}.coarse_resolution);
  const auto [mn, mx] = std::ranges::minmax(map);
  const double mad = map.size() > 1 ? spread_mad(map, MadMode::median) : 0.0;
  // A single-cluster dataset can have mad 0; keep a few hundred years either side.
  const double pad = std::max(4.0 * mad, 500.0);
  const double lo = std::max(curve.min_age(), mn - pad);
  const double hi = std::min(curve.max_age(), mx + pad);
  DensityGrid grid;
  grid.resolution = default_resolution(hi - lo);
  grid.theta = uniform_grid(lo, hi, grid.resolution);
  grid.density.assign(grid.theta.size(), 0.0);
  return grid;
}

DensityGrid draws_to_grid(std::span<const double> draws, double resolution) {
  if (draws.empty()) throw std::invalid_argument("no draws to summarise");
  const auto [mn, mx] = std::ranges::minmax(draws);
  const double lo = std::round(mn / resolution) * resolution;
  const double hi = std::round(mx / resolution) * resolution;
  DensityGrid grid;
  grid.resolution = resolution;
  grid.theta = uniform_grid(lo, hi, resolution);
  grid.density.assign(grid.theta.size(), 0.0);
  const double unit = 1.0 / (static_cast<double>(draws.size()) * resolution);
  for (double d : draws) {
    const auto k = static_cast<std::size_t>(std::llround((d - lo) / resolution));
    grid.density[std::min(k, grid.density.size() - 1)] += unit;
  }
  return grid;
}

double total_variation(std::span<const double> f, std::span<const double> g, double resolution) {
  if (f.size() != g.size()) throw std::invalid_argument("total variation needs equal grids");
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) sum += std::abs(f[k] - g[k]);
  return 0.5 * sum * resolution;
}

void write_predictive(std::ostream& out, const PredictiveDensity& pred) {
  out << "cal_age,mean,lo,hi\n";
  for (std::size_t g = 0; g < pred.theta.size(); ++g)
    out << format_number(pred.theta[g]) << ',' << format_number(pred.mean[g]) << ','
        << format_number(pred.lower[g]) << ',' << format_number(pred.upper[g]) << '\n';
}

void write_cluster_histogram(std::ostream& out, const std::map<std::size_t, double>& hist) {
  out << "k,probability\n";
  for (const auto& [k, p] : hist) out << k << ',' << format_number(p) << '\n';
}

}  // namespace carbcal
