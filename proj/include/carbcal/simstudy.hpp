#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "carbcal/calibrate.hpp"
#include "carbcal/dpmm.hpp"

namespace carbcal {

enum class Family { single_normal, three_normal, uniform };

std::string_view to_string(Family family);
// Throws std::invalid_argument listing the valid families.
Family parse_family(std::string_view name);

struct FamilyBounds {
  double lo;
  double hi;
};

// single_normal: [100, 49500]; three_normal and uniform: [100, 15000].
FamilyBounds family_bounds(Family family);

inline constexpr double kSimulationSigma = 25.0;

struct Scenario {
  Family family;
  std::vector<double> true_theta;
  std::vector<Determination> dets;
  nlohmann::json truth;  // parameters drawn for this run
  std::size_t attempts = 1;  // draws until the whole sample fell inside the bounds
};

// X_i ~ N(m(theta_i), sigma^2 + rho(theta_i)^2), reported with sd sigma.
std::vector<Determination> simulate_determinations(std::span<const double> theta,
                                                   const CalibrationCurve& curve, double sigma,
                                                   Rng& rng);

// Draws a family instance and n calendar ages, rejecting and redrawing the
// whole sample (family parameters included) until every age is in bounds.
Scenario gen_scenario(Family family, std::size_t n, const CalibrationCurve& curve, Rng& rng);

enum class LossKind { l1, l2 };

// Monte-Carlo posterior expected loss E|d - truth| or E(d - truth)^2.
double posterior_loss(std::span<const double> draws, double truth, LossKind kind);

// Same expectation by quadrature over a normalized grid.
double grid_loss(const DensityGrid& grid, double truth, LossKind kind);

// Draws from a grid density: cell by inverse CDF, then uniform within the cell.
std::vector<double> sample_from_grid(const DensityGrid& grid, std::size_t count, Rng& rng);

// 100 (1 - loss_np / loss_indep). Throws if loss_indep is not positive.
double improvement(double loss_np, double loss_indep);

// Standard deviation of m(theta) over [lo, hi] on a 1 cal yr grid.
double curve_mean_sd(const CalibrationCurve& curve, double lo, double hi);

struct StudyConfig {
  std::vector<Family> families{Family::single_normal};
  std::vector<std::size_t> n_values{50};
  int n_runs = 10;
  int n_iter = 10000;
  int n_burn = 5000;
  int thin = 5;
  std::vector<SamplerKind> samplers{SamplerKind::polya, SamplerKind::walker};
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct SamplerLoss {
  SamplerKind sampler;
  double l1;
  double l2;
  double alpha_acceptance;
};

struct RunRecord {
  Family family;
  std::size_t n;
  int run;
  std::uint64_t seed;
  nlohmann::json truth;
  double indep_l1;
  double indep_l2;
  std::vector<SamplerLoss> dpmm;
  double curve_sd;  // sd of m over the span of the true ages
  bool flat_curve;  // curve_sd < 2 sigma_obs
};

struct SummaryRow {
  Family family;
  std::size_t n;
  SamplerKind sampler;
  LossKind loss;
  int runs;
  double prop_improved;
  double mean;
  double max;
  double min;
};

struct StudyResults {
  StudyConfig config;
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
};

// Per-run seed is config.seed XOR the global run index, so results do not
// depend on `jobs`.
RunRecord run_single(Family family, std::size_t n, int run, std::uint64_t seed,
                     const StudyConfig& cfg, const CalibrationCurve& curve);
StudyResults run_study(const StudyConfig& cfg, const CalibrationCurve& curve);
std::vector<SummaryRow> summarise(std::span<const RunRecord> runs, const StudyConfig& cfg);

// One row per (family, n) with Prop. imp / Mean / Max / Min for l1 and l2
// of every sampler.
void write_study_table(std::ostream& out, const StudyResults& results);
nlohmann::json to_json(const StudyResults& results);

}  // namespace carbcal
