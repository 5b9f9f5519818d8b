#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "carbcal/calcurve.hpp"
#include "carbcal/calibrate.hpp"
#include "carbcal/random.hpp"

namespace carbcal {

// Two interchangeable DP updates: the Polya urn integrates the mixture
// weights out, the Walker slice sampler keeps explicit stick weights.
enum class SamplerKind { polya, walker };

std::string_view to_string(SamplerKind kind);
// Throws std::invalid_argument listing the valid names.
SamplerKind parse_sampler(std::string_view name);

struct ClusterParams {
  double phi;  // mean, cal yr BP
  double tau;  // precision, (cal yr)^-2
};

// Full Gibbs state for one chain.
//
// Polya: `clusters` holds occupied clusters only and labels are compact.
// Walker: `clusters[j]` is stick j; sticks past the last occupied one are
// represented-but-empty and carry base-measure parameters. `weights` and
// `remainder` always satisfy sum(weights) + remainder = 1 in the stick algebra.
struct DpmmState {
  std::vector<double> theta;
  std::vector<std::size_t> labels;
  std::vector<ClusterParams> clusters;
  std::vector<std::size_t> counts;  // members per cluster, kept in sync with labels
  std::vector<double> weights;      // walker only
  double remainder = 1.0;           // walker only
  std::vector<double> slice_u;      // walker auxiliaries u_i
  double alpha = 1.0;
  double mu_phi = 0.0;

  std::size_t size() const { return theta.size(); }
  std::size_t occupied() const;
  void recount();
};

// Throws InvariantError describing the first violation.
void check_state(const DpmmState& state, const CalibrationCurve& curve, SamplerKind kind);

struct ChainConfig {
  int n_iter = 50000;
  int n_burn = 25000;
  int thin = 5;
  SamplerKind sampler = SamplerKind::polya;
  std::uint64_t seed = 1;
  Hyperparameters hyper;
};

void validate(const ChainConfig& cfg);
// floor((n_iter - n_burn) / thin)
std::size_t stored_count(const ChainConfig& cfg);

// One thinned draw. For the Polya urn `weights` is empty and `counts`
// gives the occupancy; for Walker both are present.
struct StoredState {
  int iteration = 0;
  std::vector<double> theta;
  std::vector<std::size_t> labels;
  std::vector<double> phi;
  std::vector<double> tau;
  std::vector<double> weights;
  std::vector<std::size_t> counts;
  double remainder = 1.0;
  double alpha = 1.0;
  double mu_phi = 0.0;

  std::size_t occupied() const;
};

struct PosteriorSamples {
  ChainConfig config;
  std::vector<StoredState> states;
  double alpha_acceptance = 0.0;
};

// Normal-gamma parameters (mean, lambda, shape, rate).
struct NormalGamma {
  double mean;
  double lambda;
  double shape;
  double rate;
};

NormalGamma prior_normal_gamma(double mu_phi, const Hyperparameters& hyper);
// Conjugate update given cluster members.
NormalGamma posterior_normal_gamma(const NormalGamma& prior, std::span<const double> members);
ClusterParams draw_normal_gamma(const NormalGamma& ng, Rng& rng);

// Base-measure marginal of a single calendar age: Student-t with 2 nu1
// degrees of freedom, location mu_phi and scale sqrt(nu2 (lambda + 1) / (nu1 lambda)).
double base_marginal(double theta, double mu_phi, const Hyperparameters& hyper);
double log_base_marginal(double theta, double mu_phi, const Hyperparameters& hyper);

// sum_{i=1}^n alpha / (alpha + i - 1)
double expected_clusters(double alpha, std::size_t n);

// theta starts at the given calendar ages; labels round-robin over
// min(n_init_clusters, n) clusters with base draws given mu_phi = xi.
DpmmState init_state(std::span<const double> theta0, const Hyperparameters& hyper,
                     SamplerKind kind, Rng& rng);
// As above with theta0 from the coarse (5 cal yr) MAP ages.
DpmmState init_state(std::span<const Determination> dets, const CalibrationCurve& curve,
                     const Hyperparameters& hyper, SamplerKind kind, Rng& rng);

// Step 1: slice-sample theta_i from likelihood x N(phi_c, 1/tau_c) on the
// curve support. Returns the new value.
double update_theta(DpmmState& state, std::size_t i, const Determination& det,
                    const CalibrationCurve& curve, const Hyperparameters& hyper, Rng& rng);

// Step 2 (Polya urn), one allocation. Existing cluster j has weight
// n_{-i,j} N(theta_i; phi_j, 1/tau_j); a new cluster alpha * base_marginal.
// A new cluster's parameters come from the one-observation posterior.
void polya_reallocate(DpmmState& state, std::size_t i, const Hyperparameters& hyper, Rng& rng);

// Step 2 (Walker), first block: drop sticks past the last occupied one,
// resample v_j ~ Beta(1 + n_j, alpha + sum_{l>j} n_l), draw u_i ~ U(0, w_{c_i}]
// and extend with prior sticks until remainder < min_i u_i.
void walker_update_weights(DpmmState& state, const Hyperparameters& hyper, Rng& rng);

// Step 2 (Walker), one allocation among {j : w_j > u_i}, P ~ N(theta_i; phi_j, 1/tau_j).
void walker_reallocate(DpmmState& state, std::size_t i, Rng& rng);

// Normal-gamma posterior draw for every occupied cluster; represented empty
// sticks get prior draws.
void update_cluster_params(DpmmState& state, const Hyperparameters& hyper, Rng& rng);

// log of alpha^k Gamma(alpha) / Gamma(alpha + n), the alpha-dependent part
// of the CRP likelihood for k occupied clusters.
double log_crp_likelihood(double alpha, std::size_t n_clusters, std::size_t n);

// Log MH acceptance ratio for a truncated-normal proposal alpha -> proposed.
double alpha_log_acceptance(double alpha, double proposed, std::size_t n_clusters, std::size_t n,
                            const Hyperparameters& hyper);

// One MH step for alpha given (n_clusters, n). Returns the new value.
double alpha_mh_step(double alpha, std::size_t n_clusters, std::size_t n,
                     const Hyperparameters& hyper, Rng& rng, bool* accepted = nullptr);

// Step 3a on the state. Returns true if the proposal was accepted.
bool update_alpha(DpmmState& state, const Hyperparameters& hyper, Rng& rng);

// Step 3b: exact normal draw with precision psi + lambda sum tau_c.
void update_mu_phi(DpmmState& state, const Hyperparameters& hyper, Rng& rng);

// Walker: refresh base-measure parameters of represented empty sticks.
void refresh_empty_sticks(DpmmState& state, const Hyperparameters& hyper, Rng& rng);

// One full Gibbs sweep (steps 1, 2, 3a, 3b). Returns whether alpha moved.
bool sweep(DpmmState& state, std::span<const Determination> dets, const CalibrationCurve& curve,
           const Hyperparameters& hyper, SamplerKind kind, Rng& rng);

StoredState snapshot(const DpmmState& state, SamplerKind kind, int iteration);

// Deterministic in cfg.seed.
PosteriorSamples run_chain(std::span<const Determination> dets, const CalibrationCurve& curve,
                           const ChainConfig& cfg);

}  // namespace carbcal
