#include "carbcal/dpmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "carbcal/error.hpp"
#include "carbcal/slice.hpp"

namespace carbcal {

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::polya ? "polya" : "walker";
}

SamplerKind parse_sampler(std::string_view name) {
  if (name == "polya") return SamplerKind::polya;
  if (name == "walker") return SamplerKind::walker;
  throw std::invalid_argument("unknown sampler '" + std::string(name) +
                              "'; valid samplers: polya, walker");
}

std::size_t DpmmState::occupied() const {
  return static_cast<std::size_t>(std::ranges::count_if(counts, [](auto c) { return c > 0; }));
}

void DpmmState::recount() {
  counts.assign(clusters.size(), 0);
  for (auto label : labels) ++counts.at(label);
}

std::size_t StoredState::occupied() const {
  return static_cast<std::size_t>(std::ranges::count_if(counts, [](auto c) { return c > 0; }));
}

void check_state(const DpmmState& s, const CalibrationCurve& curve, SamplerKind kind) {
  check_invariant(s.labels.size() == s.theta.size(), "labels and theta differ in length");
  check_invariant(s.counts.size() == s.clusters.size(), "counts out of sync with clusters");
  std::vector<std::size_t> recount(s.clusters.size(), 0);
  for (auto label : s.labels) {
    check_invariant(label < s.clusters.size(), "label points past the cluster table");
    ++recount[label];
  }
  check_invariant(recount == s.counts, "cached cluster counts disagree with labels");
  for (double t : s.theta) check_invariant(curve.contains(t), "theta outside curve support");
  for (const auto& c : s.clusters)
    check_invariant(c.tau > 0.0 && std::isfinite(c.tau) && std::isfinite(c.phi),
                    "cluster precision must be positive and finite");
  check_invariant(s.alpha > 0.0 && std::isfinite(s.alpha), "alpha must be positive");
  check_invariant(std::isfinite(s.mu_phi), "mu_phi must be finite");
  if (kind == SamplerKind::polya) {
    for (auto c : s.counts) check_invariant(c > 0, "Polya state holds an empty cluster");
  } else {
    check_invariant(s.weights.size() == s.clusters.size(), "weights out of sync with sticks");
    double total = s.remainder;
    for (double w : s.weights) {
      check_invariant(w >= 0.0 && w <= 1.0, "stick weight outside [0, 1]");
      total += w;
    }
    check_invariant(std::abs(total - 1.0) < 1e-9, "stick weights and remainder do not sum to 1");
  }
}

void validate(const ChainConfig& cfg) {
  if (cfg.n_iter < 1) throw std::invalid_argument("n_iter must be >= 1");
  if (cfg.n_burn < 0 || cfg.n_burn >= cfg.n_iter)
    throw std::invalid_argument("n_burn must satisfy 0 <= n_burn < n_iter");
  if (cfg.thin < 1) throw std::invalid_argument("thin must be >= 1");
  validate(cfg.hyper);
}

std::size_t stored_count(const ChainConfig& cfg) {
  return static_cast<std::size_t>((cfg.n_iter - cfg.n_burn) / cfg.thin);
}

NormalGamma prior_normal_gamma(double mu_phi, const Hyperparameters& h) {
  return {mu_phi, h.lambda, h.nu1, h.nu2};
}

NormalGamma posterior_normal_gamma(const NormalGamma& prior, std::span<const double> members) {
  if (members.empty()) return prior;
  const double n = static_cast<double>(members.size());
  const double mean = std::accumulate(members.begin(), members.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : members) ss += (x - mean) * (x - mean);
  const double lambda_n = prior.lambda + n;
  const double diff = mean - prior.mean;
  return {(prior.lambda * prior.mean + n * mean) / lambda_n, lambda_n, prior.shape + 0.5 * n,
          prior.rate + 0.5 * ss + prior.lambda * n * diff * diff / (2.0 * lambda_n)};
}

ClusterParams draw_normal_gamma(const NormalGamma& ng, Rng& rng) {
  double tau = 0.0;
  while (!(tau > 0.0)) tau = gamma_rate(rng, ng.shape, ng.rate);
  const double phi = normal(rng, ng.mean, 1.0 / std::sqrt(ng.lambda * tau));
  return {phi, tau};
}

double log_base_marginal(double theta, double mu_phi, const Hyperparameters& h) {
  const double scale = std::sqrt(h.nu2 * (h.lambda + 1.0) / (h.nu1 * h.lambda));
  return dist::t_logpdf(theta, 2.0 * h.nu1, mu_phi, scale);
}

double base_marginal(double theta, double mu_phi, const Hyperparameters& h) {
  return std::exp(log_base_marginal(theta, mu_phi, h));
}

double expected_clusters(double alpha, std::size_t n) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  double k = 0.0;
  for (std::size_t i = 1; i <= n; ++i) k += alpha / (alpha + static_cast<double>(i - 1));
  return k;
}

namespace {

// Categorical draw from unnormalised log weights.
std::size_t sample_log_weights(std::span<const double> logw, Rng& rng) {
  const double peak = *std::ranges::max_element(logw);
  thread_local std::vector<double> cum;
  cum.resize(logw.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    total += std::exp(logw[k] - peak);
    cum[k] = total;
  }
  const double u = uniform01(rng) * total;
  const auto it = std::ranges::upper_bound(cum, u);
  return std::min(static_cast<std::size_t>(it - cum.begin()), logw.size() - 1);
}

void redraw_weights(DpmmState& s, Rng& rng) {
  const std::size_t sticks = s.clusters.size();
  std::size_t tail = s.labels.size();
  s.weights.assign(sticks, 0.0);
  double rest = 1.0;
  for (std::size_t j = 0; j < sticks; ++j) {
    tail -= s.counts[j];
    const double v = beta(rng, 1.0 + static_cast<double>(s.counts[j]),
                          s.alpha + static_cast<double>(tail));
    s.weights[j] = v * rest;
    rest *= (1.0 - v);
  }
  s.remainder = rest;
}

}  // namespace

DpmmState init_state(std::span<const double> theta0, const Hyperparameters& hyper,
                     SamplerKind kind, Rng& rng) {
  validate(hyper);
  if (theta0.empty()) throw std::invalid_argument("init_state needs at least one determination");
  DpmmState s;
  s.theta.assign(theta0.begin(), theta0.end());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(hyper.n_init_clusters),
                                              theta0.size());
  s.labels.resize(theta0.size());
  for (std::size_t i = 0; i < theta0.size(); ++i) s.labels[i] = i % k;
  s.mu_phi = hyper.xi;
  const auto base = prior_normal_gamma(s.mu_phi, hyper);
  for (std::size_t j = 0; j < k; ++j) s.clusters.push_back(draw_normal_gamma(base, rng));
  s.recount();
  s.alpha = 0.0;
  while (!(s.alpha > 0.0)) s.alpha = gamma_rate(rng, hyper.eta1, hyper.eta2);
  if (kind == SamplerKind::walker) redraw_weights(s, rng);
  return s;
}

DpmmState init_state(std::span<const Determination> dets, const CalibrationCurve& curve,
                     const Hyperparameters& hyper, SamplerKind kind, Rng& rng) {
  const auto theta0 = map_estimates(dets, curve, DefaultsOptions{}.coarse_resolution);
  return init_state(theta0, hyper, kind, rng);
}

double update_theta(DpmmState& s, std::size_t i, const Determination& det,
                    const CalibrationCurve& curve, const Hyperparameters& hyper, Rng& rng) {
  const auto& c = s.clusters.at(s.labels.at(i));
  const double prior_var = 1.0 / c.tau;
  auto log_target = [&](double theta) {
    return log_likelihood(det, curve, theta) + dist::normal_logpdf(theta, c.phi, prior_var);
  };
  SliceConfig cfg{hyper.slice_width, hyper.slice_max_steps,
                  std::pair{curve.min_age(), curve.max_age()}};
  s.theta[i] = slice_sample(log_target, s.theta[i], cfg, rng);
  return s.theta[i];
}

void polya_reallocate(DpmmState& s, std::size_t i, const Hyperparameters& hyper, Rng& rng) {
  const std::size_t old = s.labels.at(i);
  if (--s.counts[old] == 0) {
    s.clusters.erase(s.clusters.begin() + static_cast<std::ptrdiff_t>(old));
    s.counts.erase(s.counts.begin() + static_cast<std::ptrdiff_t>(old));
    for (auto& label : s.labels)
      if (label > old) --label;
  }

  const double theta = s.theta[i];
  const std::size_t k = s.clusters.size();
  thread_local std::vector<double> logw;
  logw.resize(k + 1);
  for (std::size_t j = 0; j < k; ++j) {
    logw[j] = std::log(static_cast<double>(s.counts[j])) +
              dist::normal_logpdf(theta, s.clusters[j].phi, 1.0 / s.clusters[j].tau);
  }
  logw[k] = std::log(s.alpha) + log_base_marginal(theta, s.mu_phi, hyper);

  const std::size_t choice = sample_log_weights(logw, rng);
  if (choice == k) {
    const double one[] = {theta};
    const auto post = posterior_normal_gamma(prior_normal_gamma(s.mu_phi, hyper), one);
    s.clusters.push_back(draw_normal_gamma(post, rng));
    s.counts.push_back(0);
  }
  s.labels[i] = choice;
  ++s.counts[choice];
}

void walker_update_weights(DpmmState& s, const Hyperparameters& hyper, Rng& rng) {
  const std::size_t last = *std::ranges::max_element(s.labels);
  s.clusters.resize(last + 1);
  s.counts.resize(last + 1);
  redraw_weights(s, rng);

  s.slice_u.resize(s.labels.size());
  double min_u = 1.0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    // (0, w] rather than [0, w) so the extension loop below terminates.
    s.slice_u[i] = s.weights[s.labels[i]] * (1.0 - uniform01(rng));
    min_u = std::min(min_u, s.slice_u[i]);
  }

  const auto base = prior_normal_gamma(s.mu_phi, hyper);
  while (s.remainder >= min_u) {
    const double v = beta(rng, 1.0, s.alpha);
    s.weights.push_back(v * s.remainder);
    s.remainder *= (1.0 - v);
    s.clusters.push_back(draw_normal_gamma(base, rng));
    s.counts.push_back(0);
  }
}

void walker_reallocate(DpmmState& s, std::size_t i, Rng& rng) {
  const double theta = s.theta.at(i);
  const double u = s.slice_u.at(i);
  thread_local std::vector<double> logw;
  thread_local std::vector<std::size_t> candidates;
  logw.clear();
  candidates.clear();
  for (std::size_t j = 0; j < s.clusters.size(); ++j) {
    if (s.weights[j] > u) {
      candidates.push_back(j);
      logw.push_back(dist::normal_logpdf(theta, s.clusters[j].phi, 1.0 / s.clusters[j].tau));
    }
  }
  check_invariant(!candidates.empty(), "walker candidate set is empty");
  const std::size_t choice = candidates[sample_log_weights(logw, rng)];
  --s.counts[s.labels[i]];
  s.labels[i] = choice;
  ++s.counts[choice];
}

void update_cluster_params(DpmmState& s, const Hyperparameters& hyper, Rng& rng) {
  const auto prior = prior_normal_gamma(s.mu_phi, hyper);
  std::vector<std::vector<double>> members(s.clusters.size());
  for (std::size_t j = 0; j < s.clusters.size(); ++j) members[j].reserve(s.counts[j]);
  for (std::size_t i = 0; i < s.labels.size(); ++i) members[s.labels[i]].push_back(s.theta[i]);
  for (std::size_t j = 0; j < s.clusters.size(); ++j)
    s.clusters[j] = draw_normal_gamma(posterior_normal_gamma(prior, members[j]), rng);
}

double log_crp_likelihood(double alpha, std::size_t n_clusters, std::size_t n) {
  return static_cast<double>(n_clusters) * std::log(alpha) + std::lgamma(alpha) -
         std::lgamma(alpha + static_cast<double>(n));
}

double alpha_log_acceptance(double alpha, double proposed, std::size_t n_clusters, std::size_t n,
                            const Hyperparameters& h) {
  const double sd = h.alpha_prop_sd;
  return dist::gamma_logpdf(proposed, h.eta1, h.eta2) - dist::gamma_logpdf(alpha, h.eta1, h.eta2) +
         std::log(dist::std_normal_cdf(alpha / sd)) -
         std::log(dist::std_normal_cdf(proposed / sd)) +
         log_crp_likelihood(proposed, n_clusters, n) - log_crp_likelihood(alpha, n_clusters, n);
}

double alpha_mh_step(double alpha, std::size_t n_clusters, std::size_t n,
                     const Hyperparameters& hyper, Rng& rng, bool* accepted) {
  double proposed = -1.0;
  while (!(proposed > 0.0)) proposed = normal(rng, alpha, hyper.alpha_prop_sd);
  const double log_ratio = alpha_log_acceptance(alpha, proposed, n_clusters, n, hyper);
  const bool accept = log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
  if (accepted) *accepted = accept;
  return accept ? proposed : alpha;
}

bool update_alpha(DpmmState& s, const Hyperparameters& hyper, Rng& rng) {
  bool accepted = false;
  s.alpha = alpha_mh_step(s.alpha, s.occupied(), s.size(), hyper, rng, &accepted);
  return accepted;
}

void update_mu_phi(DpmmState& s, const Hyperparameters& h, Rng& rng) {
  double sum_tau = 0.0;
  double sum_tau_phi = 0.0;
  for (std::size_t j = 0; j < s.clusters.size(); ++j) {
    if (s.counts[j] == 0) continue;
    sum_tau += s.clusters[j].tau;
    sum_tau_phi += s.clusters[j].tau * s.clusters[j].phi;
  }
  const double precision = h.psi + h.lambda * sum_tau;
  const double mean = (h.xi * h.psi + h.lambda * sum_tau_phi) / precision;
  s.mu_phi = normal(rng, mean, 1.0 / std::sqrt(precision));
}

void refresh_empty_sticks(DpmmState& s, const Hyperparameters& hyper, Rng& rng) {
  const auto base = prior_normal_gamma(s.mu_phi, hyper);
  for (std::size_t j = 0; j < s.clusters.size(); ++j)
    if (s.counts[j] == 0) s.clusters[j] = draw_normal_gamma(base, rng);
}

bool sweep(DpmmState& s, std::span<const Determination> dets, const CalibrationCurve& curve,
           const Hyperparameters& hyper, SamplerKind kind, Rng& rng) {
  for (std::size_t i = 0; i < s.size(); ++i) update_theta(s, i, dets[i], curve, hyper, rng);

  if (kind == SamplerKind::polya) {
    for (std::size_t i = 0; i < s.size(); ++i) polya_reallocate(s, i, hyper, rng);
    update_cluster_params(s, hyper, rng);
  } else {
    walker_update_weights(s, hyper, rng);
    for (std::size_t i = 0; i < s.size(); ++i) walker_reallocate(s, i, rng);
    update_cluster_params(s, hyper, rng);
  }

  const bool accepted = update_alpha(s, hyper, rng);
  update_mu_phi(s, hyper, rng);
  // Empty sticks were integrated out of the mu_phi update; redraw them
  // given the new centring so the stored state is a joint draw.
  if (kind == SamplerKind::walker) refresh_empty_sticks(s, hyper, rng);
  return accepted;
}

StoredState snapshot(const DpmmState& s, SamplerKind kind, int iteration) {
  StoredState out;
  out.iteration = iteration;
  out.theta = s.theta;
  out.labels = s.labels;
  out.phi.reserve(s.clusters.size());
  out.tau.reserve(s.clusters.size());
  for (const auto& c : s.clusters) {
    out.phi.push_back(c.phi);
    out.tau.push_back(c.tau);
  }
  out.counts = s.counts;
  if (kind == SamplerKind::walker) {
    out.weights = s.weights;
    out.remainder = s.remainder;
  }
  out.alpha = s.alpha;
  out.mu_phi = s.mu_phi;
  return out;
}

PosteriorSamples run_chain(std::span<const Determination> dets, const CalibrationCurve& curve,
                           const ChainConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  auto state = init_state(dets, curve, cfg.hyper, cfg.sampler, rng);

  PosteriorSamples out;
  out.config = cfg;
  out.states.reserve(stored_count(cfg));
  std::size_t accepted = 0;
  for (int it = 1; it <= cfg.n_iter; ++it) {
    if (sweep(state, dets, curve, cfg.hyper, cfg.sampler, rng)) ++accepted;
    if (it > cfg.n_burn && (it - cfg.n_burn) % cfg.thin == 0) {
      check_state(state, curve, cfg.sampler);
      out.states.push_back(snapshot(state, cfg.sampler, it));
    }
  }
  out.alpha_acceptance = static_cast<double>(accepted) / static_cast<double>(cfg.n_iter);
  return out;
}

}  // namespace carbcal
