#include "carbcal/simstudy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

#include "carbcal/error.hpp"
#include "text_util.hpp"

namespace carbcal {

using nlohmann::json;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::single_normal: return "single_normal";
    case Family::three_normal: return "three_normal";
    case Family::uniform: return "uniform";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "single_normal") return Family::single_normal;
  if (name == "three_normal") return Family::three_normal;
  if (name == "uniform") return Family::uniform;
  throw std::invalid_argument("unknown family '" + std::string(name) +
                              "'; valid families: single_normal, three_normal, uniform");
}

FamilyBounds family_bounds(Family family) {
  if (family == Family::single_normal) return {100.0, 49500.0};
  return {100.0, 15000.0};
}

std::vector<Determination> simulate_determinations(std::span<const double> theta,
                                                   const CalibrationCurve& curve, double sigma,
                                                   Rng& rng) {
  std::vector<Determination> out;
  out.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto [m, rho] = curve.at(theta[i]);
    const double x = normal(rng, m, std::sqrt(sigma * sigma + rho * rho));
    out.push_back({"s" + std::to_string(i + 1), x, sigma});
  }
  return out;
}

namespace {

// Phase-centre sd is 10 / tau: the variance is written as 100 / tau^2.
struct NormalPhase {
  double phi;
  double tau;
};

NormalPhase draw_phase(Rng& rng, double centre) {
  double tau = 0.0;
  while (!(tau > 0.0)) tau = gamma_rate(rng, 1.0, 10000.0);
  return {normal(rng, centre, std::sqrt(100.0 / (tau * tau))), tau};
}

bool draw_ages(Family family, std::size_t n, FamilyBounds b, Rng& rng, std::vector<double>& theta,
               json& truth) {
  theta.clear();
  auto keep = [&](double t) {
    if (t < b.lo || t > b.hi) return false;
    theta.push_back(t);
    return true;
  };
  switch (family) {
    case Family::single_normal: {
      const auto p = draw_phase(rng, 10000.0);
      truth = json{{"phi", p.phi}, {"tau", p.tau}};
      const double sd = 1.0 / std::sqrt(p.tau);
      for (std::size_t i = 0; i < n; ++i)
        if (!keep(normal(rng, p.phi, sd))) return false;
      return true;
    }
    case Family::three_normal: {
      NormalPhase phases[3];
      double g[3];
      for (int j = 0; j < 3; ++j) phases[j] = draw_phase(rng, 3000.0);
      for (double& x : g) x = gamma_rate(rng, 1.0, 1.0);
      const double total = g[0] + g[1] + g[2];
      double w[3] = {g[0] / total, g[1] / total, g[2] / total};
      truth = json{{"phi", {phases[0].phi, phases[1].phi, phases[2].phi}},
                   {"tau", {phases[0].tau, phases[1].tau, phases[2].tau}},
                   {"w", {w[0], w[1], w[2]}}};
      for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform01(rng);
        const int j = u < w[0] ? 0 : (u < w[0] + w[1] ? 1 : 2);
        if (!keep(normal(rng, phases[j].phi, 1.0 / std::sqrt(phases[j].tau)))) return false;
      }
      return true;
    }
    case Family::uniform: {
      const double start = uniform(rng, 100.0, 14000.0);
      const double length = uniform(rng, 50.0, 1000.0);
      truth = json{{"S", start}, {"R", length}};
      for (std::size_t i = 0; i < n; ++i)
        if (!keep(uniform(rng, start, start + length))) return false;
      return true;
    }
  }
  return false;
}

}  // namespace

Scenario gen_scenario(Family family, std::size_t n, const CalibrationCurve& curve, Rng& rng) {
  if (n < 1) throw std::invalid_argument("scenario needs n >= 1");
  auto b = family_bounds(family);
  b.lo = std::max(b.lo, curve.min_age());
  b.hi = std::min(b.hi, curve.max_age());
  Scenario s{family, {}, {}, {}, 0};
  do {
    ++s.attempts;
  } while (!draw_ages(family, n, b, rng, s.true_theta, s.truth));
  s.dets = simulate_determinations(s.true_theta, curve, kSimulationSigma, rng);
  return s;
}

double posterior_loss(std::span<const double> draws, double truth, LossKind kind) {
  if (draws.empty()) throw std::invalid_argument("posterior loss needs at least one draw");
  double sum = 0.0;
  for (double d : draws) {
    const double e = d - truth;
    sum += kind == LossKind::l1 ? std::abs(e) : e * e;
  }
  return sum / static_cast<double>(draws.size());
}

double grid_loss(const DensityGrid& grid, double truth, LossKind kind) {
  double sum = 0.0;
  for (std::size_t k = 0; k < grid.theta.size(); ++k) {
    const double e = grid.theta[k] - truth;
    sum += (kind == LossKind::l1 ? std::abs(e) : e * e) * grid.density[k];
  }
  return sum * grid.resolution;
}

std::vector<double> sample_from_grid(const DensityGrid& grid, std::size_t count, Rng& rng) {
  std::vector<double> cdf(grid.density.size());
  std::partial_sum(grid.density.begin(), grid.density.end(), cdf.begin());
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = uniform01(rng) * cdf.back();
    const auto idx = std::min<std::size_t>(
        static_cast<std::size_t>(std::ranges::upper_bound(cdf, u) - cdf.begin()), cdf.size() - 1);
    out.push_back(grid.theta[idx] + grid.resolution * (uniform01(rng) - 0.5));
  }
  return out;
}

double improvement(double loss_np, double loss_indep) {
  if (!(loss_indep > 0.0))
    throw std::invalid_argument("improvement needs a positive independent loss");
  return 100.0 * (1.0 - loss_np / loss_indep);
}

double curve_mean_sd(const CalibrationCurve& curve, double lo, double hi) {
  const auto grid = uniform_grid(lo, hi, 1.0);
  double sum = 0.0;
  double sum2 = 0.0;
  for (double t : grid) {
    const double m = curve.at(t).mean;
    sum += m;
    sum2 += m * m;
  }
  const double n = static_cast<double>(grid.size());
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sum2 / n - mean * mean));
}

RunRecord run_single(Family family, std::size_t n, int run, std::uint64_t seed,
                     const StudyConfig& cfg, const CalibrationCurve& curve) {
  Rng rng(seed);
  const auto scenario = gen_scenario(family, n, curve, rng);

  RunRecord rec{family, n, run, seed, scenario.truth, 0.0, 0.0, {}, 0.0, false};

  const double res = default_resolution(curve.max_age() - curve.min_age());
  for (std::size_t i = 0; i < n; ++i) {
    const auto post = calibrate_independent(scenario.dets[i], curve, res);
    rec.indep_l1 += grid_loss(post, scenario.true_theta[i], LossKind::l1);
    rec.indep_l2 += grid_loss(post, scenario.true_theta[i], LossKind::l2);
  }
  rec.indep_l1 /= static_cast<double>(n);
  rec.indep_l2 /= static_cast<double>(n);

  const auto hyper = default_hyperparameters(scenario.dets, curve);
  for (auto sampler : cfg.samplers) {
    ChainConfig chain{cfg.n_iter, cfg.n_burn, cfg.thin, sampler, rng(), hyper};
    const auto samples = run_chain(scenario.dets, curve, chain);
    SamplerLoss loss{sampler, 0.0, 0.0, samples.alpha_acceptance};
    std::vector<double> draws(samples.states.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < draws.size(); ++s) draws[s] = samples.states[s].theta[i];
      loss.l1 += posterior_loss(draws, scenario.true_theta[i], LossKind::l1);
      loss.l2 += posterior_loss(draws, scenario.true_theta[i], LossKind::l2);
    }
    loss.l1 /= static_cast<double>(n);
    loss.l2 /= static_cast<double>(n);
    rec.dpmm.push_back(loss);
  }

  const auto [lo, hi] = std::ranges::minmax(scenario.true_theta);
  rec.curve_sd = curve_mean_sd(curve, std::floor(lo), std::max(std::ceil(hi), std::floor(lo) + 1.0));
  rec.flat_curve = rec.curve_sd < 2.0 * kSimulationSigma;
  return rec;
}

std::vector<SummaryRow> summarise(std::span<const RunRecord> runs, const StudyConfig& cfg) {
  std::vector<SummaryRow> out;
  for (auto family : cfg.families) {
    for (auto n : cfg.n_values) {
      for (std::size_t k = 0; k < cfg.samplers.size(); ++k) {
        for (auto kind : {LossKind::l1, LossKind::l2}) {
          std::vector<double> imp;
          for (const auto& r : runs) {
            if (r.family != family || r.n != n) continue;
            const auto& l = r.dpmm.at(k);
            imp.push_back(kind == LossKind::l1 ? improvement(l.l1, r.indep_l1)
                                               : improvement(l.l2, r.indep_l2));
          }
          if (imp.empty()) continue;
          const auto positive = std::ranges::count_if(imp, [](double v) { return v > 0.0; });
          const auto [mn, mx] = std::ranges::minmax(imp);
          out.push_back({family, n, cfg.samplers[k], kind, static_cast<int>(imp.size()),
                         static_cast<double>(positive) / static_cast<double>(imp.size()),
                         std::accumulate(imp.begin(), imp.end(), 0.0) /
                             static_cast<double>(imp.size()),
                         mx, mn});
        }
      }
    }
  }
  return out;
}

StudyResults run_study(const StudyConfig& cfg, const CalibrationCurve& curve) {
  if (cfg.n_runs < 1) throw std::invalid_argument("study needs at least one run");
  if (cfg.samplers.empty()) throw std::invalid_argument("study needs at least one sampler");
  struct Job {
    Family family;
    std::size_t n;
    int run;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::uint64_t index = 0;
  for (auto family : cfg.families)
    for (auto n : cfg.n_values)
      for (int r = 0; r < cfg.n_runs; ++r) jobs.push_back({family, n, r, cfg.seed ^ index++});

  StudyResults results;
  results.config = cfg;
  results.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const auto& j = jobs[k];
        results.runs[k] = run_single(j.family, j.n, j.run, j.seed, cfg, curve);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(cfg.jobs, 1, static_cast<int>(jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  results.summary = summarise(results.runs, cfg);
  return results;
}

void write_study_table(std::ostream& out, const StudyResults& results) {
  const auto& cfg = results.config;
  out << "family,n";
  for (auto sampler : cfg.samplers)
    for (const char* loss : {"l1", "l2"})
      for (const char* col : {"prop_imp", "mean", "max", "min"})
        out << ',' << to_string(sampler) << '_' << loss << '_' << col;
  out << '\n';
  for (auto family : cfg.families) {
    for (auto n : cfg.n_values) {
      out << to_string(family) << ',' << n;
      for (auto sampler : cfg.samplers) {
        for (auto kind : {LossKind::l1, LossKind::l2}) {
          const auto it = std::ranges::find_if(results.summary, [&](const SummaryRow& r) {
            return r.family == family && r.n == n && r.sampler == sampler && r.loss == kind;
          });
          check_invariant(it != results.summary.end(), "missing summary row");
          out << ',' << format_number(it->prop_improved) << ',' << format_number(it->mean) << ','
              << format_number(it->max) << ',' << format_number(it->min);
        }
      }
      out << '\n';
    }
  }
}

json to_json(const StudyResults& results) {
  const auto& cfg = results.config;
  json j;
  json families = json::array();
  for (auto f : cfg.families) families.push_back(std::string(to_string(f)));
  json samplers = json::array();
  for (auto s : cfg.samplers) samplers.push_back(std::string(to_string(s)));
  j["config"] = {{"families", families}, {"n_values", cfg.n_values}, {"runs", cfg.n_runs},
                 {"n_iter", cfg.n_iter},  {"n_burn", cfg.n_burn},     {"thin", cfg.thin},
                 {"samplers", samplers},  {"seed", cfg.seed}};
  j["runs"] = json::array();
  for (const auto& r : results.runs) {
    json rec{{"family", std::string(to_string(r.family))},
             {"n", r.n},
             {"run", r.run},
             {"seed", r.seed},
             {"truth", r.truth},
             {"indep_l1", r.indep_l1},
             {"indep_l2", r.indep_l2},
             {"curve_sd", r.curve_sd},
             {"flat_curve", r.flat_curve}};
    for (const auto& l : r.dpmm) {
      rec[std::string(to_string(l.sampler))] = {
          {"l1", l.l1},
          {"l2", l.l2},
          {"alpha_acceptance", l.alpha_acceptance},
          {"l1_improvement", improvement(l.l1, r.indep_l1)},
          {"l2_improvement", improvement(l.l2, r.indep_l2)}};
    }
    j["runs"].push_back(rec);
  }
  j["summary"] = json::array();
  for (const auto& s : results.summary) {
    j["summary"].push_back({{"family", std::string(to_string(s.family))},
                            {"n", s.n},
                            {"sampler", std::string(to_string(s.sampler))},
                            {"loss", s.loss == LossKind::l1 ? "l1" : "l2"},
                            {"runs", s.runs},
                            {"prop_improved", s.prop_improved},
                            {"mean", s.mean},
                            {"max", s.max},
                            {"min", s.min}});
  }
  return j;
}

}  // namespace carbcal
