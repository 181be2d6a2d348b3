#include "mob/odds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mob/errors.hpp"

namespace mob::odds {

namespace {
constexpr double kLogDensityFloor = -69.07755278982137;  // ln(1e-30)
constexpr double kPriorFloor = 1e-12;
}  // namespace

void OddsBuffer::push(const OddsEntry& e) {
  entries.push_back(e);
  while (static_cast<int>(entries.size()) > capacity) entries.pop_front();
}

void OddsBuffer::evict_stale(long now) {
  while (!entries.empty() && now - entries.front().step > stale_age)
    entries.pop_front();
}

double uncertainty_score(const basis::EnsembleBasis& b, double x) {
  std::vector<double> mu, sigma;
  b.heads(x, mu, sigma);
  int m = b.ensemble_size();
  double mean_mu = 0.0, mean_sq = 0.0, mean_var = 0.0;
  for (int j = 0; j < m; ++j) {
    mean_mu += mu[j];
    mean_sq += sigma[j] * sigma[j] + mu[j] * mu[j];
    mean_var += sigma[j] * sigma[j];
  }
  mean_mu /= m;
  mean_sq /= m;
  mean_var /= m;
  double score = (mean_sq - mean_mu * mean_mu) / mean_var;
  return std::max(1.0, score);
}

double prior_in_distribution(double score, double eta) {
  if (eta <= 0.0) throw ContractError("prior_in_distribution: eta must be > 0");
  score = std::max(1.0, score);
  return std::exp((1.0 - score) / eta);
}

OddsVerdict odds_from_stats(double ll_in, double ll_out, double score_min,
                            const OddsConfig& cfg) {
  OddsVerdict v;
  v.score_min = std::max(1.0, score_min);
  v.ll_in = std::max(ll_in, kLogDensityFloor);
  v.ll_out = std::max(ll_out, kLogDensityFloor);
  v.p_in = std::clamp(prior_in_distribution(v.score_min, cfg.eta), kPriorFloor,
                      1.0);
  double p_out = 1.0 - v.p_in;
  if (p_out <= 0.0) {
    v.s_odds = 0.0;  // perfect ensemble agreement: never out-of-distribution
  } else {
    double log_s =
        (v.ll_out + std::log(p_out)) - (v.ll_in + std::log(v.p_in));
    v.s_odds = std::exp(std::clamp(log_s, -700.0, 700.0));
  }
  v.is_ood = v.s_odds > cfg.decision_threshold;
  return v;
}

OddsVerdict odds_score(std::span<const basis::EnsembleBasis> bases,
                       const basis::EnsembleBasis& candidate, double x,
                       double y, const OddsConfig& cfg) {
  if (bases.empty()) throw ContractError("odds_score: need >= 1 basis");
  double ll_in = -std::numeric_limits<double>::infinity();
  double score_min = std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  scores.reserve(bases.size());
  for (const auto& b : bases) {
    ll_in = std::max(ll_in, basis_log_likelihood(b, x, y));
    double s = uncertainty_score(b, x);
    scores.push_back(s);
    score_min = std::min(score_min, s);
  }
  double ll_out = basis_log_likelihood(candidate, x, y);
  OddsVerdict v = odds_from_stats(ll_in, ll_out, score_min, cfg);
  v.scores = std::move(scores);
  return v;
}

basis::EnsembleBasis fit_candidate_basis(const basis::EnsemblePrior& prior,
                                         std::span<const double> xs,
                                         std::span<const double> ys,
                                         int steps, double lr) {
  if (xs.empty()) throw ContractError("fit_candidate_basis: empty window");
  basis::EnsembleBasis b;
  if (lr > 0.0 && lr != prior.inner_lr) {
    basis::EnsemblePrior fast = prior;
    fast.inner_lr = lr;
    b = basis::adapt_basis(fast, xs, ys, steps);
  } else {
    b = basis::adapt_basis(prior, xs, ys, steps);
  }
  b.origin = basis::BasisOrigin::kOddsCandidate;
  return b;
}

std::optional<basis::EnsembleBasis> buffer_step(
    OddsBuffer& buffer, const OddsVerdict& verdict, const OddsEntry& sample,
    const basis::EnsemblePrior& prior, const OddsConfig& cfg) {
  if (verdict.is_ood) buffer.push(sample);
  buffer.evict_stale(sample.step);
  if (buffer.size() > cfg.buffer_threshold) {
    std::vector<double> xs, ys;
    xs.reserve(buffer.entries.size());
    for (const auto& e : buffer.entries) {
      xs.push_back(e.x);
      ys.push_back(e.y);
    }
    basis::EnsembleBasis b =
        fit_candidate_basis(prior, xs, ys, cfg.candidate_steps,
                            cfg.candidate_lr);
    b.origin = basis::BasisOrigin::kOddsInstantiated;
    b.creation_step = sample.step;
    buffer.clear();
    return b;
  }
  return std::nullopt;
}

OddsDetector::StepResult OddsDetector::step(
    std::span<const basis::EnsembleBasis> bases,
    const basis::EnsemblePrior& prior, double x, double y, long step_index) {
  StepResult result;

  // Candidate window: buffer contents plus the most recent observations,
  // newest kept when over the cap. The current (x, y) is being judged and is
  // not part of the window.
  if (candidate_.ensemble_size() == 0 ||
      step_index - last_refit_ >= cfg_.refit_period) {
    std::vector<double> xs, ys;
    for (const auto& e : buffer_.entries) {
      xs.push_back(e.x);
      ys.push_back(e.y);
    }
    for (const auto& e : recent_) {
      xs.push_back(e.x);
      ys.push_back(e.y);
    }
    int cap = 2 * cfg_.buffer_threshold;
    if (static_cast<int>(xs.size()) > cap) {
      xs.erase(xs.begin(), xs.end() - cap);
      ys.erase(ys.begin(), ys.end() - cap);
    }
    if (!xs.empty()) {
      candidate_ = fit_candidate_basis(prior, xs, ys, cfg_.candidate_steps,
                                       cfg_.candidate_lr);
      last_refit_ = step_index;
    }
  }

  if (candidate_.ensemble_size() > 0) {
    result.verdict = odds_score(bases, candidate_, x, y, cfg_);
  } else {
    // No recent data yet: defer to in-distribution.
    result.verdict = OddsVerdict{};
    result.verdict.scores.assign(bases.size(), 1.0);
  }

  result.instantiated = buffer_step(buffer_, result.verdict,
                                    OddsEntry{x, y, step_index}, prior, cfg_);

  recent_.push_back(OddsEntry{x, y, step_index});
  while (static_cast<int>(recent_.size()) > cfg_.recent_window)
    recent_.pop_front();
  return result;
}

void OddsDetector::reset_stream() {
  recent_.clear();
  candidate_ = basis::EnsembleBasis{};
  last_refit_ = std::numeric_limits<long>::min();
}

}  // namespace mob::odds
