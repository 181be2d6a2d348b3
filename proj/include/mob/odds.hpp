#ifndef MOB_ODDS_HPP
#define MOB_ODDS_HPP

#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mob/basis.hpp"

namespace mob::odds {

struct OddsConfig {
  double eta = 10.0;               // temperature of the in-distribution prior
  int buffer_threshold = 20;       // L: instantiate when |Q| > L
  double decision_threshold = 1.0; // OoD when S > threshold (strict)
  int capacity = 40;               // hard cap on |Q|, FIFO beyond it
  int stale_age = 100;             // entries older than this are evicted
  int refit_period = 5;            // candidate refit at most once per period
  int recent_window = 20;          // recent obs joined with Q for the candidate
  int candidate_steps = 15;        // -1: use the prior's inner step count
  double candidate_lr = 0.1;       // <= 0: use the prior's inner rate; the
                                   // candidate must reach unseen tasks in few
                                   // steps, which the meta inner rate cannot
};

struct OddsEntry {
  double x = 0.0, y = 0.0;
  long step = 0;
};

struct OddsBuffer {
  std::deque<OddsEntry> entries;
  int capacity = 40;
  int stale_age = 100;

  void push(const OddsEntry& e);
  void evict_stale(long now);
  int size() const { return static_cast<int>(entries.size()); }
  void clear() { entries.clear(); }
};

struct OddsVerdict {
  double s_odds = 0.0;
  std::vector<double> scores;  // per-basis uncertainty scores
  double score_min = 1.0;
  double p_in = 1.0;   // P(D=I|x)
  double ll_in = 0.0;  // log max_i b^(i)(y|x)
  double ll_out = 0.0; // log b^new(y|x)
  bool is_ood = false;
};

// Total ensemble variance normalized by the aleatoric part; 1 when all
// members agree, grows with member disagreement. Clamped at 1 from below.
double uncertainty_score(const basis::EnsembleBasis& b, double x);

// P(D=I|x) = exp((1 - score)/eta), in (0, 1].
double prior_in_distribution(double score, double eta);

// Assembles the likelihood-ratio score from precomputed statistics. Computed
// in log space; densities are clamped below at 1e-30 and the prior at 1e-12
// so the ratio stays finite while preserving ordering.
OddsVerdict odds_from_stats(double ll_in, double ll_out, double score_min,
                            const OddsConfig& cfg);

// Full scoring path: in-likelihood is the best basis likelihood, the
// out-likelihood comes from the candidate, the prior from the minimum
// uncertainty score over bases.
OddsVerdict odds_score(std::span<const basis::EnsembleBasis> bases,
                       const basis::EnsembleBasis& candidate, double x,
                       double y, const OddsConfig& cfg);

// Adapt a throwaway basis from the meta prior on a recent-data window.
basis::EnsembleBasis fit_candidate_basis(const basis::EnsemblePrior& prior,
                                         std::span<const double> xs,
                                         std::span<const double> ys,
                                         int steps = -1, double lr = -1.0);

// Algorithm-1 buffer update: push OoD samples, evict stale entries, and when
// |Q| > L adapt a new basis to Q's contents, clear Q and return the basis.
std::optional<basis::EnsembleBasis> buffer_step(
    OddsBuffer& buffer, const OddsVerdict& verdict, const OddsEntry& sample,
    const basis::EnsemblePrior& prior, const OddsConfig& cfg);

// Streaming detector: candidate cache + recent-observation window + buffer.
// One instance per model; the engine calls step() once per observation.
class OddsDetector {
 public:
  explicit OddsDetector(OddsConfig cfg = {}) : cfg_(cfg) {
    buffer_.capacity = cfg_.capacity;
    buffer_.stale_age = cfg_.stale_age;
  }

  struct StepResult {
    OddsVerdict verdict;
    std::optional<basis::EnsembleBasis> instantiated;
  };

  StepResult step(std::span<const basis::EnsembleBasis> bases,
                  const basis::EnsemblePrior& prior, double x, double y,
                  long step_index);

  // New stream: drop the recent window and candidate cache, keep the buffer.
  void reset_stream();

  const OddsConfig& config() const { return cfg_; }
  // The engine uses a sparser candidate cadence during offline epochs.
  void set_refit_period(int period) { cfg_.refit_period = period; }
  const OddsBuffer& buffer() const { return buffer_; }
  OddsBuffer& buffer() { return buffer_; }
  const std::deque<OddsEntry>& recent() const { return recent_; }
  std::deque<OddsEntry>& recent() { return recent_; }
  long last_refit() const { return last_refit_; }
  void set_last_refit(long v) { last_refit_ = v; }
  const basis::EnsembleBasis& candidate() const { return candidate_; }
  void set_candidate(basis::EnsembleBasis c, long refit_step) {
    candidate_ = std::move(c);
    last_refit_ = refit_step;
  }

 private:
  OddsConfig cfg_;
  OddsBuffer buffer_;
  std::deque<OddsEntry> recent_;
  basis::EnsembleBasis candidate_;
  long last_refit_ = std::numeric_limits<long>::min();
};

}  // namespace mob::odds

#endif
