#pragma once

// Monte Carlo simulation of the random walk on the free product.
//
// A state is a word x_1 ... x_k of non-root factor states with no two
// consecutive letters from the same factor, kept as a stack. Each step picks
// factor i with probability alpha_i and moves either the top block (if it
// belongs to factor i) or a fresh block pushed from the root of factor i.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"

namespace escape_rate {

// Factor state inside a block: finite factors use `a` as the state index,
// Z uses `a`, Z^2 uses (a, b).
struct BlockState {
  std::int64_t a = 0;
  std::int64_t b = 0;
  friend bool operator==(const BlockState&, const BlockState&) = default;
};

struct Block {
  std::uint32_t factor = 0;
  BlockState state;
  std::int64_t distance = 0;  // Markovian distance from the factor root
  friend bool operator==(const Block&, const Block&) = default;
};

class Word {
 public:
  std::size_t block_length() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }
  const Block& top() const { return blocks_.back(); }
  Block& top() { return blocks_.back(); }
  std::span<const Block> blocks() const noexcept { return blocks_; }
  void push(const Block& b) { blocks_.push_back(b); }
  void pop() { blocks_.pop_back(); }
  void clear() noexcept { blocks_.clear(); }

  std::int64_t markovian_length() const noexcept {
    std::int64_t s = 0;
    for (const auto& b : blocks_) s += b.distance;
    return s;
  }

  friend bool operator==(const Word&, const Word&) = default;

 private:
  std::vector<Block> blocks_;
};

enum class StepKind { Push, Replace, Pop };

// Pseudo-random source used by the simulator: MT19937-64 seeded from a
// SplitMix64 stream, so trial k of seed s is reproducible on its own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return eng_(); }
  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return splitmix64(seed ^ splitmix64(trial));
}

// Precomputed sampling tables for one model.
class Walker {
 public:
  explicit Walker(const ModelSpec& m) : model_(&m) {
    double acc = 0.0;
    for (double w : m.weights()) {
      acc += w;
      factor_cdf_.push_back(acc);
    }
    tables_.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto* f = m.factor(i).as_finite();
      if (!f) continue;
      auto& t = tables_[i];
      t.resize(f->size());
      for (std::size_t x = 0; x < f->size(); ++x) {
        double c = 0.0;
        for (std::size_t y = 0; y < f->size(); ++y) {
          if (f->p(x, y) > 0.0) {
            c += f->p(x, y);
            t[x].push_back({y, c});
          }
        }
      }
    }
  }

  const ModelSpec& model() const noexcept { return *model_; }

  std::size_t sample_factor(Rng& rng) const {
    return pick(factor_cdf_, rng.uniform());
  }

  BlockState root(std::size_t i) const {
    const auto* f = model_->factor(i).as_finite();
    return f ? BlockState{static_cast<std::int64_t>(f->root()), 0} : BlockState{};
  }

  BlockState sample_move(std::size_t i, const BlockState& from, Rng& rng) const {
    const auto& fac = model_->factor(i);
    if (fac.is_finite()) {
      const auto& row = tables_[i][static_cast<std::size_t>(from.a)];
      const double u = rng.uniform() * row.back().cumulative;
      auto it = std::upper_bound(row.begin(), row.end(), u,
                                 [](double v, const Entry& e) { return v < e.cumulative; });
      if (it == row.end()) --it;
      return {static_cast<std::int64_t>(it->state), 0};
    }
    BlockState to = from;
    if (fac.analytic().kind == LatticeKind::Z1) {
      to.a += rng.uniform() < 0.5 ? -1 : 1;
    } else {
      switch (static_cast<int>(rng.uniform() * 4.0)) {
        case 0: ++to.a; break;
        case 1: --to.a; break;
        case 2: ++to.b; break;
        default: --to.b; break;
      }
    }
    return to;
  }

  std::int64_t distance(std::size_t i, const BlockState& s) const {
    if (const auto* f = model_->factor(i).as_finite()) {
      return f->root_distances()[static_cast<std::size_t>(s.a)];
    }
    return std::abs(s.a) + std::abs(s.b);
  }

  // Moves factor i of the word to `to`; `to` must be reachable in one step.
  StepKind apply(Word& w, std::size_t i, const BlockState& to) const {
    const auto fid = static_cast<std::uint32_t>(i);
    if (!w.empty() && w.top().factor == fid) {
      if (to == root(i)) {
        w.pop();
        return StepKind::Pop;
      }
      w.top().state = to;
      w.top().distance = distance(i, to);
      return StepKind::Replace;
    }
    w.push(Block{fid, to, distance(i, to)});
    return StepKind::Push;
  }

  StepKind step(Word& w, Rng& rng) const {
    const auto i = sample_factor(rng);
    const bool on_top = !w.empty() && w.top().factor == i;
    const BlockState from = on_top ? w.top().state : root(i);
    return apply(w, i, sample_move(i, from, rng));
  }

 private:
  struct Entry {
    std::size_t state;
    double cumulative;
  };

  static std::size_t pick(const std::vector<double>& cdf, double u) {
    const double scaled = u * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), scaled);
    if (it == cdf.end()) --it;
    return static_cast<std::size_t>(it - cdf.begin());
  }

  const ModelSpec* model_;
  std::vector<double> factor_cdf_;
  std::vector<std::vector<std::vector<Entry>>> tables_;
};

// Checks the normal-form invariants of a word against a model.
inline bool word_is_valid(const Walker& walker, const Word& w) {
  const auto blocks = w.blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto i = blocks[k].factor;
    if (i >= walker.model().size()) return false;
    if (blocks[k].state == walker.root(i)) return false;
    if (k > 0 && blocks[k - 1].factor == i) return false;
    if (blocks[k].distance != walker.distance(i, blocks[k].state)) return false;
  }
  return true;
}

struct TrajectoryStats {
  long steps = 0;
  long block_length = 0;
  std::vector<long> partial_block_lengths;
  long markovian_length = 0;
  // Depth of the prefix fixed from the middle of the run to its end.
  long stabilized_prefix_depth = 0;
  // Factor shares among the blocks of that stabilized prefix.
  std::vector<double> type_frequencies;
  // Stabilized depth at each requested checkpoint.
  std::vector<long> profile;
  // Block lengths at steps/2, for increment-based estimators.
  long mid_block_length = 0;
  std::vector<long> mid_partial_block_lengths;
};

struct SimulationConfig {
  long steps = 20'000;
  long trials = 200;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int checkpoints = 20;
};

// One trajectory of `steps` steps from the empty word.
inline TrajectoryStats run_trial(const Walker& walker, long steps, Rng& rng,
                                 std::span<const long> checkpoints = {}) {
  const std::size_t r = walker.model().size();
  Word w;
  std::vector<int> touched(static_cast<std::size_t>(steps));
  std::vector<int> depth(static_cast<std::size_t>(steps) + 1, 0);
  const long mid = steps / 2;
  Word at_mid;
  for (long n = 0; n < steps; ++n) {
    if (n == mid) at_mid = w;
    const int d = static_cast<int>(w.block_length());
    const auto kind = walker.step(w, rng);
    touched[static_cast<std::size_t>(n)] = kind == StepKind::Push ? d + 1 : d;
    depth[static_cast<std::size_t>(n) + 1] = static_cast<int>(w.block_length());
  }
  if (mid == steps) at_mid = w;

  // stable[n] = min(depth at n, min over later steps of touched - 1).
  std::vector<int> stable(static_cast<std::size_t>(steps) + 1);
  int suffix = depth.back();
  stable.back() = suffix;
  for (long n = steps - 1; n >= 0; --n) {
    suffix = std::min(suffix, touched[static_cast<std::size_t>(n)] - 1);
    stable[static_cast<std::size_t>(n)] = std::min(depth[static_cast<std::size_t>(n)], suffix);
  }

  TrajectoryStats st;
  st.steps = steps;
  st.block_length = static_cast<long>(w.block_length());
  st.partial_block_lengths.assign(r, 0);
  for (const auto& b : w.blocks()) ++st.partial_block_lengths[b.factor];
  st.markovian_length = static_cast<long>(w.markovian_length());
  st.stabilized_prefix_depth = stable[static_cast<std::size_t>(mid)];
  st.type_frequencies.assign(r, 0.0);
  if (st.stabilized_prefix_depth > 0) {
    const auto blocks = at_mid.blocks();
    for (long k = 0; k < st.stabilized_prefix_depth; ++k) {
      st.type_frequencies[blocks[static_cast<std::size_t>(k)].factor] += 1.0;
    }
    for (auto& v : st.type_frequencies) v /= static_cast<double>(st.stabilized_prefix_depth);
  }
  for (long n : checkpoints) st.profile.push_back(stable[static_cast<std::size_t>(n)]);
  st.mid_block_length = static_cast<long>(at_mid.block_length());
  st.mid_partial_block_lengths.assign(r, 0);
  for (const auto& b : at_mid.blocks()) ++st.mid_partial_block_lengths[b.factor];
  return st;
}

namespace detail {

// Pairwise summation over a fixed order, independent of scheduling.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const auto h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

template <class Fn>
void parallel_for(long count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, std::max(1L, count)));
  if (threads <= 1) {
    for (long k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (long k = next++; k < count; k = next++) fn(k);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

inline MeanEstimate estimate_mean(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  MeanEstimate e;
  e.mean = detail::pairwise_sum(x) / n;
  std::vector<double> sq(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) sq[k] = (x[k] - e.mean) * (x[k] - e.mean);
  const double var = x.size() > 1 ? detail::pairwise_sum(sq) / (n - 1.0) : 0.0;
  e.std_error = std::sqrt(var / n);
  e.ci_low = e.mean - 1.959963984540054 * e.std_error;
  e.ci_high = e.mean + 1.959963984540054 * e.std_error;
  return e;
}

// sum(num) / sum(den) with a delta-method standard error.
inline MeanEstimate estimate_ratio(std::span<const double> num, std::span<const double> den) {
  const auto n = static_cast<double>(num.size());
  const double mean_num = detail::pairwise_sum(num) / n;
  const double mean_den = detail::pairwise_sum(den) / n;
  MeanEstimate e;
  e.mean = mean_num / mean_den;
  std::vector<double> lin(num.size());
  for (std::size_t k = 0; k < num.size(); ++k) {
    const double d = num[k] - e.mean * den[k];
    lin[k] = d * d;
  }
  const double var = num.size() > 1 ? detail::pairwise_sum(lin) / (n - 1.0) : 0.0;
  e.std_error = std::sqrt(var / n) / std::abs(mean_den);
  e.ci_low = e.mean - 1.959963984540054 * e.std_error;
  e.ci_high = e.mean + 1.959963984540054 * e.std_error;
  return e;
}

struct SimulationResult {
  SimulationConfig config;
  MeanEstimate drift;                      // ell(Z_n)/n
  std::vector<MeanEstimate> partial;       // ell_i(Z_n)/n
  // Share of factor i among the blocks gained over the second half of each
  // trajectory; the first blocks bias ell_i(Z_n)/ell(Z_n) by O(1/n).
  std::vector<MeanEstimate> partial_share;
  MeanEstimate markovian;                  // |Z_n|/n
  std::vector<MeanEstimate> type_frequency;
  std::vector<std::pair<long, double>> prefix_profile;
};

inline void validate(const SimulationConfig& c) {
  if (c.steps < 1000) throw UsageError("steps must be >= 1000");
  if (c.trials < 2) throw UsageError("trials must be >= 2");
  if (c.checkpoints < 1) throw UsageError("checkpoints must be >= 1");
}

// Runs all trials and aggregates every estimator. Results depend only on
// (seed, steps, trials, checkpoints), never on the thread count.
inline SimulationResult simulate(const ModelSpec& m, const SimulationConfig& cfg,
                                 bool check_parameters = true) {
  if (check_parameters) validate(cfg);
  const Walker walker(m);
  std::vector<long> marks;
  for (int c = 1; c <= cfg.checkpoints; ++c) marks.push_back(cfg.steps * c / cfg.checkpoints);

  std::vector<TrajectoryStats> stats(static_cast<std::size_t>(cfg.trials));
  detail::parallel_for(cfg.trials, cfg.threads, [&](long k) {
    Rng rng(trial_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    stats[static_cast<std::size_t>(k)] = run_trial(walker, cfg.steps, rng, marks);
  });

  const std::size_t r = m.size();
  const std::size_t t = stats.size();
  const auto steps = static_cast<double>(cfg.steps);
  SimulationResult out;
  out.config = cfg;

  std::vector<double> ell(t), lens(t), markov(t);
  for (std::size_t k = 0; k < t; ++k) {
    lens[k] = static_cast<double>(stats[k].block_length);
    ell[k] = lens[k] / steps;
    markov[k] = static_cast<double>(stats[k].markovian_length) / steps;
  }
  out.drift = estimate_mean(ell);
  out.markovian = estimate_mean(markov);

  std::vector<double> gained(t);
  for (std::size_t k = 0; k < t; ++k) {
    gained[k] = static_cast<double>(stats[k].block_length - stats[k].mid_block_length);
  }
  std::vector<double> col(t), col_gained(t);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < t; ++k) {
      col[k] = static_cast<double>(stats[k].partial_block_lengths[i]) / steps;
      col_gained[k] = static_cast<double>(stats[k].partial_block_lengths[i] -
                                          stats[k].mid_partial_block_lengths[i]);
    }
    out.partial.push_back(estimate_mean(col));
    out.partial_share.push_back(estimate_ratio(col_gained, gained));
    for (std::size_t k = 0; k < t; ++k) col[k] = stats[k].type_frequencies[i];
    out.type_frequency.push_back(estimate_mean(col));
  }
  for (std::size_t c = 0; c < marks.size(); ++c) {
    for (std::size_t k = 0; k < t; ++k) col[k] = static_cast<double>(stats[k].profile[c]);
    out.prefix_profile.emplace_back(marks[c], detail::pairwise_sum(col) / static_cast<double>(t));
  }
  return out;
}

inline MeanEstimate estimate_drift(const ModelSpec& m, long steps, long trials,
                                   std::uint64_t seed, unsigned threads = 1) {
  return simulate(m, {steps, trials, seed, threads}).drift;
}

struct PartialMarkovianEstimate {
  std::vector<MeanEstimate> partial;
  std::vector<MeanEstimate> partial_share;
  MeanEstimate markovian;
};

inline PartialMarkovianEstimate estimate_partial_and_markovian(const ModelSpec& m, long steps,
                                                               long trials, std::uint64_t seed,
                                                               unsigned threads = 1) {
  auto res = simulate(m, {steps, trials, seed, threads});
  return {std::move(res.partial), std::move(res.partial_share), res.markovian};
}

// Mean depth of the prefix that never changes after time n, at evenly spaced
// checkpoints n. Short runs (below the estimator minimum) are allowed here.
inline std::vector<std::pair<long, double>> prefix_stabilization_profile(
    const ModelSpec& m, long steps, long trials, std::uint64_t seed, int checkpoints = 20,
    unsigned threads = 1) {
  if (steps < 1 || trials < 1 || checkpoints < 1) {
    throw UsageError("profile needs steps, trials and checkpoints >= 1");
  }
  SimulationConfig cfg{steps, trials, seed, threads, checkpoints};
  return simulate(m, cfg, false).prefix_profile;
}

}  // namespace escape_rate
