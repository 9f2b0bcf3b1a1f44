#pragma once

// Slow, exact-by-construction verification paths.
//
// Two independent computations of the same power series are compared
// coefficient by coefficient:
//   * the xi-system solved in the ring of truncated series, with factor
//     generating functions composed with xi_i(z);
//   * dynamic programming over words of the free product, counting paths of
//     the product chain directly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"
#include "escape_rate/series.hpp"

namespace escape_rate::oracle {

inline constexpr int kMaxSeriesOrder = 30;
inline constexpr int kMaxEnumerationSteps = 14;
inline constexpr std::size_t kExplosionGuard = 10'000'000;

namespace detail {

inline void require_finite(const ModelSpec& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.factor(i).is_finite()) {
      throw UnsupportedFactorError(std::string(what) + " needs finite factors; factor " +
                                   std::to_string(i + 1) + " ('" + m.factor(i).name() +
                                   "') is not finite");
    }
  }
}

// Factor-level series by iterating the row vector of the factor chain.
// mode 0: Green G(x,y); 1: first visit F(x,y); 2: last exit L(x,y).
inline TruncatedSeries factor_series(const FiniteFactor& f, std::size_t x, std::size_t y,
                                     int order, int mode) {
  TruncatedSeries s(order);
  const auto n = static_cast<Eigen::Index>(f.size());
  const auto xi = static_cast<Eigen::Index>(x);
  const auto yi = static_cast<Eigen::Index>(y);
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Unit(n, xi);
  for (int k = 0; k <= order; ++k) {
    if (k > 0) dist = dist * f.transition();
    if (mode == 2 && k > 0) dist[xi] = 0.0;
    s[static_cast<std::size_t>(k)] = dist[yi];
    if (mode == 1) dist[yi] = 0.0;
  }
  return s;
}

}  // namespace detail

// G_i(x, y | t) of factor i as a series in t.
inline TruncatedSeries factor_green_series(const FiniteFactor& f, std::size_t x, std::size_t y,
                                           int order) {
  return detail::factor_series(f, x, y, order, 0);
}
inline TruncatedSeries factor_first_visit_series(const FiniteFactor& f, std::size_t x,
                                                 std::size_t y, int order) {
  return detail::factor_series(f, x, y, order, 1);
}
inline TruncatedSeries factor_last_exit_series(const FiniteFactor& f, std::size_t x,
                                               std::size_t y, int order) {
  return detail::factor_series(f, x, y, order, 2);
}

// H_j(z) = alpha_j z U_j(xi_j(z)) / xi_j(z), built from the series of
// U_j(t)/t = (1 - 1/G_j(t))/t.
inline std::vector<TruncatedSeries> return_series(const ModelSpec& m,
                                                  const std::vector<TruncatedSeries>& xi) {
  const int n = xi.front().order();
  std::vector<TruncatedSeries> h;
  for (std::size_t j = 0; j < m.size(); ++j) {
    const auto& f = m.factor(j).finite();
    const auto g = TruncatedSeries(series_coefficients(f, n + 1), n + 1);
    const auto u = TruncatedSeries::constant(1.0, n + 1) - g.reciprocal();
    const auto u_over_t = u.shift_down();
    h.push_back(m.weight(j) * u_over_t.compose(xi[j]).shift_up());
  }
  return h;
}

// One substitution step xi_i <- alpha_i z / (1 - sum_{j != i} H_j).
inline std::vector<TruncatedSeries> xi_series_step(const ModelSpec& m,
                                                   const std::vector<TruncatedSeries>& xi) {
  const int n = xi.front().order();
  const auto h = return_series(m, xi);
  std::vector<TruncatedSeries> next;
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto denom = TruncatedSeries::constant(1.0, n);
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j != i) denom = denom - h[j];
    }
    next.push_back(TruncatedSeries::monomial(m.weight(i), n) / denom);
  }
  return next;
}

// xi_i(z) through order N. Coefficient k is final after k substitutions, so
// N + 1 rounds suffice.
inline std::vector<TruncatedSeries> xi_series(const ModelSpec& m, int order) {
  detail::require_finite(m, "series oracle");
  if (order < 1 || order > kMaxSeriesOrder) {
    throw UsageError("series order must lie in [1, " + std::to_string(kMaxSeriesOrder) + "]");
  }
  std::vector<TruncatedSeries> xi;
  for (std::size_t i = 0; i < m.size(); ++i) xi.push_back(TruncatedSeries::monomial(m.weight(i), order));
  for (int it = 0; it <= order; ++it) xi = xi_series_step(m, xi);
  return xi;
}

// G(o,o|z) = 1 / (1 - sum_j H_j(z)) as a series.
inline TruncatedSeries root_green_series(const ModelSpec& m, const std::vector<TruncatedSeries>& xi) {
  const int n = xi.front().order();
  auto denom = TruncatedSeries::constant(1.0, n);
  for (const auto& h : return_series(m, xi)) denom = denom - h;
  return denom.reciprocal();
}

// ---------------------------------------------------------------------------
// Product chain on words.

// Words are encoded canonically as 3 bytes per block: factor, state (16 bit).
using EncodedWord = std::string;

struct Letter {
  std::uint32_t factor;
  std::uint32_t state;
  friend bool operator==(const Letter&, const Letter&) = default;
};

inline EncodedWord encode(const std::vector<Letter>& letters) {
  EncodedWord w;
  for (const auto& l : letters) {
    w.push_back(static_cast<char>(l.factor));
    w.push_back(static_cast<char>(l.state & 0xFF));
    w.push_back(static_cast<char>((l.state >> 8) & 0xFF));
  }
  return w;
}

inline std::vector<Letter> decode(const EncodedWord& w) {
  std::vector<Letter> out;
  for (std::size_t k = 0; k + 2 < w.size(); k += 3) {
    out.push_back({static_cast<unsigned char>(w[k]),
                   static_cast<std::uint32_t>(static_cast<unsigned char>(w[k + 1])) |
                       (static_cast<std::uint32_t>(static_cast<unsigned char>(w[k + 2])) << 8)});
  }
  return out;
}

inline std::size_t block_length(const EncodedWord& w) { return w.size() / 3; }

class ProductChain {
 public:
  explicit ProductChain(const ModelSpec& m) : model_(&m) {
    detail::require_finite(m, "product-chain enumeration");
    if (m.size() > 255) throw UnsupportedFactorError("too many factors for word encoding");
    for (const auto& f : m.factors()) {
      if (f.finite().size() > 65535) throw UnsupportedFactorError("factor too large for word encoding");
    }
  }

  const ModelSpec& model() const noexcept { return *model_; }

  // One-step transitions out of word w.
  template <class Fn>
  void for_each_successor(const EncodedWord& w, Fn&& fn) const {
    const std::size_t len = block_length(w);
    const int top_factor = len ? static_cast<unsigned char>(w[w.size() - 3]) : -1;
    for (std::size_t i = 0; i < model_->size(); ++i) {
      const auto& f = model_->factor(i).finite();
      const double a = model_->weight(i);
      const auto n = f.size();
      if (static_cast<int>(i) == top_factor) {
        const std::size_t x = state_at(w, len - 1);
        const EncodedWord base = w.substr(0, w.size() - 3);
        for (std::size_t y = 0; y < n; ++y) {
          const double p = f.p(x, y);
          if (p <= 0.0) continue;
          if (y == f.root()) {
            fn(base, a * p);
          } else {
            fn(base + letter(i, y), a * p);
          }
        }
      } else {
        for (std::size_t y = 0; y < n; ++y) {
          const double p = f.p(f.root(), y);
          if (p > 0.0) fn(w + letter(i, y), a * p);
        }
      }
    }
  }

  // Lower bound on the number of steps from u to v.
  static std::size_t distance_lower_bound(const EncodedWord& u, const EncodedWord& v) {
    const std::size_t lu = block_length(u);
    const std::size_t lv = block_length(v);
    std::size_t c = 0;
    while (c < lu && c < lv && u.compare(3 * c, 3, v, 3 * c, 3) == 0) ++c;
    std::size_t d = (lu - c) + (lv - c);
    if (lu > c && lv > c && u[3 * c] == v[3 * c]) d -= 1;
    return d;
  }

  static EncodedWord letter(std::size_t factor, std::size_t state) {
    return encode({{static_cast<std::uint32_t>(factor), static_cast<std::uint32_t>(state)}});
  }

 private:
  static std::size_t state_at(const EncodedWord& w, std::size_t k) {
    return static_cast<unsigned char>(w[3 * k + 1]) |
           (static_cast<std::size_t>(static_cast<unsigned char>(w[3 * k + 2])) << 8);
  }

  const ModelSpec* model_;
};

enum class PassageKind { Green, FirstVisit, FirstReturn, LastExit };

// Coefficients of G, F, U or L between two words of the product, by forward
// dynamic programming with states that cannot reach the target pruned.
inline TruncatedSeries passage_series(const ProductChain& chain, const EncodedWord& from,
                                      const EncodedWord& to, int order, PassageKind kind) {
  TruncatedSeries s(order);
  std::unordered_map<EncodedWord, double> cur{{from, 1.0}};
  std::unordered_map<EncodedWord, double> next;
  for (int n = 0; n <= order; ++n) {
    if (n > 0) {
      if (kind == PassageKind::LastExit) cur.erase(from);
      auto it = cur.find(to);
      const double at = it == cur.end() ? 0.0 : it->second;
      s[static_cast<std::size_t>(n)] = at;
      if ((kind == PassageKind::FirstVisit || kind == PassageKind::FirstReturn) &&
          it != cur.end()) {
        cur.erase(it);
      }
    } else {
      const bool same = from == to;
      if (kind == PassageKind::FirstReturn) {
        s[0] = 0.0;
      } else {
        s[0] = same ? 1.0 : 0.0;
        if (kind == PassageKind::FirstVisit && same) return s;
      }
    }
    if (n == order) break;
    next.clear();
    const auto remaining = static_cast<std::size_t>(order - n - 1);
    for (const auto& [w, p] : cur) {
      chain.for_each_successor(w, [&](const EncodedWord& v, double q) {
        if (ProductChain::distance_lower_bound(v, to) <= remaining) next[v] += p * q;
      });
    }
    if (next.size() > kExplosionGuard) throw UsageError("enumeration exceeded the word-count guard");
    cur.swap(next);
  }
  return s;
}

// Exact law of Z_n for n = 0..n_max.
using Law = std::unordered_map<EncodedWord, double>;

inline std::vector<Law> enumerate_distribution(const ModelSpec& m, int n_max,
                                               std::size_t guard = kExplosionGuard) {
  if (n_max < 0 || n_max > kMaxEnumerationSteps) {
    throw UsageError("enumeration horizon must lie in [0, " +
                     std::to_string(kMaxEnumerationSteps) + "]");
  }
  const ProductChain chain(m);
  std::vector<Law> laws;
  laws.push_back(Law{{EncodedWord{}, 1.0}});
  std::size_t total = 1;
  for (int n = 1; n <= n_max; ++n) {
    Law next;
    for (const auto& [w, p] : laws.back()) {
      chain.for_each_successor(w, [&](const EncodedWord& v, double q) { next[v] += p * q; });
    }
    total += next.size();
    if (total > guard) throw UsageError("enumeration exceeded the word-count guard");
    laws.push_back(std::move(next));
  }
  return laws;
}

struct LawSummary {
  int n;
  double total_mass;
  double return_probability;  // P[Z_n = o]
  double mean_block_length;   // E[ell(Z_n)]
  std::size_t support;
};

namespace detail {

// Neumaier summation; laws have up to millions of tiny atoms.
struct CompensatedSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace detail

inline LawSummary summarize(int n, const Law& law) {
  detail::CompensatedSum mass;
  detail::CompensatedSum mean;
  LawSummary s{n, 0.0, 0.0, 0.0, law.size()};
  for (const auto& [w, p] : law) {
    mass.add(p);
    mean.add(p * static_cast<double>(block_length(w)));
    if (w.empty()) s.return_probability += p;
  }
  s.total_mass = mass.value();
  s.mean_block_length = mean.value();
  return s;
}

// Two-step averaged increment (E[l(Z_n)] - E[l(Z_{n-2})]) / 2 at the last
// enumerated horizon; averaging removes the parity oscillation of
// bipartite factors.
inline double mean_increment(const std::vector<LawSummary>& laws) {
  if (laws.size() < 3) throw UsageError("increment trend needs at least two enumerated steps");
  const auto& a = laws[laws.size() - 1];
  const auto& b = laws[laws.size() - 3];
  return 0.5 * (a.mean_block_length - b.mean_block_length);
}

struct EnumerationSummary {
  std::vector<LawSummary> laws;
  std::size_t words_visited = 0;
  // True when the guard stopped the enumeration before n_max.
  bool truncated = false;
};

// Streams the laws of Z_0, Z_1, ... keeping only the current one. Stops
// quietly at the last horizon whose cumulative support fits in the guard.
inline EnumerationSummary enumerate_summaries(const ModelSpec& m, int n_max,
                                              std::size_t guard = kExplosionGuard) {
  if (n_max < 0 || n_max > kMaxEnumerationSteps) {
    throw UsageError("enumeration horizon must lie in [0, " +
                     std::to_string(kMaxEnumerationSteps) + "]");
  }
  const ProductChain chain(m);
  EnumerationSummary out;
  Law cur{{EncodedWord{}, 1.0}};
  out.laws.push_back(summarize(0, cur));
  out.words_visited = 1;
  for (int n = 1; n <= n_max; ++n) {
    Law next;
    bool over = false;
    for (const auto& [w, p] : cur) {
      chain.for_each_successor(w, [&](const EncodedWord& v, double q) { next[v] += p * q; });
      if (out.words_visited + next.size() > guard) {
        over = true;
        break;
      }
    }
    if (over) {
      out.truncated = true;
      break;
    }
    out.words_visited += next.size();
    out.laws.push_back(summarize(n, next));
    cur.swap(next);
  }
  return out;
}

// p^{(n)}(o,o) for n = 0..order, counting only words that can still return.
inline TruncatedSeries return_probabilities(const ModelSpec& m, int order) {
  const ProductChain chain(m);
  return passage_series(chain, EncodedWord{}, EncodedWord{}, order, PassageKind::Green);
}

// ---------------------------------------------------------------------------
// Identity checks.

struct IdentityReport {
  int order = 0;
  // Identity name -> largest absolute coefficient discrepancy.
  std::map<std::string, double> max_discrepancy;
  std::map<std::string, int> cases;

  void record(const std::string& name, double d) {
    auto& v = max_discrepancy[name];
    v = std::max(v, d);
    ++cases[name];
  }
  bool passed(double tol) const {
    for (const auto& [name, d] : max_discrepancy) {
      if (!(d <= tol)) return false;
    }
    return !max_discrepancy.empty();
  }
};

namespace detail {

// Single letters of every factor plus a few two-letter words.
inline std::vector<EncodedWord> sample_words(const ModelSpec& m) {
  std::vector<EncodedWord> words;
  std::vector<EncodedWord> firsts;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& f = m.factor(i).finite();
    bool first = true;
    for (std::size_t s = 0; s < f.size(); ++s) {
      if (s == f.root()) continue;
      words.push_back(ProductChain::letter(i, s));
      if (first) firsts.push_back(words.back());
      first = false;
    }
  }
  for (std::size_t i = 0; i < firsts.size(); ++i) {
    const auto& nxt = firsts[(i + 1) % firsts.size()];
    if (nxt[0] != firsts[i][0]) words.push_back(firsts[i] + nxt);
  }
  return words;
}

inline bool can_concatenate(const EncodedWord& x, const EncodedWord& w) {
  if (w.empty()) return false;
  if (x.empty()) return true;
  return x[x.size() - 3] != w[0];
}

}  // namespace detail

// Compares generating-function identities of the free product term by term:
//   G(x,x) (1 - U(x,x)) = 1
//   G(x,y) = F(x,y) G(y,y) = G(x,x) L(x,y)
//   F(o,xw) = F(o,x) F(x,xw),  L(o,xw) = L(o,x) L(x,xw),  L(x,xw) = L(o,w)
//   factor reduction: F(x,y) = F_i(x,y|xi_i(z)), L(x,y) = L_i(x,y|xi_i(z))
//   return series: p^{(n)}(o,o) = [z^n] 1/(1 - sum_j H_j(z)).
inline IdentityReport check_passage_identities(const ModelSpec& m, int order) {
  detail::require_finite(m, "identity check");
  if (order < 1 || order > 12) throw UsageError("identity check order must lie in [1, 12]");
  const ProductChain chain(m);
  IdentityReport rep;
  rep.order = order;
  const auto one = TruncatedSeries::constant(1.0, order);
  std::map<std::tuple<int, EncodedWord, EncodedWord>, TruncatedSeries> memo;
  auto series = [&](const EncodedWord& a, const EncodedWord& b, PassageKind k) {
    const auto key = std::make_tuple(static_cast<int>(k), a, b);
    auto it = memo.find(key);
    if (it == memo.end()) it = memo.emplace(key, passage_series(chain, a, b, order, k)).first;
    return it->second;
  };

  const auto words = detail::sample_words(m);
  std::vector<EncodedWord> points{EncodedWord{}};
  points.insert(points.end(), words.begin(), words.end());

  // First return.
  for (const auto& x : points) {
    const auto g = series(x, x, PassageKind::Green);
    const auto u = series(x, x, PassageKind::FirstReturn);
    rep.record("G(x,x)(1-U(x,x)) = 1", (g * (one - u)).max_abs_difference(one));
  }
  // First visit and last exit on pairs involving the root and on single-letter pairs.
  std::vector<std::pair<EncodedWord, EncodedWord>> pairs;
  for (const auto& x : words) {
    pairs.emplace_back(EncodedWord{}, x);
    pairs.emplace_back(x, EncodedWord{});
  }
  for (std::size_t a = 0; a + 1 < words.size(); ++a) pairs.emplace_back(words[a], words[a + 1]);
  for (const auto& [x, y] : pairs) {
    const auto gxy = series(x, y, PassageKind::Green);
    const auto gyy = series(y, y, PassageKind::Green);
    const auto gxx = series(x, x, PassageKind::Green);
    rep.record("G(x,y) = F(x,y) G(y,y)",
               gxy.max_abs_difference(series(x, y, PassageKind::FirstVisit) * gyy));
    rep.record("G(x,y) = G(x,x) L(x,y)",
               gxy.max_abs_difference(gxx * series(x, y, PassageKind::LastExit)));
  }
  // Factorization along triples (o, x, xw).
  for (const auto& x : words) {
    for (const auto& w : words) {
      if (!detail::can_concatenate(x, w)) continue;
      const EncodedWord xw = x + w;
      if (block_length(xw) > 3) continue;
      const auto l_x_xw = series(x, xw, PassageKind::LastExit);
      rep.record("F(o,xw) = F(o,x) F(x,xw)",
                 series({}, xw, PassageKind::FirstVisit)
                     .max_abs_difference(series({}, x, PassageKind::FirstVisit) *
                                         series(x, xw, PassageKind::FirstVisit)));
      rep.record("L(o,xw) = L(o,x) L(x,xw)",
                 series({}, xw, PassageKind::LastExit)
                     .max_abs_difference(series({}, x, PassageKind::LastExit) * l_x_xw));
      rep.record("L(x,xw) = L(o,w)",
                 l_x_xw.max_abs_difference(series({}, w, PassageKind::LastExit)));
    }
  }

  // Factor reduction through xi_i(z).
  const auto xi = xi_series(m, order);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& f = m.factor(i).finite();
    auto as_word = [&](std::size_t s) {
      return s == f.root() ? EncodedWord{} : ProductChain::letter(i, s);
    };
    for (std::size_t x = 0; x < f.size(); ++x) {
      for (std::size_t y = 0; y < f.size(); ++y) {
        if (x == y) continue;
        const auto fi = factor_first_visit_series(f, x, y, order).compose(xi[i]);
        const auto li = factor_last_exit_series(f, x, y, order).compose(xi[i]);
        rep.record("F(x,y) = F_i(x,y|xi_i(z))",
                   series(as_word(x), as_word(y), PassageKind::FirstVisit).max_abs_difference(fi));
        rep.record("L(x,y) = L_i(x,y|xi_i(z))",
                   series(as_word(x), as_word(y), PassageKind::LastExit).max_abs_difference(li));
      }
    }
  }

  rep.record("p(n)(o,o) = [z^n] 1/(1 - sum H_j)",
             return_probabilities(m, order).max_abs_difference(root_green_series(m, xi)));
  return rep;
}

}  // namespace escape_rate::oracle
