#pragma once

#include "spa/geometry.hpp"

#include <optional>
#include <span>

namespace spa {

struct EditCosts {
  double insert = 1.0;
  double del = 1.0;
  double replace = std::numeric_limits<double>::infinity();  // disabled
  double transpose = 0.0;

  void validate() const {
    if (insert <= 0 || del <= 0) throw std::invalid_argument("insert/delete costs must be > 0");
  }
};

struct MatchTolerances {
  double r_dev = 0.04;             // meters
  double theta_dev = deg2rad(10);  // radians
  // Feature components are laid out [d,d,d,r,theta,theta,theta]; by default
  // the tolerance vector follows that layout. The switch applies the
  // literal [theta,theta,theta,r,r,r,r] vector instead.
  bool legacy_noise_layout = false;

  std::array<double, 7> noise_vector() const {
    if (legacy_noise_layout)
      return {theta_dev, theta_dev, theta_dev, r_dev, r_dev, r_dev, r_dev};
    return {r_dev, r_dev, r_dev, r_dev, theta_dev, theta_dev, theta_dev};
  }
};

inline bool match_features(const RelFeature& qa, const RelFeature& qb,
                           const MatchTolerances& tol) {
  const auto noise = tol.noise_vector();
  for (int i = 0; i < 7; ++i)
    if (std::abs(qa.q[i] - qb.q[i]) > noise[i]) return false;
  return true;
}

/// Ordered feature sequence of one patch; the order is a function of the
/// feature values only.
struct FeatureSequence {
  int owner = -1;
  std::vector<RelFeature> ordered;

  size_t size() const { return ordered.size(); }
};

/// Tolerance-aware lexicographic order: each component is quantized to an
/// integer bin of width e_r (distance components) or e_theta (angles);
/// bins compare lexicographically, ties fall through to full-precision
/// values and finally the neighbor id, yielding a deterministic total
/// order for any permutation of the same multiset.
inline FeatureSequence order_sequence(const FeatureSet& set, double e_r, double e_theta) {
  if (set.features.empty()) throw std::invalid_argument("order_sequence: empty feature set");
  FeatureSequence seq;
  seq.owner = set.owner;
  seq.ordered = set.features;

  const std::array<double, 7> tol = {e_r, e_r, e_r, e_r, e_theta, e_theta, e_theta};
  auto bin_key = [&](const RelFeature& f) {
    std::array<int64_t, 7> key;
    for (int i = 0; i < 7; ++i) key[i] = static_cast<int64_t>(std::floor(f.q[i] / tol[i]));
    return key;
  };
  std::vector<std::array<int64_t, 7>> keys;
  keys.reserve(seq.ordered.size());
  for (const auto& f : seq.ordered) keys.push_back(bin_key(f));

  std::vector<int> perm(seq.ordered.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    const auto& qa = seq.ordered[a].q;
    const auto& qb = seq.ordered[b].q;
    if (qa != qb) return qa < qb;
    return seq.ordered[a].alpha_id < seq.ordered[b].alpha_id;
  });
  std::vector<RelFeature> sorted;
  sorted.reserve(perm.size());
  for (int i : perm) sorted.push_back(seq.ordered[i]);
  seq.ordered = std::move(sorted);
  return seq;
}

namespace detail {

/// Restricted Damerau-Levenshtein (optimal string alignment) over arbitrary
/// element types with a caller-supplied match predicate. Keeps three rolling
/// rows over the shorter sequence. With a budget, returns some value greater
/// than the budget as soon as no completion can cost less.
template <typename T, typename MatchFn>
double rdl_distance(std::span<const T> a, std::span<const T> b, const EditCosts& costs,
                    const MatchFn& match, std::optional<double> budget) {
  costs.validate();
  // orient so columns run over the shorter sequence; swapping the operands
  // swaps the roles of insert and delete
  EditCosts eff = costs;
  bool flipped = false;
  if (b.size() > a.size()) {
    std::swap(a, b);
    std::swap(eff.insert, eff.del);
    flipped = true;
  }
  auto matches = [&](const T& x, const T& y) { return flipped ? match(y, x) : match(x, y); };
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());

  std::vector<double> prev2(m + 1), prev(m + 1), cur(m + 1);
  std::vector<uint8_t> match_prev(m + 1, 0), match_cur(m + 1, 0);
  for (int j = 0; j <= m; ++j) prev[j] = j * eff.insert;

  for (int i = 1; i <= n; ++i) {
    cur[0] = i * eff.del;
    double frontier_bound = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= m; ++j) {
      const bool mij = matches(a[i - 1], b[j - 1]);
      match_cur[j] = mij ? 1 : 0;
      double best = std::min(prev[j] + eff.del, cur[j - 1] + eff.insert);
      const double sub = mij ? 0.0 : eff.replace;
      best = std::min(best, prev[j - 1] + sub);
      if (i >= 2 && j >= 2 && match_cur[j - 1] && match_prev[j]) {
        // a[i-1] ~ b[j-2] and a[i-2] ~ b[j-1]: adjacent transposition
        best = std::min(best, prev2[j - 2] + eff.transpose);
      }
      cur[j] = best;
    }
    if (budget) {
      // admissible completion bound: remaining length imbalance must be paid
      // with inserts or deletes. A transposition can hop from row i-1 to row
      // i+1 without touching row i, so a single row is not a cut through the
      // alignment graph -- but every path visits row i-1 or row i, so the
      // minimum over both consecutive frontiers is a true lower bound.
      for (int j = 0; j <= m; ++j) {
        const int diff = (n - i) - (m - j);
        const double rest = diff >= 0 ? diff * eff.del : -diff * eff.insert;
        frontier_bound = std::min(frontier_bound, cur[j] + rest);
        const int diff_prev = diff + 1;
        const double rest_prev =
            diff_prev >= 0 ? diff_prev * eff.del : -diff_prev * eff.insert;
        frontier_bound = std::min(frontier_bound, prev[j] + rest_prev);
      }
      if (frontier_bound > *budget) return frontier_bound;
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
    std::swap(match_prev, match_cur);
  }
  return prev[m];
}

}  // namespace detail

/// Edit distance D_RDL between two ordered feature sequences.
inline double compare_rdl(const FeatureSequence& a, const FeatureSequence& b,
                          const EditCosts& costs, const MatchTolerances& tol,
                          std::optional<double> budget = std::nullopt) {
  if (a.ordered.empty() || b.ordered.empty())
    throw std::invalid_argument("compare_rdl: empty sequence");
  return detail::rdl_distance<RelFeature>(
      std::span<const RelFeature>(a.ordered), std::span<const RelFeature>(b.ordered), costs,
      [&tol](const RelFeature& x, const RelFeature& y) { return match_features(x, y, tol); },
      budget);
}

/// Symbol-sequence overload used by tests and tooling.
template <typename T>
double compare_rdl_symbols(const std::vector<T>& a, const std::vector<T>& b,
                           const EditCosts& costs,
                           std::optional<double> budget = std::nullopt) {
  return detail::rdl_distance<T>(std::span<const T>(a), std::span<const T>(b), costs,
                                 [](const T& x, const T& y) { return x == y; }, budget);
}

}  // namespace spa
