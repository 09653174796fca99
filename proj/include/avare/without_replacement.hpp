#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "avare/rng.hpp"

namespace avare {

/// An ordered without-replacement batch together with the conditional
/// probabilities q_j = p_{I_j} / (1 - sum_{k<j} p_{I_k}) realized at draw time.
struct BatchDraw {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

/// Sequential without-replacement sampling from a base distribution p.
///
/// `draw(rng)` must return an index distributed as p and `prob(i)` must return
/// p_i. Each stage rejects already-taken indices while the remaining mass is at
/// least 1/2 (so the expected number of retries stays below two); past that it
/// switches to an explicit O(N) draw over the untaken indices. Both paths
/// realize exactly the conditional law p_i / (1 - taken mass).
template <typename Draw, typename Prob>
BatchDraw draw_without_replacement(std::size_t n, std::size_t m, Draw&& draw, Prob&& prob,
                                   RngStream& rng) {
  if (m < 1 || m > n) throw std::invalid_argument("draw_without_replacement: need 1 <= m <= N");
  BatchDraw out;
  out.indices.reserve(m);
  out.weights.reserve(m);
  std::vector<char> taken(n, 0);
  double taken_mass = 0.0;

  for (std::size_t j = 0; j < m; ++j) {
    const double remaining = 1.0 - taken_mass;
    std::size_t pick = n;
    if (remaining >= 0.5) {
      do {
        pick = draw(rng);
      } while (taken[pick]);
    } else {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i]) total += prob(i);
      }
      if (!(total > 0.0)) {
        throw std::invalid_argument("draw_without_replacement: batch exceeds the support of p");
      }
      const double target = rng.uniform_open_closed() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double pi = prob(i);
        if (pi <= 0.0) continue;
        acc += pi;
        pick = i;
        if (target <= acc) break;
      }
    }
    const double pi = prob(pick);
    double q = (n - j == 1) ? 1.0 : pi / remaining;
    if (q > 1.0) q = 1.0;
    taken[pick] = 1;
    taken_mass += pi;
    out.indices.push_back(pick);
    out.weights.push_back(q);
  }
  return out;
}

}  // namespace avare
