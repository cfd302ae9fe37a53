// Reference evaluators written independently of the library: plain loops,
// long double, formulas spelled out term by term. Tests compare the library
// against these rather than against itself.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

constexpr long double kC = 299792458.0L;
constexpr long double kPi = 3.141592653589793238462643383279502884L;

inline long double wavelength_factor(long double f) {
  const long double lambda = kC / f;
  const long double x = lambda / (4.0L * kPi);
  return x * x;
}

/// RF SINR with Rayleigh fades: gamma P H / (r^alpha (N + sum P gamma r_k^-alpha H_k)).
inline long double rf_sinr(long double P, long double gt, long double gr, long double f, long double alpha,
                           long double noise, long double r, const std::vector<long double>& rk,
                           long double h, const std::vector<long double>& hk) {
  const long double gamma = gt * gr * wavelength_factor(f);
  long double interference = 0.0L;
  for (std::size_t k = 0; k < rk.size(); ++k) interference += P * gamma * std::pow(rk[k], -alpha) * hk[k];
  const long double signal = gamma * P * h / std::pow(r, alpha);
  return signal / (noise + interference);
}

/// THz absorption plus thermal noise with per-interferer gain products d_k.
/// gamma_T F F of the expected convention equals (c/4 pi f)^2 * d_k with d_k = G G F F.
inline long double thz_noise(long double P, long double gtx, long double grx, long double f, long double ka,
                             long double n0, long double r, const std::vector<long double>& rk,
                             const std::vector<long double>& dk) {
  const long double gamma = gtx * grx * wavelength_factor(f);
  long double total = n0;
  total += P * gamma * (1.0L / (r * r)) * (1.0L - std::exp(-ka * r));
  for (std::size_t k = 0; k < rk.size(); ++k)
    total += wavelength_factor(f) * dk[k] * P * (1.0L / (rk[k] * rk[k])) * (1.0L - std::exp(-ka * rk[k]));
  return total;
}

inline long double thz_sinr(long double P, long double gtx, long double grx, long double f, long double ka,
                            long double n0, long double r, const std::vector<long double>& rk,
                            const std::vector<long double>& dk) {
  const long double gamma = gtx * grx * wavelength_factor(f);
  long double interference = 0.0L;
  for (std::size_t k = 0; k < rk.size(); ++k)
    interference += wavelength_factor(f) * dk[k] * P * std::exp(-ka * rk[k]) / (rk[k] * rk[k]);
  const long double signal = gamma * P * std::exp(-ka * r) / (r * r);
  return signal / (thz_noise(P, gtx, grx, f, ka, n0, r, rk, dk) + interference);
}

inline long double shannon(long double w, long double sinr) { return w * std::log1p(sinr) / std::log(2.0L); }

inline double rel_err(long double got, long double want) {
  if (want == 0.0L) return static_cast<double>(std::fabs(got));
  return static_cast<double>(std::fabs(got - want) / std::fabs(want));
}

/// Dense feed-forward pass with explicit index loops. act: 0 relu, 1 sigmoid, 2 identity.
struct PlainLayer {
  int in = 0, out = 0, act = 2;
  std::vector<double> w;  // row-major out x in
  std::vector<double> b;
};

inline std::vector<double> forward(const std::vector<PlainLayer>& layers, std::vector<double> x) {
  for (const PlainLayer& l : layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out));
    for (int i = 0; i < l.out; ++i) {
      double s = l.b[static_cast<std::size_t>(i)];
      for (int j = 0; j < l.in; ++j) s += l.w[static_cast<std::size_t>(i * l.in + j)] * x[static_cast<std::size_t>(j)];
      if (l.act == 0) s = s > 0 ? s : 0;
      if (l.act == 1) s = 1.0 / (1.0 + std::exp(-s));
      y[static_cast<std::size_t>(i)] = s;
    }
    x = std::move(y);
  }
  return x;
}

/// Q* of a finite deterministic MDP by repeated Bellman optimality sweeps.
inline std::vector<std::vector<double>> value_iteration(const std::vector<std::vector<int>>& next,
                                                        const std::vector<std::vector<double>>& reward,
                                                        double gamma, int sweeps = 5000) {
  const std::size_t S = next.size(), A = next[0].size();
  std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));
  for (int it = 0; it < sweeps; ++it) {
    auto nq = q;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const auto& row = q[static_cast<std::size_t>(next[s][a])];
        nq[s][a] = reward[s][a] + gamma * *std::max_element(row.begin(), row.end());
      }
    q = nq;
  }
  return q;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return (sxx == 0 || syy == 0) ? 0.0 : sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
