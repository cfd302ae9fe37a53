// Link budgets for the sub-6GHz (RF) and THz tiers.
//
// Everything here is a pure function of its arguments. Powers and gains are
// linear (watts, not dB). Random draws take the generator explicitly so the
// caller owns stream partitioning.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vnet/errors.hpp"

namespace vnet {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr double kBoltzmann = 1.380649e-23;      // J/K
inline constexpr double kRoomTemperatureK = 290.0;

/// Johnson-Nyquist noise power k_B * T * W.
template <typename Scalar = double>
Scalar thermal_noise(Scalar bandwidth_hz, Scalar temperature_k = Scalar(kRoomTemperatureK)) {
  return Scalar(kBoltzmann) * temperature_k * bandwidth_hz;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

template <typename Scalar = double>
struct RfParams {
  Scalar tx_power_w{1};
  Scalar tx_gain{1};
  Scalar rx_gain{1};
  Scalar carrier_hz{3.5e9};
  Scalar pathloss_exp{4};
  Scalar noise_w{thermal_noise<Scalar>(Scalar(4e7))};

  void validate() const {
    if (!(tx_power_w > 0 && tx_gain > 0 && rx_gain > 0 && carrier_hz > 0 && noise_w > 0))
      throw ContractViolation("RfParams: powers, gains, carrier and noise must be positive");
    if (!(pathloss_exp >= 2)) throw ContractViolation("RfParams: pathloss exponent must be >= 2");
  }
};

template <typename Scalar = double>
struct ThzParams {
  Scalar tx_power_w{1};
  Scalar main_gain_tx{316.2};
  Scalar main_gain_rx{316.2};
  Scalar side_gain_tx{0};
  Scalar side_gain_rx{0};
  Scalar carrier_hz{1e12};
  Scalar absorption_per_m{0.05};
  Scalar thermal_noise_w{thermal_noise<Scalar>(Scalar(5e8))};
  Scalar beamwidth_tx_rad{Scalar(2 * std::numbers::pi * 0.1)};
  Scalar beamwidth_rx_rad{Scalar(2 * std::numbers::pi * 0.1)};
  Scalar align_prob_tx{0.1};
  Scalar align_prob_rx{0.1};

  void validate() const {
    if (!(tx_power_w > 0 && carrier_hz > 0 && thermal_noise_w > 0))
      throw ContractViolation("ThzParams: power, carrier and noise must be positive");
    if (!(main_gain_tx > 0 && main_gain_rx > 0))
      throw ContractViolation("ThzParams: main-lobe gains must be positive");
    if (!(side_gain_tx >= 0 && side_gain_rx >= 0 && side_gain_tx <= main_gain_tx &&
          side_gain_rx <= main_gain_rx))
      throw ContractViolation("ThzParams: side-lobe gains must lie in [0, main gain]");
    if (!(absorption_per_m >= 0)) throw ContractViolation("ThzParams: K_a must be >= 0");
    if (!(align_prob_tx >= 0 && align_prob_tx <= 1 && align_prob_rx >= 0 && align_prob_rx <= 1))
      throw ContractViolation("ThzParams: alignment probabilities must lie in [0, 1]");
  }
};

template <typename Scalar = double>
struct LinkGeometry {
  Scalar serving_dist_m{1};
  std::vector<Scalar> interferer_dists_m;
};

template <typename Scalar = double>
struct ChannelDraw {
  Scalar serving_fade{1};
  std::vector<Scalar> interferer_fades;
  std::vector<Scalar> interferer_alignments;
};

/// How the THz interference treats beam alignment with interfering TBSs.
enum class InterferenceMode { ExpectedAlignment, SampledAlignment };

enum class AntennaSide { Tx, Rx };

/// (c / 4 pi f)^2, the free-space spreading factor at carrier f.
template <typename Scalar>
Scalar spreading_factor(Scalar carrier_hz) {
  const Scalar w = Scalar(kSpeedOfLight) / (Scalar(4 * std::numbers::pi) * carrier_hz);
  return w * w;
}

template <typename Scalar>
Scalar rf_constant(const RfParams<Scalar>& p) {
  return p.tx_gain * p.rx_gain * spreading_factor(p.carrier_hz);
}

template <typename Scalar>
Scalar thz_constant(const ThzParams<Scalar>& p) {
  return p.main_gain_tx * p.main_gain_rx * spreading_factor(p.carrier_hz);
}

/// Gain product D of an interfering link under the expected-alignment
/// convention: gamma_T * F_tx * F_rx expressed as D * (c / 4 pi f)^2.
template <typename Scalar>
Scalar expected_alignment(const ThzParams<Scalar>& p) {
  return p.main_gain_tx * p.main_gain_rx * p.align_prob_tx * p.align_prob_rx;
}

namespace detail {

template <typename Scalar>
void check_distance(Scalar r) {
  if (!(r > 0)) throw ContractViolation("link distance must be > 0");
}

}  // namespace detail

/// gamma_R P H_i / (r^alpha (N_R + I_R)), I_R = sum_k P gamma_R r_k^-alpha H_k.
template <typename Scalar>
Scalar rf_sinr(const RfParams<Scalar>& p, const LinkGeometry<Scalar>& geom,
               const ChannelDraw<Scalar>& draw) {
  if (draw.interferer_fades.size() != geom.interferer_dists_m.size())
    throw ContractViolation("rf_sinr: interferer fades do not match interferer distances");
  detail::check_distance(geom.serving_dist_m);
  const Scalar gamma = rf_constant(p);
  Scalar interference = 0;
  for (std::size_t k = 0; k < geom.interferer_dists_m.size(); ++k) {
    detail::check_distance(geom.interferer_dists_m[k]);
    interference +=
        p.tx_power_w * gamma * std::pow(geom.interferer_dists_m[k], -p.pathloss_exp) * draw.interferer_fades[k];
  }
  const Scalar num = gamma * p.tx_power_w * draw.serving_fade;
  return num / (std::pow(geom.serving_dist_m, p.pathloss_exp) * (p.noise_w + interference));
}

/// Thermal plus molecular-absorption noise N_T. `alignments` holds the gain
/// product D of each interfering link.
template <typename Scalar>
Scalar thz_noise(const ThzParams<Scalar>& p, const LinkGeometry<Scalar>& geom,
                 std::span<const Scalar> alignments) {
  if (alignments.size() != geom.interferer_dists_m.size())
    throw ContractViolation("thz_noise: alignments do not match interferer distances");
  detail::check_distance(geom.serving_dist_m);
  const Scalar gamma = thz_constant(p);
  const Scalar spread = spreading_factor(p.carrier_hz);
  const Scalar r = geom.serving_dist_m;
  Scalar noise = p.thermal_noise_w + p.tx_power_w * gamma / (r * r) * -std::expm1(-p.absorption_per_m * r);
  for (std::size_t k = 0; k < alignments.size(); ++k) {
    const Scalar rk = geom.interferer_dists_m[k];
    detail::check_distance(rk);
    noise += alignments[k] * spread * p.tx_power_w / (rk * rk) * -std::expm1(-p.absorption_per_m * rk);
  }
  return noise;
}

template <typename Scalar>
Scalar thz_noise(const ThzParams<Scalar>& p, const LinkGeometry<Scalar>& geom) {
  const std::vector<Scalar> d(geom.interferer_dists_m.size(), expected_alignment(p));
  return thz_noise(p, geom, std::span<const Scalar>(d));
}

/// THz SINR. In ExpectedAlignment mode every interferer uses F_tx F_rx; in
/// SampledAlignment mode the per-interferer products in `draw` are used.
template <typename Scalar>
Scalar thz_sinr(const ThzParams<Scalar>& p, const LinkGeometry<Scalar>& geom,
                const ChannelDraw<Scalar>& draw,
                InterferenceMode mode = InterferenceMode::ExpectedAlignment) {
  const std::size_t n = geom.interferer_dists_m.size();
  std::vector<Scalar> align;
  if (mode == InterferenceMode::SampledAlignment) {
    if (draw.interferer_alignments.size() != n)
      throw ContractViolation("thz_sinr: interferer alignments do not match interferer distances");
    align = draw.interferer_alignments;
  } else {
    align.assign(n, expected_alignment(p));
  }
  const Scalar spread = spreading_factor(p.carrier_hz);
  const Scalar r = geom.serving_dist_m;
  const Scalar noise = thz_noise(p, geom, std::span<const Scalar>(align));
  Scalar interference = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Scalar rk = geom.interferer_dists_m[k];
    interference += align[k] * spread * p.tx_power_w / (rk * rk) * std::exp(-p.absorption_per_m * rk);
  }
  const Scalar num = thz_constant(p) * p.tx_power_w * std::exp(-p.absorption_per_m * r) / (r * r);
  return num / (noise + interference);
}

/// Piecewise main/side lobe gain. Angles are first wrapped into [-pi, pi).
template <typename Scalar>
Scalar antenna_gain(const ThzParams<Scalar>& p, Scalar theta_rad, AntennaSide side) {
  const Scalar two_pi = Scalar(2 * std::numbers::pi);
  Scalar t = std::fmod(theta_rad + Scalar(std::numbers::pi), two_pi);
  if (t < 0) t += two_pi;
  t -= Scalar(std::numbers::pi);
  const bool tx = side == AntennaSide::Tx;
  const Scalar width = tx ? p.beamwidth_tx_rad : p.beamwidth_rx_rad;
  if (std::abs(t) <= width) return tx ? p.main_gain_tx : p.main_gain_rx;
  return tx ? p.side_gain_tx : p.side_gain_rx;
}

/// Draws the interfering-link gain product D from its four-point law.
template <typename Scalar, typename Rng>
Scalar sample_alignment(const ThzParams<Scalar>& p, Rng& rng) {
  std::bernoulli_distribution tx(static_cast<double>(p.align_prob_tx));
  std::bernoulli_distribution rx(static_cast<double>(p.align_prob_rx));
  const Scalar gt = tx(rng) ? p.main_gain_tx : p.side_gain_tx;
  const Scalar gr = rx(rng) ? p.main_gain_rx : p.side_gain_rx;
  return gt * gr;
}

/// Unit-mean exponential power by inverse transform; u = 0 maps to 0.
template <typename Scalar>
Scalar fading_from_uniform(Scalar u) {
  if (u >= Scalar(1)) u = std::nextafter(Scalar(1), Scalar(0));
  return -std::log1p(-u);
}

template <typename Scalar = double, typename Rng>
Scalar sample_fading(Rng& rng) {
  return fading_from_uniform(std::generate_canonical<Scalar, std::numeric_limits<Scalar>::digits>(rng));
}

/// Shannon rate W log2(1 + SINR) in bit/s.
template <typename Scalar>
Scalar link_rate(Scalar bandwidth_hz, Scalar sinr) {
  return bandwidth_hz * std::log1p(sinr) / std::numbers::ln2_v<Scalar>;
}

}  // namespace vnet
