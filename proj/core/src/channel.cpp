#include "sprx/channel.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

TdlProfile normalized(TdlProfile p) {
  const double rms = rms_delay_spread(p);
  for (auto& tap : p.taps) tap.normalized_delay /= rms;
  return p;
}

std::map<std::string, TdlProfile> make_profiles() {
  std::map<std::string, TdlProfile> out;
  out["A"] = normalized({"A", {{0.0, 0.0}, {0.4, -2.2}, {1.1, -4.0}, {2.0, -7.5}, {3.1, -12.0}}, std::nullopt});
  out["B"] = normalized({"B", {{0.0, 0.0}, {0.3, -1.5}, {0.9, -4.5}, {1.8, -9.0}}, std::nullopt});
  out["C"] = normalized({"C", {{0.0, -1.0}, {0.6, 0.0}, {1.5, -6.0}}, std::nullopt});
  out["D"] = normalized({"D", {{0.0, -1.0}, {0.5, -4.0}, {1.6, -9.0}}, 13.3});
  out["E"] = normalized({"E", {{0.0, -0.5}, {0.7, -5.0}, {2.2, -11.0}}, 22.0});
  return out;
}

const std::map<std::string, TdlProfile>& profiles() {
  static const auto table = make_profiles();
  return table;
}

/// Linear tap powers including the LOS share, summing to 1. Index 0 is the LOS
/// component when present.
std::vector<std::pair<double, double>> linear_taps(const TdlProfile& profile) {
  std::vector<std::pair<double, double>> taps;  // (delay, power)
  double total = 0.0;
  for (const auto& t : profile.taps) total += std::pow(10.0, t.power_db / 10.0);
  double nlos_share = 1.0;
  if (profile.los_k_db) {
    const double k = std::pow(10.0, *profile.los_k_db / 10.0);
    nlos_share = 1.0 / (1.0 + k);
    taps.emplace_back(0.0, k / (1.0 + k));
  }
  for (const auto& t : profile.taps)
    taps.emplace_back(t.normalized_delay, nlos_share * std::pow(10.0, t.power_db / 10.0) / total);
  return taps;
}

}  // namespace

const TdlProfile& tdl_profile(const std::string& name) {
  const auto& table = profiles();
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown channel profile '" + name + "'");
  return it->second;
}

std::vector<std::string> tdl_profile_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : profiles()) names.push_back(name);
  return names;
}

double rms_delay_spread(const TdlProfile& profile) {
  double mean = 0.0, second = 0.0;
  for (const auto& [delay, power] : linear_taps(profile)) {
    mean += power * delay;
    second += power * delay * delay;
  }
  return std::sqrt(std::max(0.0, second - mean * mean));
}

std::complex<double> PathTap::gain(double t, double doppler_hz) const {
  std::complex<double> acc{};
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const double arg = kTwoPi * doppler_hz * doppler_cos[i] * t + phases[i];
    acc += std::complex<double>(std::cos(arg), std::sin(arg));
  }
  return acc * std::sqrt(power / static_cast<double>(phases.size()));
}

ChannelRealization sample_channel(const TdlProfile& profile, double delay_spread_s, double doppler_hz,
                                  const GridConfig& grid, Rng& rng, double noise_var) {
  if (delay_spread_s < 0.0) throw std::invalid_argument("sample_channel: negative delay spread");
  if (doppler_hz < 0.0) throw std::invalid_argument("sample_channel: negative Doppler");
  if (noise_var < 0.0) throw std::invalid_argument("sample_channel: negative noise variance");
  if (profile.taps.empty()) throw std::invalid_argument("sample_channel: profile has no taps");
  grid.validate();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ChannelRealization ch;
  ch.doppler_hz = doppler_hz;
  ch.delay_spread_s = delay_spread_s;
  ch.noise_var = noise_var;

  const bool los = profile.los_k_db.has_value();
  const auto taps = linear_taps(profile);
  for (std::size_t k = 0; k < taps.size(); ++k) {
    PathTap tap;
    tap.delay_s = taps[k].first * delay_spread_s;
    tap.power = taps[k].second;
    tap.line_of_sight = los && k == 0;
    if (tap.line_of_sight) {
      tap.doppler_cos.push_back(1.0);
      tap.phases.push_back(kTwoPi * unit(rng));
    } else {
      const double offset = kTwoPi * unit(rng);
      for (std::size_t i = 0; i < kDopplerSinusoids; ++i) {
        const double alpha = (kTwoPi * (static_cast<double>(i) + unit(rng))) / kDopplerSinusoids + offset;
        tap.doppler_cos.push_back(std::cos(alpha));
        tap.phases.push_back(kTwoPi * unit(rng));
      }
    }
    ch.taps.push_back(std::move(tap));
  }

  ch.response = ComplexGrid(grid.symbols, grid.subcarriers);
  std::vector<std::complex<double>> gains(ch.taps.size());
  for (std::size_t m = 0; m < grid.symbols; ++m) {
    const double t = static_cast<double>(m) * grid.symbol_duration_s;
    for (std::size_t k = 0; k < ch.taps.size(); ++k) gains[k] = ch.taps[k].gain(t, doppler_hz);
    for (std::size_t n = 0; n < grid.subcarriers; ++n) {
      const double f = static_cast<double>(n) * grid.subcarrier_spacing_hz;
      std::complex<double> h{};
      for (std::size_t k = 0; k < ch.taps.size(); ++k) {
        const double phase = -kTwoPi * f * ch.taps[k].delay_s;
        h += gains[k] * std::complex<double>(std::cos(phase), std::sin(phase));
      }
      ch.response(m, n) = cplx(static_cast<float>(h.real()), static_cast<float>(h.imag()));
    }
  }
  return ch;
}

ChannelRealization flat_channel(const GridConfig& grid, cplx gain, double noise_var) {
  if (noise_var < 0.0) throw std::invalid_argument("flat_channel: negative noise variance");
  ChannelRealization ch;
  ch.response = ComplexGrid(grid.symbols, grid.subcarriers, gain);
  ch.noise_var = noise_var;
  return ch;
}

ResourceGrid transmit(const ResourceGrid& grid, const ChannelRealization& channel, Rng& rng) {
  if (grid.values.rows != channel.response.rows || grid.values.cols != channel.response.cols)
    throw std::invalid_argument("transmit: grid and channel dimensions differ");
  ResourceGrid out = grid;
  const double sd = std::sqrt(channel.noise_var / 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < out.values.values.size(); ++i) {
    cplx y = channel.response.values[i] * grid.values.values[i];
    if (sd > 0.0) y += cplx(static_cast<float>(sd * normal(rng)), static_cast<float>(sd * normal(rng)));
    out.values.values[i] = y;
  }
  return out;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
