#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sprx/ofdm.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

/// One path of a tapped delay line. Delays are normalized: the realized delay
/// is normalized_delay * delay_spread.
struct TapSpec {
  double normalized_delay = 0.0;
  double power_db = 0.0;
};

/// Simplified tapped-delay-line profile: exponential NLOS taps plus an
/// optional line-of-sight component at zero delay with Rician factor K.
struct TdlProfile {
  std::string name;
  std::vector<TapSpec> taps;
  std::optional<double> los_k_db;
};

/// Built-in profiles "A".."E". A, B, C are NLOS; D and E carry a LOS tap. The
/// built-ins are scaled to unit RMS delay spread.
const TdlProfile& tdl_profile(const std::string& name);
std::vector<std::string> tdl_profile_names();

/// RMS delay spread of a profile in normalized units.
double rms_delay_spread(const TdlProfile& profile);

inline constexpr std::size_t kDopplerSinusoids = 16;

/// A realized path: delay, mean power and its sum-of-sinusoids fading process.
struct PathTap {
  double delay_s = 0.0;
  double power = 0.0;
  bool line_of_sight = false;
  std::vector<double> doppler_cos;  // cos(angle of arrival) per sinusoid
  std::vector<double> phases;       // initial phase per sinusoid

  /// Complex gain at time t for maximum Doppler shift fd.
  std::complex<double> gain(double t, double doppler_hz) const;
};

struct ChannelRealization {
  std::vector<PathTap> taps;
  double doppler_hz = 0.0;
  double delay_spread_s = 0.0;
  ComplexGrid response;  // H[m,n]
  double noise_var = 0.0;
};

/// Draws a channel from `profile`. Tap powers are normalized so E|H|^2 = 1;
/// H[m,n] = sum_k a_k(t_m) exp(-j 2 pi f_n tau_k) with t_m = m * symbol duration
/// and f_n = n * subcarrier spacing. Throws on negative delay spread or Doppler.
ChannelRealization sample_channel(const TdlProfile& profile, double delay_spread_s, double doppler_hz,
                                  const GridConfig& grid, Rng& rng, double noise_var = 0.0);

/// A channel with the same H everywhere (testing and AWGN links).
ChannelRealization flat_channel(const GridConfig& grid, cplx gain, double noise_var);

/// y = H * x + z with z ~ CN(0, noise_var). Pilot layout and payload carry over.
ResourceGrid transmit(const ResourceGrid& grid, const ChannelRealization& channel, Rng& rng);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
