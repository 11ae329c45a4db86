#pragma once

#include <vector>

#include "sprx/ofdm.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

struct ChannelEstimate {
  ComplexGrid h_hat;
  std::vector<double> err_var;  // M*N, row-major
  std::vector<std::uint8_t> known;  // M*N, 1 where the estimate is populated
};

/// Per-bit LLRs over data REs, ordered [data row][subcarrier][bit] like the
/// payload. Sign convention: log(P(b=1)/P(b=0)).
struct LlrGrid {
  std::size_t rows = 0, cols = 0, bits = 0;
  std::vector<float> llr;

  float& at(std::size_t m, std::size_t n, std::size_t l) { return llr[(m * cols + n) * bits + l]; }
  float at(std::size_t m, std::size_t n, std::size_t l) const { return llr[(m * cols + n) * bits + l]; }
};

/// h = y p* / |p|^2 and err_var = N0 / |p|^2 at pilot REs.
ChannelEstimate ls_estimate(const ResourceGrid& received, double noise_var);

/// Linear interpolation along the symbol axis between DMRS rows, constant
/// extrapolation outside them. err_var is interpolated the same way.
ChannelEstimate interpolate(const ChannelEstimate& est, const GridConfig& config);

struct Equalized {
  cplx x_hat;
  double post_eq_var = 0.0;
};

/// x = h* y / (|h|^2 + s2), post_eq_var = s2 / (|h|^2 + s2).
Equalized lmmse_equalize(cplx y, cplx h_hat, double noise_var);

/// Exact log-sum-exp LLRs of one symbol observed as x_hat + CN(0, eff_noise_var).
std::vector<double> demap_llr(cplx x_hat, double eff_noise_var, Modulation modulation);

/// LS estimate, interpolation, LMMSE with the estimation error added to the
/// noise, bias removal, and exact demapping.
LlrGrid ls_receiver(const ResourceGrid& received, double noise_var, const GridConfig& config);

/// Same chain with the true channel and no estimation error.
LlrGrid genie_receiver(const ResourceGrid& received, const ComplexGrid& channel, double noise_var,
                       const GridConfig& config);

/// 1 where llr > 0, in payload order.
std::vector<std::uint8_t> hard_decisions(const LlrGrid& llr);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
