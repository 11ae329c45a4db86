#include "sprx/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace {

// Keeps the demapper well defined on noiseless inputs.
constexpr double kMinNoiseVar = 1e-9;

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

LlrGrid equalize_and_demap(const ResourceGrid& received, const ComplexGrid& h, const std::vector<double>& noise,
                           const GridConfig& config) {
  const std::size_t bt = config.bits_per_symbol();
  LlrGrid out;
  out.rows = config.data_symbols();
  out.cols = config.subcarriers;
  out.bits = bt;
  out.llr.resize(out.rows * out.cols * bt);
  std::size_t row = 0;
  for (std::size_t m : config.data_rows()) {
    for (std::size_t n = 0; n < config.subcarriers; ++n) {
      const std::size_t i = m * config.subcarriers + n;
      const Equalized eq = lmmse_equalize(received.values.values[i], h.values[i], noise[i]);
      // Undo the LMMSE shrinkage so the demapper sees an unbiased symbol.
      const double g = std::max(1.0 - eq.post_eq_var, 1e-12);
      const cplx x = eq.x_hat / static_cast<float>(g);
      const double var = std::max(eq.post_eq_var / g, kMinNoiseVar);
      const auto llr = demap_llr(x, var, config.modulation);
      for (std::size_t l = 0; l < bt; ++l) out.at(row, n, l) = static_cast<float>(llr[l]);
    }
    ++row;
  }
  return out;
}

}  // namespace

ChannelEstimate ls_estimate(const ResourceGrid& received, double noise_var) {
  if (noise_var < 0.0) throw std::invalid_argument("ls_estimate: negative noise variance");
  const std::size_t rows = received.values.rows, cols = received.values.cols;
  ChannelEstimate est;
  est.h_hat = ComplexGrid(rows, cols);
  est.err_var.assign(rows * cols, 0.0);
  est.known.assign(rows * cols, 0);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    if (!received.pilot_mask[i]) continue;
    const cplx p = received.pilot_grid.values[i];
    const double p2 = std::norm(p);
    if (p2 == 0.0) throw std::invalid_argument("ls_estimate: zero pilot at RE " + std::to_string(i));
    est.h_hat.values[i] = received.values.values[i] * std::conj(p) / static_cast<float>(p2);
    est.err_var[i] = noise_var / p2;
    est.known[i] = 1;
  }
  return est;
}

ChannelEstimate interpolate(const ChannelEstimate& est, const GridConfig& config) {
  config.validate();
  const auto& pilots = config.dmrs_symbols;
  const std::size_t cols = config.subcarriers;
  ChannelEstimate out = est;
  out.known.assign(config.symbols * cols, 1);
  for (std::size_t m = 0; m < config.symbols; ++m) {
    if (config.is_pilot_row(m)) continue;
    // Bracketing pilot rows; equal when extrapolating.
    std::size_t lo = pilots.front(), hi = pilots.back();
    if (m < pilots.front()) {
      hi = lo;
    } else if (m > pilots.back()) {
      lo = hi;
    } else {
      auto it = std::upper_bound(pilots.begin(), pilots.end(), m);
      hi = *it;
      lo = *(it - 1);
    }
    const double w = hi == lo ? 0.0 : static_cast<double>(m - lo) / static_cast<double>(hi - lo);
    for (std::size_t n = 0; n < cols; ++n) {
      const cplx a = est.h_hat(lo, n), b = est.h_hat(hi, n);
      out.h_hat(m, n) = a + static_cast<float>(w) * (b - a);
      const double va = est.err_var[lo * cols + n], vb = est.err_var[hi * cols + n];
      out.err_var[m * cols + n] = va + w * (vb - va);
    }
  }
  return out;
}

Equalized lmmse_equalize(cplx y, cplx h_hat, double noise_var) {
  if (noise_var < 0.0) throw std::invalid_argument("lmmse_equalize: negative noise variance");
  const double h2 = std::norm(h_hat);
  const double den = h2 + noise_var;
  if (den == 0.0) throw std::invalid_argument("lmmse_equalize: zero channel with zero noise");
  const std::complex<double> x = std::conj(std::complex<double>(h_hat)) * std::complex<double>(y) / den;
  return {cplx(static_cast<float>(x.real()), static_cast<float>(x.imag())), noise_var / den};
}

std::vector<double> demap_llr(cplx x_hat, double eff_noise_var, Modulation modulation) {
  if (!(eff_noise_var > 0.0)) throw std::invalid_argument("demap_llr: noise variance must be positive");
  const auto& points = constellation(modulation);
  const std::size_t bt = bits_per_symbol(modulation);
  std::vector<double> metric(points.size());
  const std::complex<double> x(x_hat);
  for (std::size_t i = 0; i < points.size(); ++i)
    metric[i] = -std::norm(x - std::complex<double>(points[i])) / eff_noise_var;

  std::vector<double> llr(bt);
  std::vector<double> one, zero;
  for (std::size_t l = 0; l < bt; ++l) {
    one.clear();
    zero.clear();
    for (std::size_t i = 0; i < points.size(); ++i) ((i >> l) & 1U ? one : zero).push_back(metric[i]);
    llr[l] = log_sum_exp(one) - log_sum_exp(zero);
  }
  return llr;
}

LlrGrid ls_receiver(const ResourceGrid& received, double noise_var, const GridConfig& config) {
  const ChannelEstimate est = interpolate(ls_estimate(received, noise_var), config);
  std::vector<double> noise(est.err_var.size());
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noise_var + est.err_var[i];
  return equalize_and_demap(received, est.h_hat, noise, config);
}

LlrGrid genie_receiver(const ResourceGrid& received, const ComplexGrid& channel, double noise_var,
                       const GridConfig& config) {
  if (noise_var < 0.0) throw std::invalid_argument("genie_receiver: negative noise variance");
  std::vector<double> noise(channel.values.size(), noise_var);
  return equalize_and_demap(received, channel, noise, config);
}

std::vector<std::uint8_t> hard_decisions(const LlrGrid& llr) {
  std::vector<std::uint8_t> bits(llr.llr.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = llr.llr[i] > 0.0f ? 1 : 0;
  return bits;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
