#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "sprx/config.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

using cplx = std::complex<float>;
using Rng = std::mt19937_64;

/// Mixes a base seed with stream identifiers (splitmix64 finalizer), so
/// independent streams can be derived from one experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

enum class Modulation { Qpsk, Qam16 };

std::size_t bits_per_symbol(Modulation m);
std::string_view to_string(Modulation m);
Modulation modulation_from_string(std::string_view name);

/// Dense M x N complex matrix, row = OFDM symbol, column = subcarrier.
struct ComplexGrid {
  std::size_t rows = 0, cols = 0;
  std::vector<cplx> values;

  ComplexGrid() = default;
  ComplexGrid(std::size_t r, std::size_t c, cplx fill = {}) : rows(r), cols(c), values(r * c, fill) {}
  cplx& operator()(std::size_t m, std::size_t n) { return values[m * cols + n]; }
  const cplx& operator()(std::size_t m, std::size_t n) const { return values[m * cols + n]; }
};

struct GridConfig {
  std::size_t symbols = 14;
  std::size_t subcarriers = 24;
  Modulation modulation = Modulation::Qpsk;
  std::vector<std::size_t> dmrs_symbols{3};
  double subcarrier_spacing_hz = 15000.0;
  double symbol_duration_s = 1e-3 / 14.0;

  /// Throws std::invalid_argument on an empty or out-of-range DMRS set.
  void validate() const;
  bool is_pilot_row(std::size_t m) const;
  std::vector<std::size_t> data_rows() const;
  std::size_t data_symbols() const { return symbols - dmrs_symbols.size(); }
  std::size_t bits_per_symbol() const { return sprx::bits_per_symbol(modulation); }
  std::size_t payload_bits() const { return bits_per_symbol() * data_symbols() * subcarriers; }
};

/// A slot in the frequency domain. Payload bits are ordered data row first,
/// then subcarrier, then bit index within the symbol.
struct ResourceGrid {
  ComplexGrid values;
  std::vector<std::uint8_t> pilot_mask;  // M*N, 1 at DMRS resource elements
  ComplexGrid pilot_grid;                // pilot values at DMRS REs, 0 elsewhere
  std::vector<std::uint8_t> payload_bits;
};

/// Gray-mapped unit-energy constellation. Point i carries bit l = (i >> l) & 1;
/// even bits select the in-phase level and odd bits the quadrature level, with
/// per-axis mapping 0 -> +, 1 -> - for the sign and inner/outer for 16-QAM.
const std::vector<cplx>& constellation(Modulation m);
cplx map_bits(std::span<const std::uint8_t> bits, Modulation m);

std::vector<std::uint8_t> random_bits(std::size_t count, Rng& rng);

/// Gray-maps `bits` onto data REs and places random unit-energy QPSK pilots on
/// every subcarrier of each DMRS symbol.
ResourceGrid build_slot(const GridConfig& config, std::span<const std::uint8_t> bits, Rng& rng);

/// Noise variance for unit-energy uncoded symbols: N0 = 1 / (Bt * 10^(EbN0/10)).
double ebno_to_n0(double ebno_db, const GridConfig& config);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
