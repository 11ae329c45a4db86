#include "sprx/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

std::size_t bits_per_symbol(Modulation m) { return m == Modulation::Qpsk ? 2 : 4; }

std::string_view to_string(Modulation m) { return m == Modulation::Qpsk ? "qpsk" : "16qam"; }

Modulation modulation_from_string(std::string_view name) {
  if (name == "qpsk") return Modulation::Qpsk;
  if (name == "16qam") return Modulation::Qam16;
  throw std::invalid_argument("unknown modulation '" + std::string(name) + "'");
}

void GridConfig::validate() const {
  if (symbols == 0 || subcarriers == 0) throw std::invalid_argument("grid must have at least one symbol and subcarrier");
  if (dmrs_symbols.empty()) throw std::invalid_argument("at least one DMRS symbol is required");
  for (std::size_t i = 0; i < dmrs_symbols.size(); ++i) {
    if (dmrs_symbols[i] >= symbols)
      throw std::invalid_argument("DMRS symbol " + std::to_string(dmrs_symbols[i]) + " outside the slot");
    if (i > 0 && dmrs_symbols[i] <= dmrs_symbols[i - 1])
      throw std::invalid_argument("DMRS symbols must be strictly increasing");
  }
}

bool GridConfig::is_pilot_row(std::size_t m) const {
  return std::find(dmrs_symbols.begin(), dmrs_symbols.end(), m) != dmrs_symbols.end();
}

std::vector<std::size_t> GridConfig::data_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t m = 0; m < symbols; ++m)
    if (!is_pilot_row(m)) rows.push_back(m);
  return rows;
}

namespace {

std::vector<cplx> make_constellation(Modulation m) {
  const std::size_t bt = bits_per_symbol(m);
  std::vector<cplx> points(std::size_t{1} << bt);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto bit = [i](std::size_t l) { return static_cast<float>((i >> l) & 1U); };
    if (m == Modulation::Qpsk) {
      const float a = 1.0f / std::sqrt(2.0f);
      points[i] = {a * (1 - 2 * bit(0)), a * (1 - 2 * bit(1))};
    } else {
      const float a = 1.0f / std::sqrt(10.0f);
      points[i] = {a * (1 - 2 * bit(0)) * (2 - (1 - 2 * bit(2))), a * (1 - 2 * bit(1)) * (2 - (1 - 2 * bit(3)))};
    }
  }
  return points;
}

}  // namespace

const std::vector<cplx>& constellation(Modulation m) {
  static const std::vector<cplx> qpsk = make_constellation(Modulation::Qpsk);
  static const std::vector<cplx> qam16 = make_constellation(Modulation::Qam16);
  return m == Modulation::Qpsk ? qpsk : qam16;
}

cplx map_bits(std::span<const std::uint8_t> bits, Modulation m) {
  if (bits.size() != bits_per_symbol(m)) throw std::invalid_argument("map_bits: wrong number of bits");
  std::size_t index = 0;
  for (std::size_t l = 0; l < bits.size(); ++l) index |= static_cast<std::size_t>(bits[l] & 1U) << l;
  return constellation(m)[index];
}

std::vector<std::uint8_t> random_bits(std::size_t count, Rng& rng) {
  std::vector<std::uint8_t> bits(count);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return bits;
}

ResourceGrid build_slot(const GridConfig& config, std::span<const std::uint8_t> bits, Rng& rng) {
  config.validate();
  if (bits.size() != config.payload_bits()) {
    throw std::invalid_argument("build_slot: expected " + std::to_string(config.payload_bits()) +
                                " payload bits, got " + std::to_string(bits.size()));
  }
  const std::size_t m_n = config.symbols, n_n = config.subcarriers, bt = config.bits_per_symbol();
  ResourceGrid g;
  g.values = ComplexGrid(m_n, n_n);
  g.pilot_grid = ComplexGrid(m_n, n_n);
  g.pilot_mask.assign(m_n * n_n, 0);
  g.payload_bits.assign(bits.begin(), bits.end());

  const auto& qpsk = constellation(Modulation::Qpsk);
  std::size_t cursor = 0;
  for (std::size_t m = 0; m < m_n; ++m) {
    const bool pilot = config.is_pilot_row(m);
    for (std::size_t n = 0; n < n_n; ++n) {
      if (pilot) {
        const cplx p = qpsk[rng() & 3U];
        g.values(m, n) = p;
        g.pilot_grid(m, n) = p;
        g.pilot_mask[m * n_n + n] = 1;
      } else {
        g.values(m, n) = map_bits(bits.subspan(cursor, bt), config.modulation);
        cursor += bt;
      }
    }
  }
  return g;
}

double ebno_to_n0(double ebno_db, const GridConfig& config) {
  return 1.0 / (static_cast<double>(config.bits_per_symbol()) * std::pow(10.0, ebno_db / 10.0));
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
