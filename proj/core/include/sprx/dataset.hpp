#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sprx/channel.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

/// Ranges that randomized slots are drawn from. Each slot picks a profile and
/// then delay spread, Doppler and Eb/N0 uniformly and independently.
struct LinkRanges {
  std::vector<std::string> profiles{"A", "C", "E"};
  std::array<double, 2> ebno_db{0.0, 20.0};
  std::array<double, 2> delay_ns{10.0, 300.0};
  std::array<double, 2> doppler_hz{0.0, 500.0};

  void validate() const;
};

/// A received slot together with the channel it went through.
struct SlotSample {
  ResourceGrid received;  // payload_bits hold the transmitted bits
  ComplexGrid channel;    // true H
  std::uint32_t profile = 0;  // index into LinkRanges::profiles
  float delay_ns = 0, doppler_hz = 0, ebno_db = 0, noise_var = 0;
};

/// Draws one slot: random bits, grid, channel and noise, in a fixed order so
/// a seeded generator reproduces it exactly.
SlotSample draw_slot(const GridConfig& grid, const LinkRanges& ranges, Rng& rng);

/// Draws a slot with fixed channel parameters.
SlotSample draw_slot_at(const GridConfig& grid, const std::string& profile, double delay_ns, double doppler_hz,
                        double ebno_db, Rng& rng);

nlohmann::json to_json(const GridConfig& grid);
/// Strict: unknown keys and wrong types raise std::invalid_argument naming the key.
GridConfig grid_from_json(const nlohmann::json& j);

struct Dataset {
  GridConfig grid;
  std::vector<std::string> profiles;
  std::vector<SlotSample> slots;
};

/// Bytes per record for `grid`.
std::size_t record_size(const GridConfig& grid);

/// Writes `<stem>.bin` (fixed-size little-endian records) and `<stem>.json`.
///
/// Record layout: received grid, pilot grid and channel as interleaved
/// re/im float32 (M*N each, row-major), payload bits as one byte each, then
/// u32 profile index and float32 delay_ns, doppler_hz, ebno_db, noise_var.
void write_dataset(const std::filesystem::path& stem, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& stem);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
