#include "sprx/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace {

void check_range(const std::array<double, 2>& r, const char* name, double lo, double hi) {
  if (!(r[0] <= r[1])) throw std::invalid_argument(std::string(name) + ": lower bound exceeds upper bound");
  if (r[0] < lo || r[1] > hi)
    throw std::invalid_argument(std::string(name) + ": must lie in [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
}

double uniform(const std::array<double, 2>& r, Rng& rng) {
  return std::uniform_real_distribution<double>(r[0], r[1])(rng);
}

}  // namespace

void LinkRanges::validate() const {
  if (profiles.empty()) throw std::invalid_argument("profiles: at least one channel profile is required");
  for (const auto& p : profiles) tdl_profile(p);
  check_range(ebno_db, "ebno_db", -10.0, 40.0);
  check_range(delay_ns, "delay_ns", 10.0, 300.0);
  check_range(doppler_hz, "doppler_hz", 0.0, 500.0);
}

SlotSample draw_slot_at(const GridConfig& grid, const std::string& profile, double delay_ns, double doppler_hz,
                        double ebno_db, Rng& rng) {
  const double n0 = ebno_to_n0(ebno_db, grid);
  const auto bits = random_bits(grid.payload_bits(), rng);
  const ResourceGrid tx = build_slot(grid, bits, rng);
  const ChannelRealization ch = sample_channel(tdl_profile(profile), delay_ns * 1e-9, doppler_hz, grid, rng, n0);
  SlotSample s;
  s.received = transmit(tx, ch, rng);
  s.channel = ch.response;
  s.delay_ns = static_cast<float>(delay_ns);
  s.doppler_hz = static_cast<float>(doppler_hz);
  s.ebno_db = static_cast<float>(ebno_db);
  s.noise_var = static_cast<float>(n0);
  return s;
}

SlotSample draw_slot(const GridConfig& grid, const LinkRanges& ranges, Rng& rng) {
  const auto index = std::uniform_int_distribution<std::size_t>(0, ranges.profiles.size() - 1)(rng);
  const double delay = uniform(ranges.delay_ns, rng);
  const double doppler = uniform(ranges.doppler_hz, rng);
  const double ebno = uniform(ranges.ebno_db, rng);
  SlotSample s = draw_slot_at(grid, ranges.profiles[index], delay, doppler, ebno, rng);
  s.profile = static_cast<std::uint32_t>(index);
  return s;
}

nlohmann::json to_json(const GridConfig& grid) {
  return {{"symbols", grid.symbols},
          {"subcarriers", grid.subcarriers},
          {"modulation", std::string(to_string(grid.modulation))},
          {"dmrs_symbols", grid.dmrs_symbols},
          {"subcarrier_spacing_hz", grid.subcarrier_spacing_hz},
          {"symbol_duration_s", grid.symbol_duration_s}};
}

GridConfig grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("grid: expected an object");
  GridConfig g;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "symbols") g.symbols = value.get<std::size_t>();
      else if (key == "subcarriers") g.subcarriers = value.get<std::size_t>();
      else if (key == "modulation") g.modulation = modulation_from_string(value.get<std::string>());
      else if (key == "dmrs_symbols") g.dmrs_symbols = value.get<std::vector<std::size_t>>();
      else if (key == "subcarrier_spacing_hz") g.subcarrier_spacing_hz = value.get<double>();
      else if (key == "symbol_duration_s") g.symbol_duration_s = value.get<double>();
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("grid." + key + ": " + e.what());
    }
  }
  g.validate();
  return g;
}

std::size_t record_size(const GridConfig& grid) {
  const std::size_t re = grid.symbols * grid.subcarriers;
  return 3 * re * 2 * sizeof(float) + grid.payload_bits() + sizeof(std::uint32_t) + 4 * sizeof(float);
}

namespace {

template <class T>
void put(std::vector<char>& buf, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <class T>
T take(const char*& p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  p += sizeof(T);
  return value;
}

void put_grid(std::vector<char>& buf, const ComplexGrid& g) {
  for (const cplx& v : g.values) {
    put<float>(buf, v.real());
    put<float>(buf, v.imag());
  }
}

ComplexGrid take_grid(const char*& p, std::size_t rows, std::size_t cols) {
  ComplexGrid g(rows, cols);
  for (cplx& v : g.values) {
    const float re = take<float>(p);
    v = cplx(re, take<float>(p));
  }
  return g;
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}

}  // namespace

void write_dataset(const std::filesystem::path& stem, const Dataset& data) {
  data.grid.validate();
  const std::size_t rs = record_size(data.grid);
  std::vector<char> buf;
  buf.reserve(rs * data.slots.size());
  for (const auto& s : data.slots) {
    if (s.received.values.rows != data.grid.symbols || s.received.values.cols != data.grid.subcarriers ||
        s.received.payload_bits.size() != data.grid.payload_bits())
      throw std::invalid_argument("write_dataset: slot does not match the grid configuration");
    put_grid(buf, s.received.values);
    put_grid(buf, s.received.pilot_grid);
    put_grid(buf, s.channel);
    for (auto b : s.received.payload_bits) buf.push_back(static_cast<char>(b));
    put<std::uint32_t>(buf, s.profile);
    put<float>(buf, s.delay_ns);
    put<float>(buf, s.doppler_hz);
    put<float>(buf, s.ebno_db);
    put<float>(buf, s.noise_var);
  }
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary | std::ios::trunc);
  bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!bin) throw std::runtime_error("failed to write " + with_ext(stem, ".bin").string());

  nlohmann::json side = {{"format_version", 1},
                         {"grid", to_json(data.grid)},
                         {"profiles", data.profiles},
                         {"slots", data.slots.size()},
                         {"record_bytes", rs}};
  std::ofstream js(with_ext(stem, ".json"), std::ios::trunc);
  js << side.dump(2) << '\n';
  if (!js) throw std::runtime_error("failed to write " + with_ext(stem, ".json").string());
}

Dataset read_dataset(const std::filesystem::path& stem) {
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw std::runtime_error("cannot open " + with_ext(stem, ".json").string());
  const auto side = nlohmann::json::parse(js);
  if (side.at("format_version").get<int>() != 1) throw std::runtime_error("unsupported dataset format version");
  Dataset d;
  d.grid = grid_from_json(side.at("grid"));
  d.profiles = side.at("profiles").get<std::vector<std::string>>();
  const auto count = side.at("slots").get<std::size_t>();
  const std::size_t rs = record_size(d.grid);
  if (side.at("record_bytes").get<std::size_t>() != rs) throw std::runtime_error("dataset record size mismatch");

  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + with_ext(stem, ".bin").string());
  std::vector<char> buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (buf.size() != rs * count)
    throw std::runtime_error("dataset holds " + std::to_string(buf.size()) + " bytes, sidecar expects " +
                             std::to_string(rs * count));

  const std::size_t m_n = d.grid.symbols, n_n = d.grid.subcarriers;
  const char* p = buf.data();
  d.slots.resize(count);
  for (auto& s : d.slots) {
    s.received.values = take_grid(p, m_n, n_n);
    s.received.pilot_grid = take_grid(p, m_n, n_n);
    s.channel = take_grid(p, m_n, n_n);
    s.received.pilot_mask.assign(m_n * n_n, 0);
    for (std::size_t m : d.grid.dmrs_symbols)
      for (std::size_t n = 0; n < n_n; ++n) s.received.pilot_mask[m * n_n + n] = 1;
    s.received.payload_bits.assign(reinterpret_cast<const std::uint8_t*>(p),
                                   reinterpret_cast<const std::uint8_t*>(p) + d.grid.payload_bits());
    p += d.grid.payload_bits();
    s.profile = take<std::uint32_t>(p);
    if (s.profile >= d.profiles.size()) throw std::runtime_error("dataset record has an invalid profile index");
    s.delay_ns = take<float>(p);
    s.doppler_hz = take<float>(p);
    s.ebno_db = take<float>(p);
    s.noise_var = take<float>(p);
  }
  return d;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
