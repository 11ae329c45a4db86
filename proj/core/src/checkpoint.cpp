#include "sprx/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'R', 'X', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_block(std::string& buf, const std::string& name, const Tensor& t) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
  buf += name;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.dim()));
  for (std::size_t e : t.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(e));
  put<std::uint64_t>(buf, t.numel());
  for (real v : t.data()) put<float>(buf, static_cast<float>(v));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

std::pair<std::string, Tensor> get_block(Reader& r) {
  std::string name = r.bytes(r.get<std::uint32_t>());
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw CheckpointError("block '" + name + "' has implausible rank");
  Shape shape(rank);
  for (auto& e : shape) e = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (count != numel(shape)) throw CheckpointError("block '" + name + "' element count does not match its shape");
  std::vector<real> data(count);
  for (auto& v : data) v = static_cast<real>(r.get<float>());
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  const std::string header = nlohmann::json{{"model", to_json(ckpt.model)}, {"meta", ckpt.meta}}.dump();
  std::string buf(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(header.size()));
  buf += header;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params.entries()) put_block(buf, name, t);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.state.size()));
  for (const auto& [name, t] : ckpt.state) put_block(buf, name, t);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw CheckpointError("failed to write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>()));

  if (r.bytes(kMagic.size()) != std::string(kMagic.begin(), kMagic.end()))
    throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(r.bytes(r.get<std::uint32_t>()));
    ck.model = model_config_from_json(header.at("model"));
    ck.meta = header.at("meta");
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }

  const auto layout = param_layout(ck.model);
  const auto nparams = r.get<std::uint32_t>();
  if (nparams != layout.size())
    throw CheckpointError("checkpoint holds " + std::to_string(nparams) + " parameters, config implies " +
                          std::to_string(layout.size()));
  for (const auto& [name, shape] : layout) {
    auto [stored, t] = get_block(r);
    if (stored != name) throw CheckpointError("expected parameter '" + name + "', found '" + stored + "'");
    if (t.shape() != shape)
      throw CheckpointError("parameter '" + name + "' has shape " + to_string(t.shape()) + ", expected " +
                            to_string(shape));
    t.set_requires_grad(true);
    ck.params.add(name, std::move(t));
  }
  const auto nstate = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nstate; ++i) {
    auto [name, t] = get_block(r);
    ck.state.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint data");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const auto want = to_json(expected), have = to_json(ck.model);
  for (const auto& [key, value] : want.items()) {
    if (have.at(key) != value)
      throw CheckpointError("checkpoint model." + key + " is " + have.at(key).dump() + ", expected " + value.dump());
  }
  return ck;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
