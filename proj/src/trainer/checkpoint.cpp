#include "khgt/trainer/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "khgt/errors.hpp"

namespace khgt::trainer {

namespace {

constexpr std::array<char, 4> kMagic{'K', 'H', 'G', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
bool get(std::istream& in, T& value) {
  value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) return false;
    value |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(c)) << (8 * i));
  }
  return true;
}

template <typename T>
T need(std::istream& in, const char* what) {
  T v;
  if (!get(in, v)) throw ValidationError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  const model::Hyper& h = params.hyper;
  for (std::uint32_t v : {h.dim, h.heads, h.channels, h.layers, h.behaviors, h.relations, h.users, h.items})
    put<std::uint32_t>(out, v);
  for (const auto& [name, t] : params.tensors) {
    if (name.size() > 0xFFFF) throw ContractError("tensor name too long: " + name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape().size()));
    for (std::size_t dim : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    for (double x : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

ModelParams read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw ValidationError("not a checkpoint (bad magic)");
  const auto version = need<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  ModelParams p;
  model::Hyper& h = p.hyper;
  for (std::uint32_t* field : {&h.dim, &h.heads, &h.channels, &h.layers, &h.behaviors, &h.relations, &h.users, &h.items})
    *field = need<std::uint32_t>(in, "header");
  try {
    model::validate(h);
  } catch (const ContractError& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  }
  std::uint16_t name_len;
  while (get(in, name_len)) {
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len) throw ValidationError("checkpoint truncated in tensor name");
    const auto rank = need<std::uint8_t>(in, "rank");
    numerics::Shape shape(rank);
    for (auto& dim : shape) dim = need<std::uint32_t>(in, "shape");
    numerics::Tensor t(shape);
    for (double& x : t.data()) x = std::bit_cast<float>(need<std::uint32_t>(in, name.c_str()));
    if (!p.tensors.emplace(std::move(name), std::move(t)).second) throw ValidationError("duplicate tensor in checkpoint");
  }
  const ModelParams expected = model::init_params(h, 0);
  for (const auto& [name, t] : expected.tensors) {
    const auto it = p.tensors.find(name);
    if (it == p.tensors.end()) throw ValidationError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + numerics::shape_string(it->second.shape()) +
                            ", expected " + numerics::shape_string(t.shape()));
  }
  if (p.tensors.size() != expected.tensors.size()) throw ValidationError("checkpoint has unexpected tensors");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void write_loss_history(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,mean_loss,learning_rate\n";
  out << std::setprecision(9);
  for (const auto& e : history) out << e.epoch << ',' << e.mean_loss << ',' << e.learning_rate << '\n';
}

}  // namespace khgt::trainer
