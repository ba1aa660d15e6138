#include "prcnn/checkpoint.hpp"

#include "binary.hpp"

#include <fstream>
#include <limits>

namespace prcnn {

void save_checkpoint(const nn::ParameterMap<float>& weights, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write("PRCW", 4);
  binary::put_u32(os, kCheckpointVersion);
  for (const auto& [name, t] : weights) {
    binary::put_u32(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    binary::put_u32(os, std::uint32_t(t.shape.size()));
    for (auto d : t.shape) binary::put_u32(os, std::uint32_t(d));
    for (nn::Index i = 0; i < t.size(); ++i) binary::put_f32(os, t.data[i]);
  }
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

nn::ParameterMap<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "PRCW")
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  const std::uint32_t version = binary::get_u32(is, "checkpoint header");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  nn::ParameterMap<float> out;
  std::uint32_t name_len;
  while (binary::try_get_u32(is, name_len, "checkpoint record")) {
    if (name_len == 0 || name_len > 4096) throw FormatError("corrupt checkpoint record name");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (is.gcount() != std::streamsize(name_len)) throw FormatError("truncated checkpoint name");
    const std::uint32_t rank = binary::get_u32(is, "checkpoint rank");
    if (rank > 8) throw FormatError("corrupt checkpoint rank for " + name);
    nn::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(nn::Index(binary::get_u32(is, "checkpoint dims")));
    nn::Tensor<float> t(shape);
    for (nn::Index i = 0; i < t.size(); ++i) t.data[i] = binary::get_f32(is, "checkpoint payload of " + name);
    if (!out.emplace(name, std::move(t)).second) throw FormatError("duplicate checkpoint tensor " + name);
  }
  return out;
}

}  // namespace prcnn
