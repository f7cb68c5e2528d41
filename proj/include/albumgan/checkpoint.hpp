#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "albumgan/nn.hpp"

namespace albumgan {

/// Container layout, all integers little-endian:
///   magic "AGCK" | version u8 | record count u32 |
///   per record: name length u32, utf-8 name, rank u32, dims u32[rank], f32 data.
inline constexpr char kCheckpointMagic[4] = {'A', 'G', 'C', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<nn::NamedTensor>& arrays);
std::vector<nn::NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<nn::NamedTensor>& arrays);
std::vector<nn::NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace albumgan
