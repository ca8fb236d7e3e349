#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "khgt/model/params.hpp"
#include "khgt/trainer/trainer.hpp"

namespace khgt::trainer {

/// Binary layout, little-endian: "KHGT", u32 version, u32 d, H, M, L, K, R,
/// I, J, then one record per tensor until EOF: u16 name length, name bytes,
/// u8 rank, u32 dims, f32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
/// Throws ValidationError naming the path when it does not exist.
ModelParams load_checkpoint(const std::filesystem::path& path);

/// CSV with header `epoch,mean_loss,learning_rate`.
void write_loss_history(std::ostream& out, const std::vector<EpochStats>& history);

}  // namespace khgt::trainer
