#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "foley/models.hpp"

namespace foley {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (little-endian): magic "FOLEYCK\0", u32 version, every
// ModelConfig field, u32 tensor count, then per tensor its name, rank, u64
// extents and float32 values in parameter-store order.
void write_checkpoint(const Model& model, std::ostream& out);
std::unique_ptr<Model> read_checkpoint(std::istream& in);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

}  // namespace foley
