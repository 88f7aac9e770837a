#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cainet/parameter.hpp"

namespace cainet {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'I', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout: magic "CAINETCK", u32 version, then per parameter in sorted-name
/// order: u32 name length, name bytes, u32 rank, u64 extents, f32 data. All
/// integers and floats little-endian.
void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path);

/// Reads every tensor of a checkpoint, keyed by name.
std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path);

struct LoadReport {
    std::size_t loaded = 0;
    std::size_t skipped = 0;  ///< entries not copied (unknown name or filtered out)
};

/// Copies matching entries into `params`, restricted to names starting with
/// one of `prefixes` when that list is non-empty. Extent mismatches raise.
LoadReport load_checkpoint(ParameterStore& params, const std::filesystem::path& path,
                           const std::vector<std::string>& prefixes = {});

}  // namespace cainet
