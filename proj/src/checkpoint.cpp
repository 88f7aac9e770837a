#include "cainet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace cainet {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& value) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
    return true;
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le<std::uint32_t>(os, kCheckpointVersion);
    for (const auto& [name, p] : params.all()) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto extent : p.tensor.shape()) put_le<std::uint64_t>(os, extent);
        for (float v : p.tensor.data()) put_le<float>(os, v);
    }
    if (!os) throw CheckpointError("failed writing checkpoint: " + path.string());
}

std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CheckpointError("not a checkpoint (bad magic): " + path.string());
    }
    std::uint32_t version = 0;
    if (!get_le(is, version) || version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
    }
    std::map<std::string, Tensor> out;
    std::uint32_t name_len = 0;
    while (get_le(is, name_len)) {
        std::string name(name_len, '\0');
        std::uint32_t rank = 0;
        if (!is.read(name.data(), name_len) || !get_le(is, rank)) {
            throw CheckpointError("truncated checkpoint entry in " + path.string());
        }
        Shape shape(rank);
        for (auto& extent : shape) {
            std::uint64_t e = 0;
            if (!get_le(is, e)) throw CheckpointError("truncated extents for " + name);
            extent = static_cast<std::size_t>(e);
        }
        std::vector<float> values(shape_numel(shape));
        for (float& v : values) {
            if (!get_le(is, v)) throw CheckpointError("truncated data for " + name);
        }
        out.emplace(name, Tensor::from(std::move(shape), std::move(values)));
    }
    return out;
}

LoadReport load_checkpoint(ParameterStore& params, const std::filesystem::path& path,
                           const std::vector<std::string>& prefixes) {
    LoadReport report;
    auto selected = [&](const std::string& name) {
        if (prefixes.empty()) return true;
        for (const auto& p : prefixes)
            if (name.compare(0, p.size(), p) == 0) return true;
        return false;
    };
    for (auto& [name, t] : read_checkpoint(path)) {
        if (!params.contains(name) || !selected(name)) {
            ++report.skipped;
            continue;
        }
        Tensor& dst = params.get(name).tensor;
        if (dst.shape() != t.shape()) {
            throw CheckpointError("checkpoint entry " + name + " has extents " + shape_str(t.shape()) +
                                  ", model expects " + shape_str(dst.shape()));
        }
        std::copy(t.data().begin(), t.data().end(), dst.data().begin());
        ++report.loaded;
    }
    return report;
}

}  // namespace cainet
