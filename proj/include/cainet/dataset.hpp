#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cainet/grid.hpp"

namespace cainet {

class MissingFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SizeMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit interleaved image.
struct Image {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Reads gray, gray+alpha, RGB or RGBA PNGs as 8-bit samples.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

using Color = std::array<std::uint8_t, 3>;

enum class Layout {
    Paired,  ///< images/<id>.png (RGB) + thermal/<id>.png (gray)
    Rgbt,    ///< images/<id>.png holding R, G, B, thermal
};

struct DatasetManifest {
    std::size_t num_classes = 0;
    std::vector<std::string> class_names;
    std::vector<Color> palette;
    Layout layout = Layout::Paired;
    std::vector<std::string> train, val, test;

    const std::vector<std::string>& split(const std::string& name) const;
    /// Disjoint splits, palette and names covering every class.
    void validate() const;
};

/// manifest.txt: "classes N", "class <id> <name> <r> <g> <b>", "layout paired|rgbt",
/// and "<split> <id>" lines. '#' starts a comment.
DatasetManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);

struct SegSample {
    std::string id;
    Tensor rgb;      ///< 3 x H x W
    Tensor thermal;  ///< 1 x H x W
    LabelMap labels;
};

/// Optional per-channel standardization applied after division by 255.
/// Channels: R, G, B, thermal.
struct Normalization {
    std::array<float, 4> mean{0, 0, 0, 0};
    std::array<float, 4> stddev{1, 1, 1, 1};
};

/// Errors: MissingFileError, LabelRangeError (naming the pixel), SizeMismatchError.
SegSample load_sample(const std::filesystem::path& root, const std::string& id, const DatasetManifest& manifest,
                      const Normalization& norm = {});
/// Writes the sample's files (values are quantized to k/255).
void save_sample(const std::filesystem::path& root, const SegSample& sample, Layout layout);

struct SynthOptions {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t num_classes = 3;
    double rgb_noise = 0.03;
    double thermal_noise = 0.03;
};

/// Deterministic scene of colored shapes on a textured background. Each class
/// has a distinct color and a distinct temperature; labels are exact masks.
/// All values lie on the k/255 grid.
SegSample synth_scene(std::uint64_t seed, const SynthOptions& options);

/// Per-class temperature used by synth_scene.
float class_temperature(std::size_t cls, std::size_t num_classes);

/// rgb <- clamp(rgb * factor + N(0, noise), 0, factor), re-quantized to the
/// k/255 grid without exceeding factor.
SegSample darken(const SegSample& sample, double factor, double noise, std::uint64_t seed);

struct SynthCorpusOptions {
    SynthOptions scene;
    std::size_t train = 48, val = 8, test = 8;
    std::uint64_t seed = 7;
    double darken_factor = 1.0;  ///< < 1 darkens every RGB image
    double darken_noise = 0.02;
};

struct Corpus {
    DatasetManifest manifest;
    std::vector<SegSample> train, val, test;
};

Corpus synth_corpus(const SynthCorpusOptions& options);
void write_corpus(const std::filesystem::path& root, const Corpus& corpus);
/// Loads every split listed in the manifest.
Corpus load_corpus(const std::filesystem::path& root, const Normalization& norm = {});

/// Default palette: class 0 black, then distinct hues.
std::vector<Color> default_palette(std::size_t num_classes);

/// Throws std::out_of_range for a class with no palette entry.
Image colorize(const LabelMap& labels, const std::vector<Color>& palette);
/// Inverse palette lookup; throws std::out_of_range for unknown colors.
LabelMap decolorize(const Image& image, const std::vector<Color>& palette);

Image label_image(const LabelMap& labels);
Image map_image(const FloatMap& map);
Image map_image(const BinaryMap& map);

SegSample hflip(const SegSample& sample);

/// Pixel fraction per class over a set of samples.
std::vector<double> class_frequencies(const std::vector<SegSample>& samples, std::size_t num_classes);

}  // namespace cainet
