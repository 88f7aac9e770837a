#include "cainet/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cainet {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }
float quantize(double v) { return from_byte(to_byte(v)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Color class_color(std::size_t cls) {
    static const Color table[] = {{0, 0, 0},     {220, 60, 50},  {60, 170, 70},  {60, 90, 210},  {230, 200, 40},
                                  {180, 70, 190}, {50, 190, 200}, {240, 130, 40}, {150, 150, 150}, {120, 60, 20}};
    constexpr std::size_t n = sizeof(table) / sizeof(table[0]);
    if (cls < n) return table[cls];
    const auto h = static_cast<std::uint8_t>((cls * 67) % 200 + 40);
    return {h, static_cast<std::uint8_t>(255 - h), static_cast<std::uint8_t>((cls * 131) % 256)};
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw MissingFileError("missing file: " + p.string());
}

std::string extent_str(const Image& im) { return std::to_string(im.height) + "x" + std::to_string(im.width); }

}  // namespace

Image read_png(const fs::path& path) {
    require_file(path);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw std::runtime_error("read_png: " + path.string() + ": " + img.message);
    img.format &= ~(PNG_FORMAT_FLAG_COLORMAP | PNG_FORMAT_FLAG_LINEAR);
    Image out;
    out.height = img.height;
    out.width = img.width;
    out.channels = PNG_IMAGE_SAMPLE_CHANNELS(img.format);
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw std::runtime_error("read_png: " + path.string() + ": " + img.message);
    }
    return out;
}

void write_png(const fs::path& path, const Image& image) {
    static const png_uint_32 formats[] = {0, PNG_FORMAT_GRAY, PNG_FORMAT_GA, PNG_FORMAT_RGB, PNG_FORMAT_RGBA};
    if (image.channels < 1 || image.channels > 4 || image.pixels.size() != image.height * image.width * image.channels)
        throw std::invalid_argument("write_png: inconsistent image buffer");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = formats[image.channels];
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
        throw std::runtime_error("write_png: " + path.string() + ": " + img.message);
}

const std::vector<std::string>& DatasetManifest::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ManifestError("unknown split '" + name + "'");
}

void DatasetManifest::validate() const {
    if (num_classes == 0) throw ManifestError("manifest: class count missing");
    if (palette.size() < num_classes || class_names.size() < num_classes)
        throw ManifestError("manifest: palette or names do not cover " + std::to_string(num_classes) + " classes");
    std::set<std::string> seen;
    for (const auto* s : {&train, &val, &test})
        for (const auto& id : *s)
            if (!seen.insert(id).second) throw ManifestError("manifest: id '" + id + "' listed twice");
}

DatasetManifest read_manifest(const fs::path& root) {
    const fs::path path = root / "manifest.txt";
    require_file(path);
    std::ifstream in(path);
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        auto fail = [&] { throw ManifestError(path.string() + ":" + std::to_string(lineno) + ": bad line"); };
        if (key == "classes") {
            if (!(ss >> m.num_classes)) fail();
        } else if (key == "layout") {
            std::string v;
            ss >> v;
            if (v == "paired")
                m.layout = Layout::Paired;
            else if (v == "rgbt")
                m.layout = Layout::Rgbt;
            else
                fail();
        } else if (key == "class") {
            std::size_t id;
            std::string name;
            int r, g, b;
            if (!(ss >> id >> name >> r >> g >> b)) fail();
            if (m.palette.size() <= id) {
                m.palette.resize(id + 1);
                m.class_names.resize(id + 1);
            }
            m.palette[id] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
            m.class_names[id] = name;
        } else if (key == "train" || key == "val" || key == "test") {
            std::string id;
            if (!(ss >> id)) fail();
            (key == "train" ? m.train : key == "val" ? m.val : m.test).push_back(id);
        } else {
            fail();
        }
    }
    if (m.palette.empty()) {
        m.palette = default_palette(m.num_classes);
        for (std::size_t c = 0; c < m.num_classes; ++c) m.class_names.push_back("class" + std::to_string(c));
    }
    m.validate();
    return m;
}

void write_manifest(const fs::path& root, const DatasetManifest& m) {
    m.validate();
    fs::create_directories(root);
    std::ofstream out(root / "manifest.txt");
    out << "classes " << m.num_classes << "\n";
    out << "layout " << (m.layout == Layout::Paired ? "paired" : "rgbt") << "\n";
    for (std::size_t c = 0; c < m.num_classes; ++c)
        out << "class " << c << " " << m.class_names[c] << " " << int(m.palette[c][0]) << " " << int(m.palette[c][1])
            << " " << int(m.palette[c][2]) << "\n";
    for (const auto* name : {"train", "val", "test"})
        for (const auto& id : m.split(name)) out << name << " " << id << "\n";
    if (!out) throw std::runtime_error("write_manifest: cannot write " + (root / "manifest.txt").string());
}

SegSample load_sample(const fs::path& root, const std::string& id, const DatasetManifest& manifest,
                      const Normalization& norm) {
    const fs::path image_path = root / "images" / (id + ".png");
    const fs::path label_path = root / "labels" / (id + ".png");
    const fs::path thermal_path = root / "thermal" / (id + ".png");
    require_file(image_path);
    require_file(label_path);
    if (manifest.layout == Layout::Paired) require_file(thermal_path);

    const Image image = read_png(image_path);
    const Image label = read_png(label_path);
    const std::size_t expect = manifest.layout == Layout::Paired ? 3 : 4;
    if (image.channels != expect)
        throw SizeMismatchError(image_path.string() + ": expected " + std::to_string(expect) + " channels, found " +
                                std::to_string(image.channels));
    if (label.channels != 1)
        throw SizeMismatchError(label_path.string() + ": labels must be single-channel 8-bit");
    if (label.height != image.height || label.width != image.width)
        throw SizeMismatchError(id + ": image " + extent_str(image) + " vs labels " + extent_str(label));

    const std::size_t h = image.height, w = image.width, hw = h * w;
    SegSample s;
    s.id = id;
    s.rgb = Tensor::zeros({3, h, w});
    s.thermal = Tensor::zeros({1, h, w});
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t c = 0; c < 3; ++c) s.rgb[c * hw + p] = from_byte(image.pixels[p * expect + c]);
    if (manifest.layout == Layout::Rgbt) {
        for (std::size_t p = 0; p < hw; ++p) s.thermal[p] = from_byte(image.pixels[p * 4 + 3]);
    } else {
        const Image th = read_png(thermal_path);
        if (th.height != h || th.width != w)
            throw SizeMismatchError(id + ": image " + extent_str(image) + " vs thermal " + extent_str(th));
        for (std::size_t p = 0; p < hw; ++p) s.thermal[p] = from_byte(th.pixels[p * th.channels]);
    }
    for (std::size_t c = 0; c < 3; ++c)
        if (norm.mean[c] != 0.0f || norm.stddev[c] != 1.0f)
            for (std::size_t p = 0; p < hw; ++p) s.rgb[c * hw + p] = (s.rgb[c * hw + p] - norm.mean[c]) / norm.stddev[c];
    if (norm.mean[3] != 0.0f || norm.stddev[3] != 1.0f)
        for (std::size_t p = 0; p < hw; ++p) s.thermal[p] = (s.thermal[p] - norm.mean[3]) / norm.stddev[3];

    s.labels = LabelMap(h, w);
    for (std::size_t p = 0; p < hw; ++p) {
        const std::uint8_t v = label.pixels[p];
        if (v >= manifest.num_classes)
            throw LabelRangeError(label_path.string() + ": label " + std::to_string(v) + " at pixel (" +
                                  std::to_string(p / w) + ", " + std::to_string(p % w) + ") outside [0, " +
                                  std::to_string(manifest.num_classes - 1) + "]");
        s.labels.values[p] = v;
    }
    return s;
}

void save_sample(const fs::path& root, const SegSample& s, Layout layout) {
    const std::size_t h = s.labels.height, w = s.labels.width, hw = h * w;
    const std::size_t ch = layout == Layout::Paired ? 3 : 4;
    Image image{h, w, ch, std::vector<std::uint8_t>(hw * ch)};
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t c = 0; c < 3; ++c) image.pixels[p * ch + c] = to_byte(s.rgb[c * hw + p]);
        if (ch == 4) image.pixels[p * 4 + 3] = to_byte(s.thermal[p]);
    }
    write_png(root / "images" / (s.id + ".png"), image);
    if (layout == Layout::Paired) {
        Image th{h, w, 1, std::vector<std::uint8_t>(hw)};
        for (std::size_t p = 0; p < hw; ++p) th.pixels[p] = to_byte(s.thermal[p]);
        write_png(root / "thermal" / (s.id + ".png"), th);
    }
    write_png(root / "labels" / (s.id + ".png"), label_image(s.labels));
}

float class_temperature(std::size_t cls, std::size_t num_classes) {
    if (num_classes <= 1) return 0.2f;
    return static_cast<float>(0.2 + 0.7 * double(cls) / double(num_classes - 1));
}

SegSample synth_scene(std::uint64_t seed, const SynthOptions& o) {
    if (o.num_classes < 2) throw ConfigError("synth_scene: need at least two classes");
    if (o.height < 8 || o.width < 8) throw ConfigError("synth_scene: extents below 8 pixels");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> rgb_noise(0.0, o.rgb_noise), th_noise(0.0, o.thermal_noise);
    const std::size_t h = o.height, w = o.width, hw = h * w;

    LabelMap labels(h, w);
    std::vector<std::array<double, 3>> color(hw);
    // Background: two low-frequency stripes over a neutral tone.
    const double fx = 0.15 + 0.3 * unit(rng), fy = 0.15 + 0.3 * unit(rng), phase = 6.283 * unit(rng);
    const double tone = 0.3 + 0.15 * unit(rng);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double t = 0.08 * std::sin(fx * double(x) + fy * double(y) + phase);
            color[y * w + x] = {tone + t, tone + 0.5 * t, tone - 0.05 - t};
        }

    const double size = double(std::min(h, w));
    const int objects = 2 + static_cast<int>(unit(rng) * 3.0);
    for (int i = 0; i < objects; ++i) {
        const auto cls = 1 + static_cast<std::size_t>(unit(rng) * double(o.num_classes - 1)) % (o.num_classes - 1);
        const Color base = class_color(cls);
        std::array<double, 3> c;
        for (std::size_t k = 0; k < 3; ++k) c[k] = base[k] / 255.0 + 0.08 * (unit(rng) - 0.5);
        const double cy = unit(rng) * double(h), cx = unit(rng) * double(w);
        const double ry = size * (0.12 + 0.18 * unit(rng)), rx = size * (0.12 + 0.18 * unit(rng));
        const bool ellipse = unit(rng) < 0.5;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double dy = (double(y) + 0.5 - cy) / ry, dx = (double(x) + 0.5 - cx) / rx;
                const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (!inside) continue;
                labels(y, x) = static_cast<std::int32_t>(cls);
                color[y * w + x] = c;
            }
    }

    SegSample s;
    s.id = "synth" + std::to_string(seed);
    s.labels = labels;
    s.rgb = Tensor::zeros({3, h, w});
    s.thermal = Tensor::zeros({1, h, w});
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t k = 0; k < 3; ++k) s.rgb[k * hw + p] = quantize(color[p][k] + rgb_noise(rng));
        s.thermal[p] = quantize(class_temperature(labels.values[p], o.num_classes) + th_noise(rng));
    }
    return s;
}

SegSample darken(const SegSample& sample, double factor, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise > 0 ? noise : 1.0);
    SegSample out = sample;
    out.rgb = sample.rgb.clone();
    const float ceiling = float(std::floor(factor * 255.0 + 1e-9) / 255.0);
    for (std::size_t i = 0; i < out.rgb.numel(); ++i) {
        double v = out.rgb[i] * factor + (noise > 0 ? n(rng) : 0.0);
        out.rgb[i] = std::min(quantize(std::clamp(v, 0.0, factor)), ceiling);
    }
    return out;
}

Corpus synth_corpus(const SynthCorpusOptions& o) {
    Corpus c;
    auto& m = c.manifest;
    m.num_classes = o.scene.num_classes;
    m.palette = default_palette(m.num_classes);
    m.class_names.push_back("unlabeled");
    for (std::size_t k = 1; k < m.num_classes; ++k) m.class_names.push_back("object" + std::to_string(k));
    m.layout = Layout::Paired;
    const std::size_t total = o.train + o.val + o.test;
    for (std::size_t i = 0; i < total; ++i) {
        SegSample s = synth_scene(mix_seed(o.seed, i), o.scene);
        if (o.darken_factor < 1.0) s = darken(s, o.darken_factor, o.darken_noise, mix_seed(o.seed + 1, i));
        char id[32];
        std::snprintf(id, sizeof id, "s%04zu", i);
        s.id = id;
        auto& split = i < o.train ? c.train : i < o.train + o.val ? c.val : c.test;
        (i < o.train ? m.train : i < o.train + o.val ? m.val : m.test).push_back(s.id);
        split.push_back(std::move(s));
    }
    return c;
}

void write_corpus(const fs::path& root, const Corpus& corpus) {
    write_manifest(root, corpus.manifest);
    for (const auto* split : {&corpus.train, &corpus.val, &corpus.test})
        for (const auto& s : *split) save_sample(root, s, corpus.manifest.layout);
}

Corpus load_corpus(const fs::path& root, const Normalization& norm) {
    Corpus c;
    c.manifest = read_manifest(root);
    for (const auto& id : c.manifest.train) c.train.push_back(load_sample(root, id, c.manifest, norm));
    for (const auto& id : c.manifest.val) c.val.push_back(load_sample(root, id, c.manifest, norm));
    for (const auto& id : c.manifest.test) c.test.push_back(load_sample(root, id, c.manifest, norm));
    return c;
}

std::vector<Color> default_palette(std::size_t num_classes) {
    std::vector<Color> p;
    for (std::size_t c = 0; c < num_classes; ++c) p.push_back(class_color(c));
    return p;
}

Image colorize(const LabelMap& labels, const std::vector<Color>& palette) {
    Image out{labels.height, labels.width, 3, std::vector<std::uint8_t>(labels.size() * 3)};
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const auto v = labels.values[p];
        if (v < 0 || static_cast<std::size_t>(v) >= palette.size())
            throw std::out_of_range("colorize: class " + std::to_string(v) + " has no palette entry");
        for (std::size_t k = 0; k < 3; ++k) out.pixels[p * 3 + k] = palette[v][k];
    }
    return out;
}

LabelMap decolorize(const Image& image, const std::vector<Color>& palette) {
    if (image.channels != 3) throw std::invalid_argument("decolorize: expected an RGB image");
    LabelMap out(image.height, image.width);
    for (std::size_t p = 0; p < out.size(); ++p) {
        const Color c{image.pixels[p * 3], image.pixels[p * 3 + 1], image.pixels[p * 3 + 2]};
        auto it = std::find(palette.begin(), palette.end(), c);
        if (it == palette.end())
            throw std::out_of_range("decolorize: color at pixel " + std::to_string(p) + " is not in the palette");
        out.values[p] = static_cast<std::int32_t>(it - palette.begin());
    }
    return out;
}

Image label_image(const LabelMap& labels) {
    Image out{labels.height, labels.width, 1, std::vector<std::uint8_t>(labels.size())};
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (labels.values[p] < 0 || labels.values[p] > 255)
            throw std::out_of_range("label_image: class " + std::to_string(labels.values[p]) + " does not fit 8 bits");
        out.pixels[p] = static_cast<std::uint8_t>(labels.values[p]);
    }
    return out;
}

Image map_image(const FloatMap& map) {
    Image out{map.height, map.width, 1, std::vector<std::uint8_t>(map.size())};
    for (std::size_t p = 0; p < map.size(); ++p) out.pixels[p] = to_byte(map.values[p]);
    return out;
}

Image map_image(const BinaryMap& map) {
    Image out{map.height, map.width, 1, std::vector<std::uint8_t>(map.size())};
    for (std::size_t p = 0; p < map.size(); ++p) out.pixels[p] = map.values[p] ? 255 : 0;
    return out;
}

SegSample hflip(const SegSample& s) {
    SegSample out;
    out.id = s.id;
    const std::size_t h = s.labels.height, w = s.labels.width;
    auto flip = [&](const Tensor& t) {
        Tensor r = Tensor::zeros(t.shape());
        const std::size_t planes = t.dim(0);
        for (std::size_t c = 0; c < planes; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) r[(c * h + y) * w + x] = t[(c * h + y) * w + (w - 1 - x)];
        return r;
    };
    out.rgb = flip(s.rgb);
    out.thermal = flip(s.thermal);
    out.labels = LabelMap(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.labels(y, x) = s.labels(y, w - 1 - x);
    return out;
}

std::vector<double> class_frequencies(const std::vector<SegSample>& samples, std::size_t num_classes) {
    std::vector<double> f(num_classes, 0.0);
    double total = 0.0;
    for (const auto& s : samples)
        for (auto v : s.labels.values) {
            if (v < 0 || static_cast<std::size_t>(v) >= num_classes)
                throw LabelRangeError("class_frequencies: label " + std::to_string(v) + " outside range");
            f[v] += 1.0;
            total += 1.0;
        }
    if (total > 0)
        for (double& v : f) v /= total;
    return f;
}

}  // namespace cainet
