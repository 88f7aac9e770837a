#include "cainet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cainet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: " + key + "=" + v + " is not a number");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config: " + key + "=" + v + " is not a non-negative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config: " + key + "=" + v + " is not a boolean");
}

std::array<float, 4> to_quad(const std::string& key, const std::string& v) {
    std::array<float, 4> out{};
    std::stringstream ss(v);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i == 4) break;
        out[i++] = static_cast<float>(to_double(key, trim(part)));
    }
    if (i != 4) throw ConfigError("config: " + key + " needs four comma-separated values (R,G,B,thermal)");
    return out;
}

const char* b(bool v) { return v ? "true" : "false"; }

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        kv.entries_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void KeyValues::apply_overrides(const std::vector<std::string>& args) {
    for (const auto& a : args) {
        const auto eq = a.find('=');
        if (a.rfind("--", 0) != 0 || eq == std::string::npos || eq == 2)
            throw ConfigError("override '" + a + "' is not of the form --key=value");
        entries_[a.substr(2, eq - 2)] = a.substr(eq + 1);
    }
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Rgb: return "rgb";
        case Stage::Thermal: return "thermal";
        case Stage::Gcm: return "gcm";
        case Stage::Full: return "full";
    }
    return "?";
}

Stage parse_stage(const std::string& name) {
    if (name == "rgb") return Stage::Rgb;
    if (name == "thermal") return Stage::Thermal;
    if (name == "gcm") return Stage::Gcm;
    if (name == "full") return Stage::Full;
    throw ConfigError("unknown stage '" + name + "' (expected rgb, thermal, gcm or full)");
}

TrainConfig TrainConfig::from(const KeyValues& kv) {
    TrainConfig c;
    // The ablation row goes first so explicit enable_* / loss.* keys refine it.
    if (auto row = kv.get("ablation"); row && !row->empty()) {
        c.ablation = *row;
        const AblationRow& r = ablation_row(*row);
        c.enable_arlm = r.arlm;
        c.enable_da = r.da;
        c.enable_cacr = r.cacr;
        c.enable_gcm = r.gcm;
        c.losses = r.losses;
    }
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto u = [](std::size_t& dst) -> Setter { return [&dst](auto& k, auto& v) { dst = to_uint(k, v); }; };
    auto flag = [](bool& dst) -> Setter { return [&dst](auto& k, auto& v) { dst = to_bool(k, v); }; };
    const std::map<std::string, Setter> setters = {
        {"preset", [&](auto&, auto& v) { c.preset = v; }},
        {"num_classes", u(c.num_classes)},
        {"lr", [&](auto& k, auto& v) { c.lr = to_double(k, v); }},
        {"batch_size", u(c.batch_size)},
        {"stage", [&](auto&, auto& v) { c.stage = v; }},
        {"steps.rgb", u(c.max_steps[0])},
        {"steps.thermal", u(c.max_steps[1])},
        {"steps.gcm", u(c.max_steps[2])},
        {"steps.full", u(c.max_steps[3])},
        {"patience", u(c.patience)},
        {"min_delta", [&](auto& k, auto& v) { c.min_delta = to_double(k, v); }},
        {"seed", [&](auto& k, auto& v) { c.seed = to_uint(k, v); }},
        {"flip", flag(c.flip)},
        {"class_weights", [&](auto& k, auto& v) {
             if (v != "enet" && v != "uniform") throw ConfigError("config: " + k + " must be enet or uniform");
             c.class_weights = v;
         }},
        {"eval_threads", u(c.eval_threads)},
        {"ablation", [](auto&, auto&) {}},
        {"enable_arlm", flag(c.enable_arlm)},
        {"enable_da", flag(c.enable_da)},
        {"enable_cacr", flag(c.enable_cacr)},
        {"enable_gcm", flag(c.enable_gcm)},
        {"enable_thermal", flag(c.enable_thermal)},
        {"modality_order", [&](auto& k, auto& v) {
             if (v == "rgb_first")
                 c.modality_order = ModalityOrder::RgbFirst;
             else if (v == "thermal_first")
                 c.modality_order = ModalityOrder::ThermalFirst;
             else
                 throw ConfigError("config: " + k + " must be rgb_first or thermal_first");
         }},
        {"gcm_channels", u(c.gcm_channels)},
        {"arlm_width", u(c.arlm_width)},
        {"da_reduction", u(c.da_reduction)},
        {"loss.decoder", flag(c.losses.decoder)},
        {"loss.target", flag(c.losses.target)},
        {"loss.attention", flag(c.losses.attention)},
        {"loss.binary", flag(c.losses.binary)},
        {"loss.boundary", flag(c.losses.boundary)},
        {"lovasz.classes", [&](auto& k, auto& v) {
             if (v == "present")
                 c.lovasz.classes = LovaszClasses::Present;
             else if (v == "all")
                 c.lovasz.classes = LovaszClasses::All;
             else
                 throw ConfigError("config: " + k + " must be present or all");
         }},
        {"ignore_unlabeled", flag(c.lovasz.ignore_unlabeled)},
        {"aux.dilation", u(c.aux.dilation)},
        {"aux.sigma", [&](auto& k, auto& v) { c.aux.sigma = to_double(k, v); }},
        {"metrics.zero_class", [&](auto& k, auto& v) {
             if (v == "skip")
                 c.metrics.zero_class = ZeroClass::Skip;
             else if (v == "zero")
                 c.metrics.zero_class = ZeroClass::Zero;
             else
                 throw ConfigError("config: " + k + " must be skip or zero");
         }},
        {"metrics.include_unlabeled", flag(c.metrics.include_unlabeled)},
        {"norm.mean", [&](auto& k, auto& v) { c.norm.mean = to_quad(k, v); }},
        {"norm.std", [&](auto& k, auto& v) { c.norm.stddev = to_quad(k, v); }},
        {"data", [&](auto&, auto& v) { c.data = v; }},
        {"out", [&](auto&, auto& v) { c.out = v; }},
        {"checkpoint.rgb", [&](auto&, auto& v) { c.checkpoints["rgb"] = v; }},
        {"checkpoint.thermal", [&](auto&, auto& v) { c.checkpoints["thermal"] = v; }},
        {"checkpoint.gcm", [&](auto&, auto& v) { c.checkpoints["gcm"] = v; }},
        {"checkpoint.full", [&](auto&, auto& v) { c.checkpoints["full"] = v; }},
    };
    for (const auto& [key, value] : kv.entries()) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
        it->second(key, value);
    }
    if (c.preset != "toy" && c.preset != "paper") throw ConfigError("config: preset must be toy or paper");
    if (c.stage != "all") parse_stage(c.stage);
    if (c.batch_size == 0) throw ConfigError("config: batch_size must be positive");
    if (!(c.lr > 0.0)) throw ConfigError("config: lr must be positive");
    if (c.eval_threads == 0) throw ConfigError("config: eval_threads must be positive");
    for (float s : c.norm.stddev)
        if (!(s > 0.0f)) throw ConfigError("config: norm.std entries must be positive");
    return c;
}

std::string TrainConfig::to_text() const {
    std::ostringstream o;
    auto quad = [](const std::array<float, 4>& q) {
        return fmt(q[0]) + "," + fmt(q[1]) + "," + fmt(q[2]) + "," + fmt(q[3]);
    };
    o << "preset=" << preset << "\nnum_classes=" << num_classes << "\nlr=" << fmt(lr) << "\nbatch_size=" << batch_size
      << "\nstage=" << stage << "\nsteps.rgb=" << max_steps[0] << "\nsteps.thermal=" << max_steps[1]
      << "\nsteps.gcm=" << max_steps[2] << "\nsteps.full=" << max_steps[3] << "\npatience=" << patience
      << "\nmin_delta=" << fmt(min_delta) << "\nseed=" << seed << "\nflip=" << b(flip)
      << "\nclass_weights=" << class_weights << "\neval_threads=" << eval_threads << "\nablation=" << ablation
      << "\nenable_arlm=" << b(enable_arlm) << "\nenable_da=" << b(enable_da) << "\nenable_cacr=" << b(enable_cacr)
      << "\nenable_gcm=" << b(enable_gcm) << "\nenable_thermal=" << b(enable_thermal)
      << "\nmodality_order=" << (modality_order == ModalityOrder::RgbFirst ? "rgb_first" : "thermal_first")
      << "\ngcm_channels=" << gcm_channels << "\narlm_width=" << arlm_width << "\nda_reduction=" << da_reduction
      << "\nloss.decoder=" << b(losses.decoder) << "\nloss.target=" << b(losses.target)
      << "\nloss.attention=" << b(losses.attention) << "\nloss.binary=" << b(losses.binary)
      << "\nloss.boundary=" << b(losses.boundary)
      << "\nlovasz.classes=" << (lovasz.classes == LovaszClasses::Present ? "present" : "all")
      << "\nignore_unlabeled=" << b(lovasz.ignore_unlabeled) << "\naux.dilation=" << aux.dilation
      << "\naux.sigma=" << fmt(aux.sigma)
      << "\nmetrics.zero_class=" << (metrics.zero_class == ZeroClass::Skip ? "skip" : "zero")
      << "\nmetrics.include_unlabeled=" << b(metrics.include_unlabeled) << "\nnorm.mean=" << quad(norm.mean)
      << "\nnorm.std=" << quad(norm.stddev) << "\ndata=" << data.string() << "\nout=" << out.string() << "\n";
    for (const auto& [stage_key, path] : checkpoints) o << "checkpoint." << stage_key << "=" << path.string() << "\n";
    return o.str();
}

std::filesystem::path TrainConfig::checkpoint_path(Stage s) const {
    if (auto it = checkpoints.find(stage_name(s)); it != checkpoints.end()) return it->second;
    return out / (std::string(stage_name(s)) + ".ckpt");
}

std::filesystem::path TrainConfig::log_path(Stage s) const { return out / (std::string(stage_name(s)) + ".log"); }

ModelConfig TrainConfig::model_config(std::size_t k) const {
    ModelConfig m = ModelConfig::preset(preset, k);
    m.enable_arlm = enable_arlm;
    m.enable_da = enable_da;
    m.enable_cacr = enable_cacr;
    m.enable_gcm = enable_gcm;
    m.enable_thermal = enable_thermal;
    m.modality_order = modality_order;
    if (gcm_channels) m.gcm_channels = gcm_channels;
    if (arlm_width) m.arlm_width = arlm_width;
    if (da_reduction) m.da_reduction = da_reduction;
    return m;
}

}  // namespace cainet
