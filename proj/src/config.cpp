#include "moddrop/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "moddrop/checkpoint.hpp"
#include "moddrop/error.hpp"

namespace moddrop {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ConfigError(key + ": expected a finite number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(parse_double(key, trim(item)));
    return out;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Member>
Field size_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                member(c) = static_cast<std::size_t>(parse_u64(k, v));
            },
            [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <class Member>
Field u64_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_u64(k, v); },
            [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <class Member>
Field double_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); },
            [member](const RunConfig& c) { return format_double(member(c)); }};
}

template <class Member>
Field list_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_list(k, v); },
            [member](const RunConfig& c) { return format_list(member(c)); }};
}

#define FIELD_REF(expr) [](auto& c) -> auto& { return expr; }

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        t["synth.modalities"] = size_field(FIELD_REF(c.synth.modalities));
        t["synth.size"] = size_field(FIELD_REF(c.synth.size));
        t["synth.slices"] = size_field(FIELD_REF(c.synth.slices));
        t["synth.subjects"] = size_field(FIELD_REF(c.subjects));
        t["synth.lesions_min"] = size_field(FIELD_REF(c.synth.lesions_min));
        t["synth.lesions_max"] = size_field(FIELD_REF(c.synth.lesions_max));
        t["synth.radius_min"] = double_field(FIELD_REF(c.synth.radius_min));
        t["synth.radius_max"] = double_field(FIELD_REF(c.synth.radius_max));
        t["synth.contrast"] = list_field(FIELD_REF(c.synth.contrast));
        t["synth.anatomy_weight"] = list_field(FIELD_REF(c.synth.anatomy_weight));
        t["synth.texture_scale"] = double_field(FIELD_REF(c.synth.texture_scale));
        t["synth.texture_amplitude"] = double_field(FIELD_REF(c.synth.texture_amplitude));
        t["synth.noise_sigma"] = double_field(FIELD_REF(c.synth.noise_sigma));
        t["synth.seed"] = u64_field(FIELD_REF(c.synth.seed));

        t["model.first_layer_out"] = size_field(FIELD_REF(c.model.first_layer_out));
        t["model.dense_blocks"] = size_field(FIELD_REF(c.model.dense_blocks));
        t["model.layers_per_block"] = size_field(FIELD_REF(c.model.layers_per_block));
        t["model.growth_rate"] = size_field(FIELD_REF(c.model.growth_rate));
        t["model.kernel"] = size_field(FIELD_REF(c.model.kernel));

        t["train.regime"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.train.regime = Regime::parse(v); },
                             [](const RunConfig& c) { return c.train.regime.str(); }};
        t["train.epochs"] = size_field(FIELD_REF(c.train.epochs));
        t["train.batch_size"] = size_field(FIELD_REF(c.train.batch_size));
        t["train.lr0"] = double_field(FIELD_REF(c.train.lr0));
        t["train.decay_start_epoch"] = size_field(FIELD_REF(c.train.decay_start_epoch));
        t["train.beta1"] = double_field(FIELD_REF(c.train.adam.beta1));
        t["train.beta2"] = double_field(FIELD_REF(c.train.adam.beta2));
        t["train.eps"] = double_field(FIELD_REF(c.train.adam.eps));
        t["train.seed"] = u64_field(FIELD_REF(c.train.seed));
        t["train.val_every"] = size_field(FIELD_REF(c.train.val_every));
        t["train.test_fraction"] = double_field(FIELD_REF(c.train.test_fraction));
        t["train.val_fraction"] = double_field(FIELD_REF(c.train.val_fraction));

        t["loss.focal_alpha"] = double_field(FIELD_REF(c.loss.focal_alpha));
        t["loss.focal_gamma"] = double_field(FIELD_REF(c.loss.focal_gamma));
        t["loss.focal_clamp"] = double_field(FIELD_REF(c.loss.focal_clamp));
        t["loss.ssim_window"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                     c.loss.ssim_window = static_cast<int>(parse_u64(k, v));
                                 },
                                 [](const RunConfig& c) { return std::to_string(c.loss.ssim_window); }};
        t["loss.ssim_sigma"] = double_field(FIELD_REF(c.loss.ssim_sigma));
        t["loss.ssim_k1"] = double_field(FIELD_REF(c.loss.ssim_k1));
        t["loss.ssim_k2"] = double_field(FIELD_REF(c.loss.ssim_k2));
        t["loss.dynamic_range"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                       if (v == "auto") {
                                           c.loss.dynamic_range.reset();
                                       } else {
                                           c.loss.dynamic_range = parse_double(k, v);
                                       }
                                   },
                                   [](const RunConfig& c) {
                                       return c.loss.dynamic_range ? format_double(*c.loss.dynamic_range)
                                                                   : std::string("auto");
                                   }};
        t["loss.alpha"] = double_field(FIELD_REF(c.loss.alpha));
        t["loss.beta"] = double_field(FIELD_REF(c.loss.beta));
        t["loss.gamma"] = double_field(FIELD_REF(c.loss.gamma));

        t["drop.mode"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              if (v == "uniform") {
                                  c.dropout.mode = DropoutMode::uniform_over_configs;
                              } else if (v == "bernoulli") {
                                  c.dropout.mode = DropoutMode::bernoulli_rejection;
                              } else {
                                  throw ConfigError(k + ": expected 'uniform' or 'bernoulli', got '" + v + "'");
                              }
                          },
                          [](const RunConfig& c) {
                              return std::string(c.dropout.mode == DropoutMode::uniform_over_configs ? "uniform"
                                                                                                     : "bernoulli");
                          }};
        t["drop.keep_prob"] = list_field(FIELD_REF(c.dropout.keep_prob));

        t["eval.threshold"] = double_field(FIELD_REF(c.eval.threshold));
        t["eval.min_overlap"] = size_field(FIELD_REF(c.eval.min_overlap));
        return t;
    }();
    return table;
}

#undef FIELD_REF

}  // namespace

RunConfig::RunConfig() { model.modalities = synth.modalities; }

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    it->second.set(*this, key, value);
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            cfg.apply_override(line);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
        } catch (const InvalidCodeError& e) {
            throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str(), path.string());
}

void RunConfig::finalize() {
    model.modalities = synth.modalities;
    model.slices_per_modality = synth.slices;
    dropout.modalities = synth.modalities;
    synth.validate();
    if (subjects < 1) {
        throw ConfigError("synth.subjects must be at least 1");
    }
    model.validate();
    train.threshold = eval.threshold;
    train.validate();
    loss.validate();
    dropout.validate();
    if (eval.min_overlap < 1) {
        throw ConfigError("eval.min_overlap must be at least 1");
    }
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
    return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical_text()); }

TrainSetup RunConfig::train_setup() const {
    TrainSetup s;
    s.model = model;
    s.model.modalities = synth.modalities;
    s.model.slices_per_modality = synth.slices;
    s.train = train;
    s.train.threshold = eval.threshold;
    s.loss = loss;
    s.dropout = dropout;
    s.dropout.modalities = synth.modalities;
    s.config_hash = hash();
    return s;
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [key, field] : fields()) out.push_back(key);
    return out;
}

}  // namespace moddrop
