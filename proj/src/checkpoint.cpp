#include "moddrop/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "moddrop/error.hpp"
#include "moddrop/tensor_io.hpp"

namespace moddrop {

namespace {

constexpr char kMagic[4] = {'M', 'D', 'C', '1'};

Tensor encode_u64(std::uint64_t v) {
    std::vector<double> limbs(4);
    for (int i = 0; i < 4; ++i) limbs[static_cast<std::size_t>(i)] = static_cast<double>((v >> (16 * i)) & 0xFFFF);
    return Tensor::from({4}, std::move(limbs));
}

std::uint64_t decode_u64(const Tensor& t, const std::string& name) {
    if (t.numel() != 4) {
        throw FormatError("metadata " + name + " must hold 4 limbs", 0);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const double limb = t.data()[static_cast<std::size_t>(i)];
        if (limb < 0 || limb > 65535 || limb != static_cast<double>(static_cast<std::uint64_t>(limb))) {
            throw FormatError("metadata " + name + " has an invalid limb", 0);
        }
        v |= static_cast<std::uint64_t>(limb) << (16 * i);
    }
    return v;
}

const std::vector<std::string> kRegimeNames = {"moddrop", "moddrop_plus", "moddrop_plus_plus", "independent"};

double regime_index(const std::string& regime) {
    for (std::size_t i = 0; i < kRegimeNames.size(); ++i) {
        if (kRegimeNames[i] == regime) return static_cast<double>(i);
    }
    return -1.0;
}

std::vector<NamedTensor> with_metadata(const Checkpoint& ckpt) {
    std::vector<NamedTensor> entries = ckpt.tensors;
    entries.push_back({"meta.epoch", encode_u64(ckpt.epoch)});
    entries.push_back({"meta.optimizer_steps", encode_u64(ckpt.optimizer_steps)});
    entries.push_back({"meta.rng_seed", encode_u64(ckpt.rng_seed)});
    entries.push_back({"meta.rng_counter", encode_u64(ckpt.rng_counter)});
    entries.push_back({"meta.config_hash", encode_u64(ckpt.config_hash)});
    const BackboneConfig& m = ckpt.model;
    entries.push_back({"meta.model",
                       Tensor::from({7}, {double(m.modalities), double(m.slices_per_modality), double(m.first_layer_out),
                                          double(m.dense_blocks), double(m.layers_per_block), double(m.growth_rate),
                                          double(m.kernel)})});
    entries.push_back({"meta.regime", Tensor::scalar(regime_index(ckpt.regime))});
    if (ckpt.fixed_code) {
        entries.push_back({"meta.fixed_code", Tensor::from({ckpt.fixed_code->size()}, ckpt.fixed_code->as_vector())});
    }
    return entries;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t.tensor;
    }
    return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    const std::vector<NamedTensor> entries = with_metadata(ckpt);
    out.write(kMagic, 4);
    le::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xFFFF) {
            throw Error("checkpoint entry name too long: " + e.name.substr(0, 32) + "...");
        }
        le::put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_tensor(out, e.tensor);
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    ByteReader r(in, 0);
    char magic[4];
    r.read(magic, 4, "checkpoint magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic, expected MDC1", 0);
    }
    const std::uint32_t count = r.u32("checkpoint entry count");
    Checkpoint ckpt;
    bool have_model = false;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint64_t entry_at = r.offset();
        const std::uint16_t len = r.u16("entry name length");
        std::string name(len, '\0');
        r.read(name.data(), len, "entry name");
        const std::uint64_t payload_at = r.offset();
        Tensor t = read_tensor(in, payload_at);
        // read_tensor consumed the stream directly; resync the byte counter.
        r.advance(4 + 1 + 4 * t.rank() + 4 * t.numel());

        if (name.rfind("meta.", 0) != 0) {
            ckpt.tensors.push_back({std::move(name), std::move(t)});
            continue;
        }
        try {
            if (name == "meta.epoch") ckpt.epoch = decode_u64(t, name);
            else if (name == "meta.optimizer_steps") ckpt.optimizer_steps = decode_u64(t, name);
            else if (name == "meta.rng_seed") ckpt.rng_seed = decode_u64(t, name);
            else if (name == "meta.rng_counter") ckpt.rng_counter = decode_u64(t, name);
            else if (name == "meta.config_hash") ckpt.config_hash = decode_u64(t, name);
            else if (name == "meta.model") {
                if (t.numel() != 7) throw FormatError("meta.model must hold 7 values", 0);
                const auto d = t.data();
                BackboneConfig& m = ckpt.model;
                m.modalities = static_cast<std::size_t>(d[0]);
                m.slices_per_modality = static_cast<std::size_t>(d[1]);
                m.first_layer_out = static_cast<std::size_t>(d[2]);
                m.dense_blocks = static_cast<std::size_t>(d[3]);
                m.layers_per_block = static_cast<std::size_t>(d[4]);
                m.growth_rate = static_cast<std::size_t>(d[5]);
                m.kernel = static_cast<std::size_t>(d[6]);
                have_model = true;
            } else if (name == "meta.regime") {
                const double idx = t.item();
                if (idx < 0 || idx >= static_cast<double>(kRegimeNames.size())) {
                    throw FormatError("unknown regime index", 0);
                }
                ckpt.regime = kRegimeNames[static_cast<std::size_t>(idx)];
            } else if (name == "meta.fixed_code") {
                std::vector<bool> bits;
                for (double b : t.data()) bits.push_back(b != 0.0);
                ckpt.fixed_code = ModalityCode(bits);
            } else {
                throw FormatError("unknown metadata entry " + name, 0);
            }
        } catch (const FormatError& e) {
            throw FormatError(e.reason(), entry_at);
        }
    }
    if (!have_model) {
        throw FormatError("checkpoint lacks meta.model", r.offset());
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after checkpoint entries", r.offset());
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_checkpoint(out, ckpt);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    try {
        return read_checkpoint(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.reason(), e.offset());
    }
}

Checkpoint snapshot_parameters(const SegmentationModel& model) {
    Checkpoint ckpt;
    for (const auto& p : model.parameters()) {
        ckpt.tensors.push_back({p.name, p.tensor.detach()});
    }
    ckpt.model = model.config();
    return ckpt;
}

void load_parameters(SegmentationModel& model, const Checkpoint& ckpt) {
    for (auto& p : model.parameters()) {
        const Tensor* src = ckpt.find(p.name);
        if (!src) {
            throw FormatError("checkpoint lacks parameter " + p.name, 0);
        }
        if (src->shape() != p.tensor.shape()) {
            throw ShapeError("checkpoint parameter " + p.name + " has shape " + shape_str(src->shape()) +
                             ", model expects " + shape_str(p.tensor.shape()));
        }
        Tensor dst = p.tensor;
        std::copy(src->data().begin(), src->data().end(), dst.mutable_data().begin());
    }
}

SegmentationModel model_from_checkpoint(const Checkpoint& ckpt) {
    Rng rng(0);
    SegmentationModel model(ckpt.model, rng);
    load_parameters(model, ckpt);
    return model;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& text) { return fnv1a(text.data(), text.size()); }

std::uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a(bytes);
}

}  // namespace moddrop
