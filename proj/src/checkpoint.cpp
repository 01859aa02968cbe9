#include "aircade/checkpoint.hpp"

#include <cstring>

#include "binary_io.hpp"

namespace aircade {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'D', 'E'};
constexpr uint32_t kVersion = 1;
constexpr double kMetaLayout = 1.0;

struct Entry {
    std::string name;
    Shape shape;
    const std::vector<double>* data;
};

Tensor config_tensor(const ModelConfig& c, uint64_t seed) {
    std::vector<double> v{kMetaLayout,
                          static_cast<double>(c.input_window),
                          static_cast<double>(c.pred_window),
                          static_cast<double>(c.stations),
                          static_cast<double>(c.aqi_channels),
                          static_cast<double>(c.met_channels),
                          static_cast<double>(c.state_width),
                          static_cast<double>(c.prompt_width),
                          static_cast<double>(c.adaptive_rank),
                          static_cast<double>(c.heads),
                          static_cast<double>(c.temporal_layers),
                          static_cast<double>(c.spatial_layers),
                          static_cast<double>(c.slots_per_day),
                          c.scale_mode == ScaleMode::divide ? 0.0 : 1.0,
                          c.renormalize_masked ? 1.0 : 0.0,
                          c.no_prompt ? 1.0 : 0.0,
                          c.no_adp ? 1.0 : 0.0,
                          c.no_agg ? 1.0 : 0.0,
                          c.no_diff ? 1.0 : 0.0,
                          c.no_cade ? 1.0 : 0.0,
                          c.no_es ? 1.0 : 0.0,
                          static_cast<double>(seed)};
    return Tensor::from_vector(std::move(v));
}

void parse_config_tensor(const Tensor& t, ModelConfig& c, uint64_t& seed) {
    if (t.numel() != 22 || t.data[0] != kMetaLayout) {
        throw DataFormatError(DataFormatError::Kind::bad_version,
                              "checkpoint: unsupported config layout");
    }
    auto geti = [&](size_t i) { return static_cast<int64_t>(t.data[i]); };
    c.input_window = geti(1);
    c.pred_window = geti(2);
    c.stations = geti(3);
    c.aqi_channels = geti(4);
    c.met_channels = geti(5);
    c.state_width = geti(6);
    c.prompt_width = geti(7);
    c.adaptive_rank = geti(8);
    c.heads = geti(9);
    c.temporal_layers = geti(10);
    c.spatial_layers = geti(11);
    c.slots_per_day = geti(12);
    c.scale_mode = t.data[13] == 0.0 ? ScaleMode::divide : ScaleMode::multiply;
    c.renormalize_masked = t.data[14] != 0.0;
    c.no_prompt = t.data[15] != 0.0;
    c.no_adp = t.data[16] != 0.0;
    c.no_agg = t.data[17] != 0.0;
    c.no_diff = t.data[18] != 0.0;
    c.no_cade = t.data[19] != 0.0;
    c.no_es = t.data[20] != 0.0;
    seed = static_cast<uint64_t>(t.data[21]);
}

}  // namespace

void save_checkpoint(const std::string& path, const AirCadeModel& model, const NormStats& stats) {
    Tensor meta = config_tensor(model.config, model.seed);

    std::vector<Entry> entries;
    entries.push_back({"__meta__.config", meta.shape, &meta.data});
    entries.push_back({"__norm__.aqi_mean", stats.aqi_mean.shape, &stats.aqi_mean.data});
    entries.push_back({"__norm__.aqi_std", stats.aqi_std.shape, &stats.aqi_std.data});
    entries.push_back({"__norm__.met_mean", stats.met_mean.shape, &stats.met_mean.data});
    entries.push_back({"__norm__.met_std", stats.met_std.shape, &stats.met_std.data});
    for (const Parameter* p : model.parameters()) {
        entries.push_back({p->name, p->value.shape, &p->value.data});
    }

    // manifest size is needed to place the payload offsets
    uint64_t header = 4 + 4 + 8;
    for (const Entry& e : entries) {
        header += 4 + e.name.size() + 4 + 8 * e.shape.size() + 8;
    }
    io::Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u64(entries.size());
    uint64_t offset = header;
    for (const Entry& e : entries) {
        w.str(e.name);
        w.u32(static_cast<uint32_t>(e.shape.size()));
        for (int64_t d : e.shape) w.u64(static_cast<uint64_t>(d));
        w.u64(offset);
        offset += e.data->size() * 8;
    }
    for (const Entry& e : entries) w.f64_block(*e.data);
    if (!w.out) throw DataFormatError(DataFormatError::Kind::io, "write failed: " + path);
}

namespace {

struct RawCheckpoint {
    std::vector<CheckpointEntryInfo> manifest;
    std::vector<Tensor> tensors;
};

RawCheckpoint read_all(const std::string& path) {
    io::Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw DataFormatError(DataFormatError::Kind::bad_magic,
                              path + ": not a checkpoint file (bad magic)");
    }
    uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw DataFormatError(DataFormatError::Kind::bad_version,
                              path + ": unsupported checkpoint version " + std::to_string(version));
    }
    uint64_t count = r.u64("entry count");
    RawCheckpoint raw;
    for (uint64_t i = 0; i < count; ++i) {
        CheckpointEntryInfo info;
        info.name = r.str("entry name");
        uint32_t ndim = r.u32("entry rank");
        for (uint32_t d = 0; d < ndim; ++d) {
            info.shape.push_back(static_cast<int64_t>(r.u64("entry dim")));
        }
        info.offset = r.u64("entry offset");
        raw.manifest.push_back(std::move(info));
    }
    for (const CheckpointEntryInfo& info : raw.manifest) {
        Tensor t(info.shape);
        r.in.seekg(static_cast<std::streamoff>(info.offset));
        if (!r.in) {
            throw DataFormatError(DataFormatError::Kind::truncated,
                                  path + ": offset " + std::to_string(info.offset) +
                                      " beyond end of file");
        }
        r.bytes(t.data.data(), t.data.size() * 8, info.name.c_str());
        raw.tensors.push_back(std::move(t));
    }
    return raw;
}

}  // namespace

std::vector<CheckpointEntryInfo> read_checkpoint_manifest(const std::string& path) {
    return read_all(path).manifest;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    RawCheckpoint raw = read_all(path);
    auto find = [&](const std::string& name) -> const Tensor& {
        for (size_t i = 0; i < raw.manifest.size(); ++i) {
            if (raw.manifest[i].name == name) return raw.tensors[i];
        }
        throw DataFormatError(DataFormatError::Kind::io,
                              path + ": missing checkpoint entry '" + name + "'");
    };

    ModelConfig cfg;
    uint64_t seed = 0;
    parse_config_tensor(find("__meta__.config"), cfg, seed);

    NormStats stats;
    stats.aqi_mean = find("__norm__.aqi_mean");
    stats.aqi_std = find("__norm__.aqi_std");
    stats.met_mean = find("__norm__.met_mean");
    stats.met_std = find("__norm__.met_std");

    LoadedCheckpoint out{AirCadeModel(cfg, seed), stats};
    for (Parameter* p : out.model.parameters()) {
        const Tensor& stored = find(p->name);
        if (stored.shape != p->value.shape) {
            throw DataFormatError(DataFormatError::Kind::io,
                                  path + ": parameter '" + p->name + "' has shape " +
                                      shape_str(stored.shape) + ", model expects " +
                                      shape_str(p->value.shape));
        }
        p->value = stored;
    }
    return out;
}

}  // namespace aircade
