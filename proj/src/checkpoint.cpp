#include "cmdiff/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace cmdiff {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'M', 'D', 'F', 'C', 'K', '0', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ofstream& out, int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
int64_t read_i64(std::ifstream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Denoiser& model, const CheckpointMeta& meta,
                     bool include_moments) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint: " + path);
        out.write(kMagic, sizeof(kMagic));
        auto& params = model.params().params;
        write_u32(out, static_cast<uint32_t>(params.size()));
        write_i64(out, meta.iteration);
        write_u32(out, include_moments ? 1 : 0);
        for (auto& p : params) {
            write_u32(out, static_cast<uint32_t>(p->name.size()));
            out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            int32_t dims[4] = {p->w.n, p->w.c, p->w.h, p->w.w};
            out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
            out.write(reinterpret_cast<const char*>(p->w.data()),
                      static_cast<std::streamsize>(p->w.size() * sizeof(double)));
            if (include_moments) {
                out.write(reinterpret_cast<const char*>(p->m.data()),
                          static_cast<std::streamsize>(p->m.size() * sizeof(double)));
                out.write(reinterpret_cast<const char*>(p->v.data()),
                          static_cast<std::streamsize>(p->v.size() * sizeof(double)));
            }
        }
        if (!out) throw DataError("short write on checkpoint: " + path);
    }
    std::filesystem::rename(tmp, path);

    json j;
    j["denoiser"] = json::parse(meta.denoiser.to_json_string());
    j["schedule"] = {{"T", meta.schedule_T}, {"beta_start", meta.beta_start},
                     {"beta_end", meta.beta_end}};
    j["normalization"] = {{"scale", 127.5}, {"offset", -1.0}, {"range", "[-1,1]"}};
    j["iteration"] = meta.iteration;
    j["input_channels"] = meta.denoiser.in_channels;
    j["tdg"] = meta.denoiser.tdg;
    j["cfc"] = meta.denoiser.cfc;
    if (!meta.train_config_json.empty()) j["train"] = json::parse(meta.train_config_json);
    std::string jtmp = path + ".json.tmp";
    {
        std::ofstream out(jtmp, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint manifest: " + path + ".json");
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(jtmp, path + ".json");
}

CheckpointMeta load_checkpoint_meta(const std::string& path) {
    std::ifstream in(path + ".json", std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint manifest: " + path + ".json");
    json j = json::parse(in);
    CheckpointMeta meta;
    meta.denoiser = DenoiserConfig::from_json_string(j.at("denoiser").dump());
    meta.schedule_T = j.at("schedule").at("T").get<int>();
    meta.beta_start = j.at("schedule").at("beta_start").get<double>();
    meta.beta_end = j.at("schedule").at("beta_end").get<double>();
    meta.iteration = j.at("iteration").get<long>();
    if (j.contains("train")) meta.train_config_json = j.at("train").dump();
    return meta;
}

std::unique_ptr<Denoiser> load_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
    CheckpointMeta meta = load_checkpoint_meta(path);
    auto model = std::make_unique<Denoiser>(meta.denoiser, /*init_seed=*/0);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("bad checkpoint magic: " + path);
    }
    uint32_t count = read_u32(in);
    (void)read_i64(in);  // iteration lives in the manifest too
    bool has_moments = read_u32(in) != 0;

    auto& params = model->params().params;
    if (count != params.size()) {
        throw ConfigError("checkpoint parameter count mismatch for " + path);
    }
    for (auto& p : params) {
        uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != p->name) {
            throw ConfigError("checkpoint parameter order mismatch: expected " + p->name +
                              " found " + name);
        }
        int32_t dims[4];
        in.read(reinterpret_cast<char*>(dims), sizeof(dims));
        if (dims[0] != p->w.n || dims[1] != p->w.c || dims[2] != p->w.h || dims[3] != p->w.w) {
            throw ConfigError("checkpoint shape mismatch on " + name);
        }
        in.read(reinterpret_cast<char*>(p->w.data()),
                static_cast<std::streamsize>(p->w.size() * sizeof(double)));
        if (has_moments) {
            in.read(reinterpret_cast<char*>(p->m.data()),
                    static_cast<std::streamsize>(p->m.size() * sizeof(double)));
            in.read(reinterpret_cast<char*>(p->v.data()),
                    static_cast<std::streamsize>(p->v.size() * sizeof(double)));
        }
    }
    if (!in) throw DataError("truncated checkpoint: " + path);
    if (meta_out) *meta_out = meta;
    return model;
}

}  // namespace cmdiff
