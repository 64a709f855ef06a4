#include "wzjscc/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"

namespace wzjscc::codec {

namespace {

constexpr std::array<char, 8> kMagic{'W', 'Z', 'J', 'S', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw ConfigError(fmt::format("checkpoint {} is truncated", path.string()));
    }
    return value;
}

struct RawParameter {
    ParameterInfo info;
    std::vector<double> values;
};

struct RawCheckpoint {
    std::uint32_t version = 0;
    ModelConfig config;
    std::vector<RawParameter> parameters;
};

RawCheckpoint read_raw(const std::filesystem::path& path, bool with_values) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingResource(fmt::format("checkpoint {} not found", path.string()));
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw ConfigError(fmt::format("{} is not a wzjscc checkpoint", path.string()));
    }
    RawCheckpoint raw;
    raw.version = get<std::uint32_t>(in, path);
    if (raw.version != kCheckpointVersion) {
        throw ConfigError(fmt::format("checkpoint {} has format version {}, expected {}", path.string(), raw.version,
                                      kCheckpointVersion));
    }
    const auto config_len = get<std::uint64_t>(in, path);
    std::string text(config_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(config_len));
    if (!in) {
        throw ConfigError(fmt::format("checkpoint {} is truncated", path.string()));
    }
    raw.config = nlohmann::json::parse(text).get<ModelConfig>();
    const auto count = get<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < count; ++i) {
        RawParameter p;
        const auto name_len = get<std::uint32_t>(in, path);
        p.info.name.resize(name_len);
        in.read(p.info.name.data(), name_len);
        p.info.shape.n = get<std::int32_t>(in, path);
        p.info.shape.c = get<std::int32_t>(in, path);
        p.info.shape.h = get<std::int32_t>(in, path);
        p.info.shape.w = get<std::int32_t>(in, path);
        const std::size_t numel = p.info.shape.numel();
        if (with_values) {
            p.values.resize(numel);
            in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(numel * sizeof(double)));
        } else {
            in.seekg(static_cast<std::streamoff>(numel * sizeof(double)), std::ios::cur);
        }
        if (!in) {
            throw ConfigError(fmt::format("checkpoint {} is truncated", path.string()));
        }
        raw.parameters.push_back(std::move(p));
    }
    return raw;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const VariantModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError(fmt::format("cannot write checkpoint {}", path.string()));
    }
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string text = nlohmann::json(model.config()).dump();
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto params = model.parameters();
    put<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const nn::Shape s = p.tensor.shape();
        put<std::int32_t>(out, s.n);
        put<std::int32_t>(out, s.c);
        put<std::int32_t>(out, s.h);
        put<std::int32_t>(out, s.w);
        const auto values = p.tensor.data();
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) {
        throw ConfigError(fmt::format("failed writing checkpoint {}", path.string()));
    }
}

VariantModel load_checkpoint(const std::filesystem::path& path) {
    RawCheckpoint raw = read_raw(path, true);
    VariantModel model(raw.config);
    auto params = model.parameters();
    if (params.size() != raw.parameters.size()) {
        throw ConfigError(fmt::format("checkpoint {} holds {} arrays, configuration implies {}", path.string(),
                                      raw.parameters.size(), params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& stored = raw.parameters[i];
        if (stored.info.name != params[i].name || stored.info.shape != params[i].tensor.shape()) {
            throw ConfigError(fmt::format("checkpoint {}: array '{}' {} does not match '{}' {}", path.string(),
                                          stored.info.name, stored.info.shape.str(), params[i].name,
                                          params[i].tensor.shape().str()));
        }
        std::copy(stored.values.begin(), stored.values.end(), params[i].tensor.mutable_data().begin());
    }
    return model;
}

VariantModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    const CheckpointInfo info = inspect_checkpoint(path);
    if (!(info.config == expected)) {
        throw ConfigError(fmt::format("checkpoint {} was written for configuration {} but {} was requested",
                                      path.string(), nlohmann::json(info.config).dump(),
                                      nlohmann::json(expected).dump()));
    }
    return load_checkpoint(path);
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
    RawCheckpoint raw = read_raw(path, false);
    CheckpointInfo info;
    info.version = raw.version;
    info.config = raw.config;
    for (auto& p : raw.parameters) {
        info.total_parameters += p.info.shape.numel();
        info.parameters.push_back(std::move(p.info));
    }
    return info;
}

} // namespace wzjscc::codec
