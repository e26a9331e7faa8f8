#include "fmrigen/nets/serialize.hpp"

#include "fmrigen/util/error.hpp"

namespace fmrigen::nets {

using nlohmann::json;

namespace {

json layers_to_json(const std::vector<ConvLayerSpec>& layers) {
    json out = json::array();
    for (const auto& l : layers) out.push_back({l.kernel, l.stride, l.channels});
    return out;
}

std::vector<ConvLayerSpec> layers_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw FormatError(what + " must be an array of [kernel,stride,channels]");
    std::vector<ConvLayerSpec> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 3)
            throw FormatError(what + " entries must be [kernel,stride,channels]");
        out.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
    }
    return out;
}

template <class T>
T field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw FormatError("arch config missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError("arch config field '" + key + "' has the wrong type");
    }
}

} // namespace

json arch_to_json(const ArchConfig& cfg) {
    json j;
    j["t"] = cfg.t;
    j["d"] = cfg.d;
    j["h"] = cfg.h;
    j["w"] = cfg.w;
    j["encoder_conv"] = layers_to_json(cfg.encoder_conv);
    j["disc_conv"] = layers_to_json(cfg.disc_conv);
    j["z_dim"] = cfg.z_dim;
    j["temporal_kind"] = temporal_kind_name(cfg.temporal_kind);
    j["disc_temporal_kind"] =
        cfg.disc_temporal_kind ? json(temporal_kind_name(*cfg.disc_temporal_kind)) : json();
    j["conv1d_layers"] = cfg.conv1d_layers;
    j["conv1d_kernel"] = cfg.conv1d_kernel;
    j["conv1d_stride"] = cfg.conv1d_stride;
    j["lstm_layers"] = cfg.lstm_layers;
    j["attn_heads"] = cfg.attn_heads;
    j["disc_mlp"] = cfg.disc_mlp;
    j["code_mlp"] = cfg.code_mlp;
    j["n_classes"] = cfg.n_classes;
    return j;
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig cfg;
    cfg.t = field<int>(j, "t");
    cfg.d = field<int>(j, "d");
    cfg.h = field<int>(j, "h");
    cfg.w = field<int>(j, "w");
    cfg.encoder_conv = layers_from_json(j.at("encoder_conv"), "encoder_conv");
    cfg.disc_conv = layers_from_json(j.at("disc_conv"), "disc_conv");
    cfg.z_dim = field<int>(j, "z_dim");
    cfg.temporal_kind = parse_temporal_kind(field<std::string>(j, "temporal_kind"));
    if (j.contains("disc_temporal_kind") && !j.at("disc_temporal_kind").is_null())
        cfg.disc_temporal_kind = parse_temporal_kind(j.at("disc_temporal_kind").get<std::string>());
    else
        cfg.disc_temporal_kind.reset();
    cfg.conv1d_layers = field<int>(j, "conv1d_layers");
    cfg.conv1d_kernel = field<int>(j, "conv1d_kernel");
    cfg.conv1d_stride = field<int>(j, "conv1d_stride");
    cfg.lstm_layers = field<int>(j, "lstm_layers");
    cfg.attn_heads = field<int>(j, "attn_heads");
    cfg.disc_mlp = field<std::vector<int>>(j, "disc_mlp");
    cfg.code_mlp = field<std::vector<int>>(j, "code_mlp");
    cfg.n_classes = field<int>(j, "n_classes");
    return cfg;
}

} // namespace fmrigen::nets
