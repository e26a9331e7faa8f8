#include "fmrigen/nets/arch.hpp"

namespace fmrigen::nets {

std::string temporal_kind_name(TemporalKind k) {
    switch (k) {
        case TemporalKind::CONV1D: return "CONV1D";
        case TemporalKind::LSTM: return "LSTM";
        case TemporalKind::BILSTM: return "BILSTM";
        case TemporalKind::ATTN_PE: return "ATTN_PE";
        default: return "ATTN_NOPE";
    }
}

TemporalKind parse_temporal_kind(const std::string& s) {
    if (s == "CONV1D") return TemporalKind::CONV1D;
    if (s == "LSTM") return TemporalKind::LSTM;
    if (s == "BILSTM") return TemporalKind::BILSTM;
    if (s == "ATTN_PE") return TemporalKind::ATTN_PE;
    if (s == "ATTN_NOPE") return TemporalKind::ATTN_NOPE;
    throw ConfigError("unknown temporal kind '" + s +
                      "' (expected CONV1D|LSTM|BILSTM|ATTN_PE|ATTN_NOPE)");
}

int conv_out_len(int in, int kernel, int stride, int pad, const std::string& what) {
    const int num = in + 2 * pad - kernel;
    const int q = num >= 0 ? num / stride : -((-num + stride - 1) / stride);
    const int out = q + 1;
    if (out < 1)
        throw ConfigError(what + ": input length " + std::to_string(in) +
                          " too short for kernel " + std::to_string(kernel) + " stride " +
                          std::to_string(stride) + " pad " + std::to_string(pad));
    return out;
}

int pad_for(int kernel, int stride) { return (kernel - stride) / 2; }

int deconv_out_len(int in, int kernel, int stride, int pad, int output_padding) {
    return (in - 1) * stride - 2 * pad + kernel + output_padding;
}

StackTrace trace_conv_stack(const std::array<int, 3>& in,
                            const std::vector<ConvLayerSpec>& layers, const std::string& name) {
    if (layers.empty()) throw ConfigError(name + ": conv stack must have at least one layer");
    StackTrace tr;
    std::array<int, 3> cur = in;
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const int p = pad_for(l.kernel, l.stride);
        const std::string what = name + " layer " + std::to_string(i);
        for (int a = 0; a < 3; ++a)
            cur[static_cast<size_t>(a)] =
                conv_out_len(cur[static_cast<size_t>(a)], l.kernel, l.stride, p, what);
        tr.spatial.push_back(cur);
        tr.channels.push_back(l.channels);
    }
    tr.feat_dim = layers.back().channels * cur[0] * cur[1] * cur[2];
    return tr;
}

TemporalTrace trace_temporal(const ArchConfig& cfg, TemporalKind kind, int t, int feat_dim,
                             const std::string& name) {
    TemporalTrace tr;
    switch (kind) {
        case TemporalKind::CONV1D: {
            const int p = pad_for(cfg.conv1d_kernel, cfg.conv1d_stride);
            int len = t;
            for (int i = 0; i < cfg.conv1d_layers; ++i) {
                len = conv_out_len(len, cfg.conv1d_kernel, cfg.conv1d_stride, p,
                                   name + " temporal conv layer " + std::to_string(i));
                tr.conv_lens.push_back(len);
            }
            tr.agg_dim = len * feat_dim;
            break;
        }
        case TemporalKind::LSTM:
            tr.agg_dim = feat_dim;
            break;
        case TemporalKind::BILSTM:
            if (feat_dim % 2 != 0)
                throw ConfigError(name + ": BILSTM needs an even feature dim, got " +
                                  std::to_string(feat_dim));
            tr.agg_dim = feat_dim;
            break;
        case TemporalKind::ATTN_PE:
        case TemporalKind::ATTN_NOPE:
            if (cfg.attn_heads < 1 || feat_dim % cfg.attn_heads != 0)
                throw ConfigError(name + ": attention heads (" + std::to_string(cfg.attn_heads) +
                                  ") must divide the feature dim (" + std::to_string(feat_dim) +
                                  ")");
            tr.agg_dim = feat_dim;
            break;
    }
    return tr;
}

void ArchConfig::validate() const {
    if (t < 1 || d < 1 || h < 1 || w < 1)
        throw ConfigError("input dims must all be >= 1");
    if (z_dim < 1) throw ConfigError("z_dim must be >= 1");
    if (n_classes != 2) throw ConfigError("exactly two class labels are supported");
    auto check_layers = [](const std::vector<ConvLayerSpec>& ls, const std::string& name) {
        for (size_t i = 0; i < ls.size(); ++i) {
            const auto& l = ls[i];
            if (l.stride < 1 || l.kernel < l.stride)
                throw ConfigError(name + " layer " + std::to_string(i) +
                                  ": need kernel >= stride >= 1");
            if (l.channels < 1)
                throw ConfigError(name + " layer " + std::to_string(i) + ": channels must be >= 1");
        }
    };
    check_layers(encoder_conv, "encoder");
    check_layers(disc_conv, "discriminator");
    if (conv1d_layers < 1) throw ConfigError("conv1d_layers must be >= 1");
    if (conv1d_stride < 1 || conv1d_kernel < conv1d_stride)
        throw ConfigError("temporal conv needs kernel >= stride >= 1");
    if (lstm_layers < 1) throw ConfigError("lstm_layers must be >= 1");
    if (attn_heads < 1) throw ConfigError("attn_heads must be >= 1");
    for (int wdt : disc_mlp)
        if (wdt < 1) throw ConfigError("disc_mlp widths must be >= 1");
    for (int wdt : code_mlp)
        if (wdt < 1) throw ConfigError("code_mlp widths must be >= 1");

    const StackTrace enc = trace_conv_stack({d, h, w}, encoder_conv, "encoder");
    trace_temporal(*this, temporal_kind, t, enc.feat_dim, "encoder");
    const StackTrace dsc = trace_conv_stack({d, h, w}, disc_conv, "discriminator");
    trace_temporal(*this, disc_kind(), t, dsc.feat_dim, "discriminator");
}

ArchConfig paper_arch() {
    ArchConfig c;
    c.t = 146;
    c.d = 91;
    c.h = 109;
    c.w = 91;
    c.encoder_conv = {{16, 2, 4}, {8, 2, 8}, {4, 2, 16}, {2, 1, 24}};
    c.disc_conv = {{8, 4, 4}, {4, 2, 8}, {4, 1, 16}};
    c.z_dim = 864;
    return c;
}

} // namespace fmrigen::nets
