#include "fmrigen/nets/params.hpp"

namespace fmrigen::nets {

namespace {

void add(std::vector<ParamSpec>& out, std::string name, std::vector<int> shape, int fan_in) {
    out.push_back({std::move(name), std::move(shape), fan_in});
}

// Temporal-stage parameters shared by the aggregate (encoder/discriminator)
// and expand (generator) directions; shapes coincide, layouts differ only
// for the 1-D conv weights ([Co,Ci,k] forward, [Ci,Co,k] transpose).
void add_temporal(std::vector<ParamSpec>& out, const ArchConfig& cfg, TemporalKind kind,
                  const std::string& prefix, int feat_dim) {
    switch (kind) {
        case TemporalKind::CONV1D:
            for (int l = 0; l < cfg.conv1d_layers; ++l) {
                add(out, prefix + ".conv" + std::to_string(l) + ".w",
                    {feat_dim, feat_dim, cfg.conv1d_kernel}, feat_dim * cfg.conv1d_kernel);
                add(out, prefix + ".conv" + std::to_string(l) + ".b", {feat_dim}, 0);
            }
            break;
        case TemporalKind::LSTM:
        case TemporalKind::BILSTM: {
            const bool bidir = kind == TemporalKind::BILSTM;
            const int hidden = bidir ? feat_dim / 2 : feat_dim;
            const int step_out = bidir ? 2 * hidden : hidden;
            for (int l = 0; l < cfg.lstm_layers; ++l) {
                const int in = l == 0 ? feat_dim : step_out;
                for (const char* dir : bidir ? std::vector<const char*>{".f", ".r"}
                                             : std::vector<const char*>{""}) {
                    const std::string base = prefix + ".l" + std::to_string(l) + dir;
                    add(out, base + ".wih", {in, 4 * hidden}, in);
                    add(out, base + ".whh", {hidden, 4 * hidden}, hidden);
                    add(out, base + ".b", {1, 4 * hidden}, 0);
                }
            }
            break;
        }
        case TemporalKind::ATTN_PE:
        case TemporalKind::ATTN_NOPE:
            for (const char* p : {"q", "k", "v", "o"}) {
                add(out, prefix + "." + p + ".w", {feat_dim, feat_dim}, feat_dim);
                add(out, prefix + "." + p + ".b", {1, feat_dim}, 0);
            }
            break;
    }
}

} // namespace

std::vector<ParamSpec> param_specs(const ArchConfig& cfg) {
    std::vector<ParamSpec> out;
    const StackTrace enc = trace_conv_stack({cfg.d, cfg.h, cfg.w}, cfg.encoder_conv, "encoder");
    const TemporalTrace enc_tmp =
        trace_temporal(cfg, cfg.temporal_kind, cfg.t, enc.feat_dim, "encoder");
    const StackTrace dsc = trace_conv_stack({cfg.d, cfg.h, cfg.w}, cfg.disc_conv, "discriminator");
    const TemporalTrace dsc_tmp =
        trace_temporal(cfg, cfg.disc_kind(), cfg.t, dsc.feat_dim, "discriminator");

    // Encoder: conv stack, temporal aggregation, projection to z.
    int ci = 1;
    for (size_t i = 0; i < cfg.encoder_conv.size(); ++i) {
        const auto& l = cfg.encoder_conv[i];
        add(out, "enc.conv" + std::to_string(i) + ".w", {l.channels, ci, l.kernel, l.kernel, l.kernel},
            ci * l.kernel * l.kernel * l.kernel);
        add(out, "enc.conv" + std::to_string(i) + ".b", {l.channels}, 0);
        ci = l.channels;
    }
    add_temporal(out, cfg, cfg.temporal_kind, "enc.tmp", enc.feat_dim);
    add(out, "enc.out.w", {enc_tmp.agg_dim, cfg.z_dim}, enc_tmp.agg_dim);
    add(out, "enc.out.b", {1, cfg.z_dim}, 0);

    // Generator: (z ++ one-hot) to the aggregate shape, inverse temporal
    // stage, transpose-conv stack back to one channel.
    add(out, "gen.in.w", {cfg.z_dim + cfg.n_classes, enc_tmp.agg_dim}, cfg.z_dim + cfg.n_classes);
    add(out, "gen.in.b", {1, enc_tmp.agg_dim}, 0);
    add_temporal(out, cfg, cfg.temporal_kind, "gen.tmp", enc.feat_dim);
    for (size_t j = 0; j < cfg.encoder_conv.size(); ++j) {
        const size_t i = cfg.encoder_conv.size() - 1 - j; // inverts encoder layer i
        const auto& l = cfg.encoder_conv[i];
        const int co = i == 0 ? 1 : cfg.encoder_conv[i - 1].channels;
        add(out, "gen.deconv" + std::to_string(j) + ".w",
            {l.channels, co, l.kernel, l.kernel, l.kernel},
            l.channels * l.kernel * l.kernel * l.kernel);
        add(out, "gen.deconv" + std::to_string(j) + ".b", {co}, 0);
    }

    // Discriminator: conv stack, temporal stage, MLP head.
    ci = 1;
    for (size_t i = 0; i < cfg.disc_conv.size(); ++i) {
        const auto& l = cfg.disc_conv[i];
        add(out, "disc.conv" + std::to_string(i) + ".w",
            {l.channels, ci, l.kernel, l.kernel, l.kernel}, ci * l.kernel * l.kernel * l.kernel);
        add(out, "disc.conv" + std::to_string(i) + ".b", {l.channels}, 0);
        ci = l.channels;
    }
    add_temporal(out, cfg, cfg.disc_kind(), "disc.tmp", dsc.feat_dim);
    int width = dsc_tmp.agg_dim;
    for (size_t i = 0; i < cfg.disc_mlp.size(); ++i) {
        add(out, "disc.mlp" + std::to_string(i) + ".w", {width, cfg.disc_mlp[i]}, width);
        add(out, "disc.mlp" + std::to_string(i) + ".b", {1, cfg.disc_mlp[i]}, 0);
        width = cfg.disc_mlp[i];
    }
    add(out, "disc.out.w", {width, 1}, width);
    add(out, "disc.out.b", {1, 1}, 0);

    // Code discriminator: MLP on z.
    width = cfg.z_dim;
    for (size_t i = 0; i < cfg.code_mlp.size(); ++i) {
        add(out, "code.mlp" + std::to_string(i) + ".w", {width, cfg.code_mlp[i]}, width);
        add(out, "code.mlp" + std::to_string(i) + ".b", {1, cfg.code_mlp[i]}, 0);
        width = cfg.code_mlp[i];
    }
    add(out, "code.out.w", {width, 1}, width);
    add(out, "code.out.b", {1, 1}, 0);
    return out;
}

} // namespace fmrigen::nets
