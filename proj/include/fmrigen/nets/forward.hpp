#pragma once

#include "fmrigen/ad/ops.hpp"
#include "fmrigen/core/types.hpp"
#include "fmrigen/nets/params.hpp"

// Forward passes for the four model components. Everything is templated on
// the scalar so training runs in float while gradient checks run the exact
// same code in double.
namespace fmrigen::nets {

template <class S>
ad::Tensor<S> positional_encoding(int t, int f) {
    ad::Tensor<S> pe({t, f});
    for (int ti = 0; ti < t; ++ti)
        for (int j = 0; j < f; ++j) {
            const double expo = static_cast<double>(2 * (j / 2)) / f;
            const double ang = ti / std::pow(10000.0, expo);
            pe.v[static_cast<size_t>(ti) * f + j] =
                static_cast<S>(j % 2 == 0 ? std::sin(ang) : std::cos(ang));
        }
    return pe;
}

namespace detail {

template <class S>
struct LstmStep {
    ad::Var<S> h, c;
};

template <class S>
LstmStep<S> lstm_cell(const ad::Var<S>& x, const LstmStep<S>& prev, const ad::Var<S>& wih,
                      const ad::Var<S>& whh, const ad::Var<S>& b, int hidden) {
    ad::Var<S> g = ad::add(ad::linear(x, wih, b), ad::matmul(prev.h, whh));
    ad::Var<S> i = ad::sigmoid_op(ad::slice_cols(g, 0, hidden));
    ad::Var<S> f = ad::sigmoid_op(ad::slice_cols(g, hidden, hidden));
    ad::Var<S> gg = ad::tanh_op(ad::slice_cols(g, 2 * hidden, hidden));
    ad::Var<S> o = ad::sigmoid_op(ad::slice_cols(g, 3 * hidden, hidden));
    LstmStep<S> next;
    next.c = ad::add(ad::mul(f, prev.c), ad::mul(i, gg));
    next.h = ad::mul(o, ad::tanh_op(next.c));
    return next;
}

template <class S>
struct LstmRun {
    ad::Var<S> seq;     // [T, hidden]
    ad::Var<S> final_h; // [1, hidden]
};

// One directional recurrence over the rows of x, zero initial state.
template <class S>
LstmRun<S> lstm_run(const ParamStore<S>& ps, const std::string& base, const ad::Var<S>& x,
                    int hidden) {
    const int t = x->val.dim(0);
    const ad::Var<S>& wih = ps.at(base + ".wih");
    const ad::Var<S>& whh = ps.at(base + ".whh");
    const ad::Var<S>& b = ps.at(base + ".b");
    LstmStep<S> st{ad::make_const(ad::Tensor<S>({1, hidden})),
                   ad::make_const(ad::Tensor<S>({1, hidden}))};
    std::vector<ad::Var<S>> rows;
    rows.reserve(static_cast<size_t>(t));
    for (int ti = 0; ti < t; ++ti) {
        st = lstm_cell(ad::slice_rows(x, ti, 1), st, wih, whh, b, hidden);
        rows.push_back(st.h);
    }
    return {ad::concat_rows(rows), st.h};
}

// Stacked (bi)directional recurrence; returns the per-step outputs of the
// last layer and the concatenated final states.
template <class S>
LstmRun<S> lstm_stack(const ParamStore<S>& ps, const std::string& prefix, ad::Var<S> x,
                      int layers, int hidden, bool bidir) {
    LstmRun<S> last{};
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        if (!bidir) {
            last = lstm_run(ps, base, x, hidden);
        } else {
            LstmRun<S> fw = lstm_run(ps, base + ".f", x, hidden);
            LstmRun<S> rv = lstm_run(ps, base + ".r", ad::reverse_rows(x), hidden);
            last.seq = ad::concat_cols(fw.seq, ad::reverse_rows(rv.seq));
            last.final_h = ad::concat_cols(fw.final_h, rv.final_h);
        }
        x = last.seq;
    }
    return last;
}

// Single dot-product self-attention layer. Positional terms feed only the
// q/k projections so a zero input still yields a zero output (the value
// path stays linear at zero).
template <class S>
ad::Var<S> attention_layer(const ParamStore<S>& ps, const std::string& prefix,
                           const ad::Var<S>& x, int heads, bool use_pe) {
    const int t = x->val.dim(0), f = x->val.dim(1);
    ad::Var<S> qk_in = x;
    if (use_pe) qk_in = ad::add(x, ad::make_const(positional_encoding<S>(t, f)));
    ad::Var<S> q = ad::linear(qk_in, ps.at(prefix + ".q.w"), ps.at(prefix + ".q.b"));
    ad::Var<S> k = ad::linear(qk_in, ps.at(prefix + ".k.w"), ps.at(prefix + ".k.b"));
    ad::Var<S> v = ad::linear(x, ps.at(prefix + ".v.w"), ps.at(prefix + ".v.b"));
    const int dh = f / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    ad::Var<S> merged;
    for (int hh = 0; hh < heads; ++hh) {
        ad::Var<S> qh = ad::slice_cols(q, hh * dh, dh);
        ad::Var<S> kh = ad::slice_cols(k, hh * dh, dh);
        ad::Var<S> vh = ad::slice_cols(v, hh * dh, dh);
        ad::Var<S> attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
        ad::Var<S> oh = ad::matmul(attn, vh);
        merged = hh == 0 ? oh : ad::concat_cols(merged, oh);
    }
    return ad::linear(merged, ps.at(prefix + ".o.w"), ps.at(prefix + ".o.b"));
}

} // namespace detail

// [T, F] frame features -> [1, agg_dim] aggregate vector.
template <class S>
ad::Var<S> temporal_aggregate(const ParamStore<S>& ps, const ArchConfig& cfg, TemporalKind kind,
                              const std::string& prefix, ad::Var<S> feats) {
    const int t = feats->val.dim(0), f = feats->val.dim(1);
    const TemporalTrace tr = trace_temporal(cfg, kind, t, f, prefix);
    switch (kind) {
        case TemporalKind::CONV1D: {
            const int p = pad_for(cfg.conv1d_kernel, cfg.conv1d_stride);
            for (int l = 0; l < cfg.conv1d_layers; ++l) {
                const std::string base = prefix + ".conv" + std::to_string(l);
                feats = ad::leaky_relu(ad::conv1d_lc(feats, ps.at(base + ".w"), ps.at(base + ".b"),
                                                     cfg.conv1d_stride, p));
            }
            return ad::reshape(feats, {1, tr.agg_dim});
        }
        case TemporalKind::LSTM:
            return detail::lstm_stack(ps, prefix, feats, cfg.lstm_layers, f, false).final_h;
        case TemporalKind::BILSTM:
            return detail::lstm_stack(ps, prefix, feats, cfg.lstm_layers, f / 2, true).final_h;
        case TemporalKind::ATTN_PE:
        case TemporalKind::ATTN_NOPE: {
            ad::Var<S> out = detail::attention_layer(ps, prefix, feats, cfg.attn_heads,
                                                     kind == TemporalKind::ATTN_PE);
            return ad::mean_over_rows(out);
        }
    }
    throw ValidationError("unreachable temporal kind");
}

// [1, agg_dim] -> [T, F]; the inverse of temporal_aggregate's shape map.
template <class S>
ad::Var<S> temporal_expand(const ParamStore<S>& ps, const ArchConfig& cfg, TemporalKind kind,
                           const std::string& prefix, ad::Var<S> agg, int t, int f) {
    const TemporalTrace tr = trace_temporal(cfg, kind, t, f, prefix);
    if (agg->val.dim(1) != tr.agg_dim)
        throw ConfigError(prefix + ": aggregate width " + std::to_string(agg->val.dim(1)) +
                          " does not match expected " + std::to_string(tr.agg_dim));
    switch (kind) {
        case TemporalKind::CONV1D: {
            const int p = pad_for(cfg.conv1d_kernel, cfg.conv1d_stride);
            ad::Var<S> x = ad::reshape(agg, {tr.conv_lens.back(), f});
            for (int l = cfg.conv1d_layers - 1; l >= 0; --l) {
                const int target = l == 0 ? t : tr.conv_lens[static_cast<size_t>(l - 1)];
                const int base_len = deconv_out_len(x->val.dim(0), cfg.conv1d_kernel,
                                                    cfg.conv1d_stride, p, 0);
                const int op = target - base_len;
                if (op < 0 || op >= cfg.conv1d_stride)
                    throw ConfigError(prefix + ": cannot invert temporal conv layer " +
                                      std::to_string(l));
                const std::string base = prefix + ".conv" + std::to_string(l);
                x = ad::leaky_relu(ad::conv1d_transpose_lc(x, ps.at(base + ".w"),
                                                           ps.at(base + ".b"), cfg.conv1d_stride,
                                                           p, op));
            }
            return x;
        }
        case TemporalKind::LSTM:
            return detail::lstm_stack(ps, prefix, ad::broadcast_row(agg, t), cfg.lstm_layers, f,
                                      false)
                .seq;
        case TemporalKind::BILSTM:
            return detail::lstm_stack(ps, prefix, ad::broadcast_row(agg, t), cfg.lstm_layers,
                                      f / 2, true)
                .seq;
        case TemporalKind::ATTN_PE:
        case TemporalKind::ATTN_NOPE:
            return detail::attention_layer(ps, prefix, ad::broadcast_row(agg, t), cfg.attn_heads,
                                           kind == TemporalKind::ATTN_PE);
    }
    throw ValidationError("unreachable temporal kind");
}

// Shared-weight per-frame conv stack: [T, 1, D, H, W] -> [T, F] with the
// frame axis as the batch.
template <class S>
ad::Var<S> conv_frame_features(const ParamStore<S>& ps, const std::vector<ConvLayerSpec>& layers,
                               const std::string& prefix, ad::Var<S> x) {
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string base = prefix + ".conv" + std::to_string(i);
        x = ad::leaky_relu(ad::conv3d(x, ps.at(base + ".w"), ps.at(base + ".b"), l.stride,
                                      pad_for(l.kernel, l.stride)));
    }
    const int t = x->val.dim(0);
    return ad::reshape(x, {t, static_cast<int>(x->val.size() / t)});
}

template <class S>
void check_input_shape(const ArchConfig& cfg, const ad::Var<S>& x, const std::string& who) {
    const std::vector<int> want{cfg.t, 1, cfg.d, cfg.h, cfg.w};
    if (x->val.shape != want)
        throw ConfigError(who + ": input shape " + x->val.shape_str() + " does not match config [" +
                          std::to_string(cfg.t) + ",1," + std::to_string(cfg.d) + "," +
                          std::to_string(cfg.h) + "," + std::to_string(cfg.w) + "]");
}

// x [T, 1, D, H, W] -> z [1, z_dim]
template <class S>
ad::Var<S> encode(const ParamStore<S>& ps, const ArchConfig& cfg, const ad::Var<S>& x) {
    check_input_shape(cfg, x, "encode");
    ad::Var<S> feats = conv_frame_features(ps, cfg.encoder_conv, "enc", x);
    ad::Var<S> agg = temporal_aggregate(ps, cfg, cfg.temporal_kind, "enc.tmp", feats);
    return ad::linear(agg, ps.at("enc.out.w"), ps.at("enc.out.b"));
}

// z [1, z_dim] + label -> volume sequence [T, 1, D, H, W] in [-1, 1]
template <class S>
ad::Var<S> generate(const ParamStore<S>& ps, const ArchConfig& cfg, const ad::Var<S>& z,
                    core::Label label) {
    if (z->val.shape != std::vector<int>{1, cfg.z_dim})
        throw ValidationError("generate: z must be [1, " + std::to_string(cfg.z_dim) + "], got " +
                              z->val.shape_str());
    ad::Tensor<S> onehot({1, cfg.n_classes});
    onehot.v[label == core::Label::ASD ? 0 : 1] = S(1);
    ad::Var<S> zin = ad::concat_cols(z, ad::make_const(std::move(onehot)));
    ad::Var<S> agg = ad::leaky_relu(ad::linear(zin, ps.at("gen.in.w"), ps.at("gen.in.b")));

    const StackTrace enc = trace_conv_stack({cfg.d, cfg.h, cfg.w}, cfg.encoder_conv, "encoder");
    ad::Var<S> feats =
        temporal_expand(ps, cfg, cfg.temporal_kind, "gen.tmp", agg, cfg.t, enc.feat_dim);

    const size_t n = cfg.encoder_conv.size();
    const auto& last = enc.spatial.back();
    ad::Var<S> vol = ad::reshape(feats, {cfg.t, cfg.encoder_conv.back().channels, last[0], last[1],
                                         last[2]});
    for (size_t j = 0; j < n; ++j) {
        const size_t i = n - 1 - j;
        const auto& l = cfg.encoder_conv[i];
        const int p = pad_for(l.kernel, l.stride);
        const std::array<int, 3> target =
            i == 0 ? std::array<int, 3>{cfg.d, cfg.h, cfg.w} : enc.spatial[i - 1];
        int op[3];
        for (int a = 0; a < 3; ++a) {
            const int base_len =
                deconv_out_len(vol->val.dim(2 + a), l.kernel, l.stride, p, 0);
            op[a] = target[static_cast<size_t>(a)] - base_len;
            if (op[a] < 0 || op[a] >= l.stride)
                throw ConfigError("generator: cannot invert encoder conv layer " +
                                  std::to_string(i));
        }
        const std::string base = "gen.deconv" + std::to_string(j);
        vol = ad::conv3d_transpose(vol, ps.at(base + ".w"), ps.at(base + ".b"), l.stride, p,
                                   op[0], op[1], op[2]);
        vol = j + 1 == n ? ad::tanh_op(vol) : ad::leaky_relu(vol);
    }
    return vol;
}

template <class S>
ad::Var<S> mlp_head(const ParamStore<S>& ps, const std::string& prefix, int n_hidden,
                    ad::Var<S> x) {
    for (int i = 0; i < n_hidden; ++i) {
        const std::string base = prefix + ".mlp" + std::to_string(i);
        x = ad::leaky_relu(ad::linear(x, ps.at(base + ".w"), ps.at(base + ".b")));
    }
    return ad::sigmoid_op(ad::linear(x, ps.at(prefix + ".out.w"), ps.at(prefix + ".out.b")));
}

// x [T, 1, D, H, W] -> real/synthetic probability [1, 1]
template <class S>
ad::Var<S> discriminate(const ParamStore<S>& ps, const ArchConfig& cfg, const ad::Var<S>& x) {
    check_input_shape(cfg, x, "discriminate");
    ad::Var<S> feats = conv_frame_features(ps, cfg.disc_conv, "disc", x);
    ad::Var<S> agg = temporal_aggregate(ps, cfg, cfg.disc_kind(), "disc.tmp", feats);
    return mlp_head(ps, "disc", static_cast<int>(cfg.disc_mlp.size()), agg);
}

// z [1, z_dim] -> encoder-code probability [1, 1]
template <class S>
ad::Var<S> code_discriminate(const ParamStore<S>& ps, const ArchConfig& cfg, const ad::Var<S>& z) {
    if (z->val.shape != std::vector<int>{1, cfg.z_dim})
        throw ValidationError("code_discriminate: z must be [1, " + std::to_string(cfg.z_dim) +
                              "], got " + z->val.shape_str());
    return mlp_head(ps, "code", static_cast<int>(cfg.code_mlp.size()), z);
}

// Glue between the on-disk sequence type and network tensors.
ad::Tensor<float> seq_to_tensor(const core::VolumeSequence& seq);
core::VolumeSequence tensor_to_seq(const ad::Tensor<float>& t, const ArchConfig& cfg);

} // namespace fmrigen::nets
