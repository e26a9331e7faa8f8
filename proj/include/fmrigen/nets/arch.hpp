#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fmrigen/util/error.hpp"

namespace fmrigen::nets {

struct ConvLayerSpec {
    int kernel = 1;
    int stride = 1;
    int channels = 1;
};

enum class TemporalKind { CONV1D, LSTM, BILSTM, ATTN_PE, ATTN_NOPE };

std::string temporal_kind_name(TemporalKind k);
TemporalKind parse_temporal_kind(const std::string& s);

struct ArchConfig {
    int t = 24, d = 16, h = 16, w = 16;
    std::vector<ConvLayerSpec> encoder_conv{{4, 2, 2}, {4, 2, 4}, {4, 2, 8}, {4, 2, 8}};
    std::vector<ConvLayerSpec> disc_conv{{8, 4, 4}, {4, 2, 8}, {4, 1, 16}};
    int z_dim = 64;
    TemporalKind temporal_kind = TemporalKind::CONV1D;
    // Discriminator temporal stage follows the encoder's kind unless set.
    std::optional<TemporalKind> disc_temporal_kind;
    int conv1d_layers = 2, conv1d_kernel = 8, conv1d_stride = 4;
    int lstm_layers = 2;
    int attn_heads = 1;
    std::vector<int> disc_mlp{64};
    std::vector<int> code_mlp{64};
    int n_classes = 2;

    TemporalKind disc_kind() const { return disc_temporal_kind.value_or(temporal_kind); }
    void validate() const;
};

// Full-scale profile mirroring the published architecture; the default
// ArchConfig above is the desk-scale profile.
ArchConfig paper_arch();

// floor((in + 2 pad - kernel)/stride) + 1, erroring when the result is not
// positive. `what` names the offending layer in the error.
int conv_out_len(int in, int kernel, int stride, int pad, const std::string& what);

// Padding rule applied to every conv layer: (kernel - stride) / 2.
int pad_for(int kernel, int stride);

// (in - 1)*stride - 2*pad + kernel + output_padding
int deconv_out_len(int in, int kernel, int stride, int pad, int output_padding);

struct StackTrace {
    std::vector<std::array<int, 3>> spatial; // per-layer output (D, H, W)
    std::vector<int> channels;
    int feat_dim = 0; // channels_last * D * H * W of the last layer
};

StackTrace trace_conv_stack(const std::array<int, 3>& in,
                            const std::vector<ConvLayerSpec>& layers, const std::string& name);

struct TemporalTrace {
    std::vector<int> conv_lens; // CONV1D only: per-layer output lengths
    int agg_dim = 0;            // width of the aggregate vector
};

TemporalTrace trace_temporal(const ArchConfig& cfg, TemporalKind kind, int t, int feat_dim,
                             const std::string& name);

} // namespace fmrigen::nets
