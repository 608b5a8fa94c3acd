#pragma once

#include <cstddef>

namespace tractokit::model {

// Every architecture width derives from a handful of scale knobs so the full
// model and the reduced desk profile share one code path. Embedding sizes:
// streamline 8*s_width, cluster 16*c_base, patch 4*token_dim.
struct ModelConfig {
    std::size_t num_classes = 43;

    // streamline encoder: descriptor grid (2*n_s, 2*n_s, 3), conv block
    // widths s_width * {1,2,4,8}, dropout after the second pool
    std::size_t n_s = 15;
    std::size_t s_width = 32;
    double s_dropout = 0.25;

    // cluster encoder: pointwise widths c_base * {1,2,4,16}, STN at c_base
    std::size_t c_base = 64;

    // patch encoder: p_f patches of p_local points; tokens token_dim wide;
    // codebook vocab x token_dim; edge convs over knn_k token neighbors
    std::size_t p_f = 64;
    std::size_t p_local = 16;
    std::size_t token_dim = 256;  // multiple of 4
    std::size_t vocab = 8192;
    std::size_t knn_k = 4;
    // patch embedding from the decoder's widest feature map instead of the
    // flatten -> dense head on the code grid
    bool patch_embed_from_decoder = false;

    std::size_t classifier_hidden = 512;

    // ablation switches: which embeddings reach the fusion concat
    bool use_streamline = true;
    bool use_cluster = true;
    bool use_patch = true;

    std::size_t descriptor_side() const { return 2 * n_s; }
    std::size_t s_embed() const { return 8 * s_width; }
    std::size_t c_embed() const { return 16 * c_base; }
    std::size_t p_embed() const { return 4 * token_dim; }
    std::size_t fused_dim() const {
        return (use_streamline ? s_embed() : 0) + (use_cluster ? c_embed() : 0) +
               (use_patch ? p_embed() : 0);
    }

    // throws InvalidInputError on an inconsistent configuration
    void validate() const;

    static ModelConfig paper();  // full-scale widths
    static ModelConfig desk();   // reduced widths for laptop-scale runs
};

}  // namespace tractokit::model
