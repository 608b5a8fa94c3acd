#pragma once

#include <cstddef>
#include <vector>

#include "tractokit/model/config.hpp"
#include "tractokit/nn/graph.hpp"
#include "tractokit/nn/layers.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit::model {

using nn::Graph;
using nn::NodeId;

// CNN over the (2*n_s, 2*n_s, 3) fiber-descriptor grid, fed channel-first as
// (B, 3, S, S). Four conv blocks ([Conv2D + relu] x2, 2x2 pool) with widths
// s_width * {1,2,4,8}, dropout after the second pool, then a global spatial
// max to the 8*s_width embedding. The classification head exists only for
// pretraining; embed() never touches it.
template <typename T>
class StreamlineEncoder {
public:
    StreamlineEncoder(const ModelConfig& cfg, Rng& rng);

    NodeId embed(Graph<T>& g, NodeId x);   // (B,3,S,S) -> (B, 8*s_width)
    NodeId logits(Graph<T>& g, NodeId x);  // embed -> head -> (B, num_classes)

    void params(std::vector<nn::Parameter<T>*>& out);  // head included
    void state(std::vector<nn::NamedTensor<T>>& out);
    // Frozen encoders also skip dropout: a frozen feature extractor must be
    // deterministic even inside a training graph.
    void set_frozen(bool on);
    bool frozen() const { return frozen_; }

    nn::Conv2D<T> c1a, c1b, c2a, c2b, c3a, c3b, c4a, c4b;
    nn::Linear<T> head;

private:
    std::size_t side_;
    double dropout_p_;
    bool frozen_ = false;
};

// PointNet over a cluster cloud (B, 3, n): pointwise conv+BN+relu to c_base,
// STN feature alignment at c_base, three more pointwise blocks up to
// 16*c_base, global max pool.
template <typename T>
class ClusterEncoder {
public:
    ClusterEncoder(const ModelConfig& cfg, Rng& rng);

    NodeId embed(Graph<T>& g, NodeId x);  // (B,3,n) -> (B, 16*c_base)

    void params(std::vector<nn::Parameter<T>*>& out);
    void state(std::vector<nn::NamedTensor<T>>& out);
    void set_frozen(bool on);

    nn::Conv1D<T> c1, c2, c3, c4;
    nn::BatchNorm<T> bn1, bn2, bn3, bn4;
    nn::STNkD<T> stn;
};

// Patch tokenizer plus discrete VAE. Tokens are per-patch mini-PointNet
// outputs; the dVAE encoder builds edge-conv features over the token graph
// and emits codebook logits per token; codes are Gumbel-softmax samples in
// training and argmax lookups otherwise; the decoder reconstructs patches
// and yields the patch embedding.
template <typename T>
class PatchEncoder {
public:
    PatchEncoder(const ModelConfig& cfg, Rng& rng);

    // (B, p_f, p_local, 3) -> (B, token_dim, p_f)
    NodeId tokenize(Graph<T>& g, NodeId patches);
    // (B, token_dim, p_f) -> (B, vocab, p_f)
    NodeId encode_logits(Graph<T>& g, NodeId tokens);
    // (B, vocab, p_f) -> (B*p_f, vocab): one row of codebook logits per token
    NodeId flat_logits(Graph<T>& g, NodeId logits);
    // (B, vocab, p_f) -> (B, token_dim, p_f) code tokens through the codebook
    NodeId code_tokens(Graph<T>& g, NodeId logits, double tau);

    struct Decoded {
        NodeId recon;      // (B, p_f, p_local, 3)
        NodeId embedding;  // (B, 4*token_dim)
    };
    Decoded decode(Graph<T>& g, NodeId codes);

    // full path: tokenize -> logits -> codes -> decode, returning the embedding
    NodeId embed(Graph<T>& g, NodeId patches, double tau = 1.0);

    void params(std::vector<nn::Parameter<T>*>& out);
    void state(std::vector<nn::NamedTensor<T>>& out);
    void set_frozen(bool on);

    nn::Conv1D<T> tok1, tok2, tok3;
    nn::Conv1D<T> enc_in;
    nn::EdgeConv<T> enc_e1, enc_e2, enc_e3, enc_e4;
    nn::Conv1D<T> enc_out;
    nn::Parameter<T> codebook;  // (vocab, token_dim)
    nn::Conv1D<T> dec_in;
    nn::EdgeConv<T> dec_e1, dec_e2, dec_e3, dec_e4;
    nn::Conv1D<T> dec_out;
    nn::Conv1D<T> rec1, rec2, rec3;
    nn::Linear<T> emb1, emb2;

private:
    std::size_t p_f_, p_local_, token_dim_, vocab_;
    bool embed_from_decoder_;
};

}  // namespace tractokit::model
