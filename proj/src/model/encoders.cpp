#include "tractokit/model/encoders.hpp"

#include <cstddef>
#include <string>

#include "tractokit/nn/ops.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::model {

using nn::Shape;

namespace {

void need(bool ok, const std::string& what) {
    if (!ok) throw InvalidInputError("encoder: " + what);
}

template <typename T>
void check_rank(const Graph<T>& g, NodeId x, std::size_t rank, const char* who) {
    need(g.val(x).rank() == rank, std::string(who) + ": wrong input rank");
}

}  // namespace

// ---------------------------------------------------------------- streamline

template <typename T>
StreamlineEncoder<T>::StreamlineEncoder(const ModelConfig& cfg, Rng& rng)
    : c1a("senc.c1a", 3, cfg.s_width, rng),
      c1b("senc.c1b", cfg.s_width, cfg.s_width, rng),
      c2a("senc.c2a", cfg.s_width, 2 * cfg.s_width, rng),
      c2b("senc.c2b", 2 * cfg.s_width, 2 * cfg.s_width, rng),
      c3a("senc.c3a", 2 * cfg.s_width, 4 * cfg.s_width, rng),
      c3b("senc.c3b", 4 * cfg.s_width, 4 * cfg.s_width, rng),
      c4a("senc.c4a", 4 * cfg.s_width, 8 * cfg.s_width, rng),
      c4b("senc.c4b", 8 * cfg.s_width, 8 * cfg.s_width, rng),
      head("senc.head", 8 * cfg.s_width, cfg.num_classes, rng),
      side_(cfg.descriptor_side()),
      dropout_p_(cfg.s_dropout) {}

template <typename T>
NodeId StreamlineEncoder<T>::embed(Graph<T>& g, NodeId x) {
    check_rank(g, x, 4, "streamline");
    const auto& s = g.val(x).shape;
    need(s[1] == 3 && s[2] == side_ && s[3] == side_,
         "streamline: descriptor batch must be (B,3," + std::to_string(side_) + "," +
             std::to_string(side_) + ")");
    auto block = [&](nn::Conv2D<T>& a, nn::Conv2D<T>& b, NodeId h) {
        h = nn::relu(g, a.forward(g, h));
        h = nn::relu(g, b.forward(g, h));
        return nn::maxpool2x2(g, h);
    };
    NodeId h = block(c1a, c1b, x);
    h = block(c2a, c2b, h);
    if (!frozen_) h = nn::dropout(g, h, dropout_p_);
    h = block(c3a, c3b, h);
    h = block(c4a, c4b, h);
    return nn::global_maxpool(g, h);
}

template <typename T>
NodeId StreamlineEncoder<T>::logits(Graph<T>& g, NodeId x) {
    return head.forward(g, embed(g, x));
}

template <typename T>
void StreamlineEncoder<T>::params(std::vector<nn::Parameter<T>*>& out) {
    for (auto* c : {&c1a, &c1b, &c2a, &c2b, &c3a, &c3b, &c4a, &c4b}) c->params(out);
    head.params(out);
}

template <typename T>
void StreamlineEncoder<T>::state(std::vector<nn::NamedTensor<T>>& out) {
    for (auto* c : {&c1a, &c1b, &c2a, &c2b, &c3a, &c3b, &c4a, &c4b}) c->state(out);
    head.state(out);
}

template <typename T>
void StreamlineEncoder<T>::set_frozen(bool on) {
    frozen_ = on;
    std::vector<nn::Parameter<T>*> ps;
    params(ps);
    for (auto* p : ps) p->freeze(on);
}

// ------------------------------------------------------------------- cluster

template <typename T>
ClusterEncoder<T>::ClusterEncoder(const ModelConfig& cfg, Rng& rng)
    : c1("cenc.c1", 3, cfg.c_base, rng),
      c2("cenc.c2", cfg.c_base, 2 * cfg.c_base, rng),
      c3("cenc.c3", 2 * cfg.c_base, 4 * cfg.c_base, rng),
      c4("cenc.c4", 4 * cfg.c_base, 16 * cfg.c_base, rng),
      bn1("cenc.bn1", cfg.c_base),
      bn2("cenc.bn2", 2 * cfg.c_base),
      bn3("cenc.bn3", 4 * cfg.c_base),
      bn4("cenc.bn4", 16 * cfg.c_base),
      stn("cenc.stn", cfg.c_base, cfg.c_base, rng) {}

template <typename T>
NodeId ClusterEncoder<T>::embed(Graph<T>& g, NodeId x) {
    check_rank(g, x, 3, "cluster");
    need(g.val(x).shape[1] == 3, "cluster: cloud batch must be (B,3,n)");
    NodeId h = nn::relu(g, bn1.forward(g, c1.forward(g, x)));
    h = stn.forward(g, h);
    h = nn::relu(g, bn2.forward(g, c2.forward(g, h)));
    h = nn::relu(g, bn3.forward(g, c3.forward(g, h)));
    h = nn::relu(g, bn4.forward(g, c4.forward(g, h)));
    return nn::global_maxpool(g, h);
}

template <typename T>
void ClusterEncoder<T>::params(std::vector<nn::Parameter<T>*>& out) {
    c1.params(out);
    bn1.params(out);
    stn.params(out);
    c2.params(out);
    bn2.params(out);
    c3.params(out);
    bn3.params(out);
    c4.params(out);
    bn4.params(out);
}

template <typename T>
void ClusterEncoder<T>::state(std::vector<nn::NamedTensor<T>>& out) {
    c1.state(out);
    bn1.state(out);
    stn.state(out);
    c2.state(out);
    bn2.state(out);
    c3.state(out);
    bn3.state(out);
    c4.state(out);
    bn4.state(out);
}

template <typename T>
void ClusterEncoder<T>::set_frozen(bool on) {
    std::vector<nn::Parameter<T>*> ps;
    params(ps);
    for (auto* p : ps) p->freeze(on);
}

// --------------------------------------------------------------------- patch

template <typename T>
PatchEncoder<T>::PatchEncoder(const ModelConfig& cfg, Rng& rng)
    : tok1("penc.tok1", 3, cfg.token_dim / 4, rng),
      tok2("penc.tok2", cfg.token_dim / 4, cfg.token_dim / 2, rng),
      tok3("penc.tok3", cfg.token_dim / 2, cfg.token_dim, rng),
      enc_in("penc.enc_in", cfg.token_dim, cfg.token_dim / 2, rng),
      enc_e1("penc.enc_e1", cfg.token_dim / 2, cfg.token_dim, cfg.knn_k, rng),
      enc_e2("penc.enc_e2", cfg.token_dim, 2 * cfg.token_dim, cfg.knn_k, rng),
      enc_e3("penc.enc_e3", 2 * cfg.token_dim, 2 * cfg.token_dim, cfg.knn_k, rng),
      enc_e4("penc.enc_e4", 2 * cfg.token_dim, 4 * cfg.token_dim, cfg.knn_k, rng),
      enc_out("penc.enc_out", 9 * cfg.token_dim, cfg.vocab, rng),
      codebook("penc.codebook", Shape{cfg.vocab, cfg.token_dim}),
      dec_in("penc.dec_in", cfg.token_dim, cfg.token_dim / 2, rng),
      dec_e1("penc.dec_e1", cfg.token_dim / 2, cfg.token_dim, cfg.knn_k, rng),
      dec_e2("penc.dec_e2", cfg.token_dim, 2 * cfg.token_dim, cfg.knn_k, rng),
      dec_e3("penc.dec_e3", 2 * cfg.token_dim, 2 * cfg.token_dim, cfg.knn_k, rng),
      dec_e4("penc.dec_e4", 2 * cfg.token_dim, 4 * cfg.token_dim, cfg.knn_k, rng),
      dec_out("penc.dec_out", 9 * cfg.token_dim, cfg.token_dim, rng),
      rec1("penc.rec1", cfg.token_dim, 4 * cfg.token_dim, rng),
      rec2("penc.rec2", 4 * cfg.token_dim, 4 * cfg.token_dim, rng),
      rec3("penc.rec3", 4 * cfg.token_dim, 3 * cfg.p_local, rng),
      emb1("penc.emb1", cfg.p_f * cfg.token_dim, 16 * cfg.token_dim, rng),
      emb2("penc.emb2", 16 * cfg.token_dim, 4 * cfg.token_dim, rng),
      p_f_(cfg.p_f),
      p_local_(cfg.p_local),
      token_dim_(cfg.token_dim),
      vocab_(cfg.vocab),
      embed_from_decoder_(cfg.patch_embed_from_decoder) {
    for (std::size_t i = 0; i < codebook.value.numel(); ++i)
        codebook.value.data[i] = T(rng.normal() * 0.02);
}

template <typename T>
NodeId PatchEncoder<T>::tokenize(Graph<T>& g, NodeId patches) {
    check_rank(g, patches, 4, "patch");
    const auto& s = g.val(patches).shape;
    need(s[1] == p_f_ && s[2] == p_local_ && s[3] == 3,
         "patch: batch must be (B," + std::to_string(p_f_) + "," + std::to_string(p_local_) +
             ",3)");
    const std::size_t B = s[0];
    NodeId h = nn::reshape(g, patches, Shape{B * p_f_, p_local_, 3});
    h = nn::transpose_12(g, h);  // (B*p_f, 3, p_local)
    h = nn::relu(g, tok1.forward(g, h));
    h = nn::relu(g, tok2.forward(g, h));
    h = nn::relu(g, tok3.forward(g, h));
    h = nn::global_maxpool(g, h);  // (B*p_f, t)
    h = nn::reshape(g, h, Shape{B, p_f_, token_dim_});
    return nn::transpose_12(g, h);  // (B, t, p_f)
}

template <typename T>
NodeId PatchEncoder<T>::encode_logits(Graph<T>& g, NodeId tokens) {
    check_rank(g, tokens, 3, "patch");
    need(g.val(tokens).shape[1] == token_dim_, "patch: tokens must be (B,t,p_f)");
    NodeId h = nn::relu(g, enc_in.forward(g, tokens));
    NodeId f1 = enc_e1.forward(g, h);
    NodeId f2 = enc_e2.forward(g, f1);
    NodeId f3 = enc_e3.forward(g, f2);
    NodeId f4 = enc_e4.forward(g, f3);
    NodeId cat = nn::concat(g, {f1, f2, f3, f4}, 1);  // (B, 9t, p_f)
    return enc_out.forward(g, cat);                   // (B, vocab, p_f)
}

template <typename T>
NodeId PatchEncoder<T>::flat_logits(Graph<T>& g, NodeId logits) {
    const auto& s = g.val(logits).shape;
    need(s.size() == 3 && s[1] == vocab_, "patch: logits must be (B,vocab,p_f)");
    return nn::reshape(g, nn::transpose_12(g, logits), Shape{s[0] * s[2], vocab_});
}

template <typename T>
NodeId PatchEncoder<T>::code_tokens(Graph<T>& g, NodeId logits, double tau) {
    const auto& s = g.val(logits).shape;
    need(s.size() == 3 && s[1] == vocab_, "patch: logits must be (B,vocab,p_f)");
    const std::size_t B = s[0], N = s[2];
    NodeId rows = flat_logits(g, logits);  // (B*N, vocab)
    NodeId sel = g.training() ? nn::gumbel_softmax_sample(g, rows, tau, /*hard=*/false)
                              : nn::hard_assign(g, rows);
    NodeId codes = nn::matmul(g, sel, g.param(codebook));  // (B*N, t)
    return nn::transpose_12(g, nn::reshape(g, codes, Shape{B, N, token_dim_}));
}

template <typename T>
typename PatchEncoder<T>::Decoded PatchEncoder<T>::decode(Graph<T>& g, NodeId codes) {
    const auto& s = g.val(codes).shape;
    need(s.size() == 3 && s[1] == token_dim_ && s[2] == p_f_, "patch: codes must be (B,t,p_f)");
    const std::size_t B = s[0];

    NodeId h = nn::relu(g, dec_in.forward(g, codes));
    NodeId f1 = dec_e1.forward(g, h);
    NodeId f2 = dec_e2.forward(g, f1);
    NodeId f3 = dec_e3.forward(g, f2);
    NodeId f4 = dec_e4.forward(g, f3);
    NodeId cat = nn::concat(g, {f1, f2, f3, f4}, 1);
    NodeId r = nn::relu(g, dec_out.forward(g, cat));  // (B, t, p_f)
    r = nn::relu(g, rec1.forward(g, r));
    r = nn::relu(g, rec2.forward(g, r));
    r = rec3.forward(g, r);       // (B, 3*p_local, p_f)
    r = nn::transpose_12(g, r);   // (B, p_f, 3*p_local)
    NodeId recon = nn::reshape(g, r, Shape{B, p_f_, p_local_, 3});

    NodeId emb;
    if (embed_from_decoder_) {
        emb = nn::global_maxpool(g, f4);  // (B, 4t)
    } else {
        NodeId flat = nn::reshape(g, nn::transpose_12(g, codes), Shape{B, p_f_ * token_dim_});
        emb = emb2.forward(g, nn::relu(g, emb1.forward(g, flat)));
    }
    return {recon, emb};
}

template <typename T>
NodeId PatchEncoder<T>::embed(Graph<T>& g, NodeId patches, double tau) {
    NodeId tokens = tokenize(g, patches);
    NodeId logits = encode_logits(g, tokens);
    NodeId codes = code_tokens(g, logits, tau);
    return decode(g, codes).embedding;
}

template <typename T>
void PatchEncoder<T>::params(std::vector<nn::Parameter<T>*>& out) {
    for (auto* c : {&tok1, &tok2, &tok3, &enc_in}) c->params(out);
    for (auto* e : {&enc_e1, &enc_e2, &enc_e3, &enc_e4}) e->params(out);
    enc_out.params(out);
    out.push_back(&codebook);
    dec_in.params(out);
    for (auto* e : {&dec_e1, &dec_e2, &dec_e3, &dec_e4}) e->params(out);
    for (auto* c : {&dec_out, &rec1, &rec2, &rec3}) c->params(out);
    emb1.params(out);
    emb2.params(out);
}

template <typename T>
void PatchEncoder<T>::state(std::vector<nn::NamedTensor<T>>& out) {
    for (auto* c : {&tok1, &tok2, &tok3, &enc_in}) c->state(out);
    for (auto* e : {&enc_e1, &enc_e2, &enc_e3, &enc_e4}) e->state(out);
    enc_out.state(out);
    out.push_back({codebook.name, &codebook.value});
    dec_in.state(out);
    for (auto* e : {&dec_e1, &dec_e2, &dec_e3, &dec_e4}) e->state(out);
    for (auto* c : {&dec_out, &rec1, &rec2, &rec3}) c->state(out);
    emb1.state(out);
    emb2.state(out);
}

template <typename T>
void PatchEncoder<T>::set_frozen(bool on) {
    std::vector<nn::Parameter<T>*> ps;
    params(ps);
    for (auto* p : ps) p->freeze(on);
}

#define TRACTOKIT_INSTANTIATE(T)       \
    template class StreamlineEncoder<T>; \
    template class ClusterEncoder<T>;    \
    template class PatchEncoder<T>;

TRACTOKIT_INSTANTIATE(float)
TRACTOKIT_INSTANTIATE(double)
#undef TRACTOKIT_INSTANTIATE

}  // namespace tractokit::model
