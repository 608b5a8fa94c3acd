#include "tractokit/model/model.hpp"

#include <string>
#include <utility>

#include "tractokit/nn/ops.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::model {

namespace {

ModelConfig checked(ModelConfig c) {
    c.validate();
    return c;
}

}  // namespace

// cfg is declared (and so initialized) before fc1/fc2, which size off it.
template <typename T>
TractoEmbedModel<T>::TractoEmbedModel(ModelConfig c, Rng& rng)
    : cfg(checked(std::move(c))),
      fc1("head.fc1", cfg.fused_dim(), cfg.classifier_hidden, rng),
      fc2("head.fc2", cfg.classifier_hidden, cfg.num_classes, rng) {
    if (cfg.use_streamline) senc = std::make_unique<StreamlineEncoder<T>>(cfg, rng);
    if (cfg.use_cluster) cenc = std::make_unique<ClusterEncoder<T>>(cfg, rng);
    if (cfg.use_patch) penc = std::make_unique<PatchEncoder<T>>(cfg, rng);
}

template <typename T>
NodeId TractoEmbedModel<T>::fused(Graph<T>& g, const ModelInputs& in, double tau) {
    std::vector<NodeId> parts;
    if (senc) parts.push_back(senc->embed(g, in.descriptor));
    if (cenc) parts.push_back(cenc->embed(g, in.cloud));
    if (penc) parts.push_back(penc->embed(g, in.patches, tau));
    return parts.size() == 1 ? parts[0] : nn::concat(g, parts, 1);
}

template <typename T>
NodeId TractoEmbedModel<T>::head(Graph<T>& g, NodeId fused_embedding) {
    if (g.val(fused_embedding).rank() != 2 ||
        g.val(fused_embedding).shape[1] != cfg.fused_dim())
        throw InvalidInputError("model: fused embedding must be (B, " +
                                std::to_string(cfg.fused_dim()) + ")");
    return fc2.forward(g, nn::relu(g, fc1.forward(g, fused_embedding)));
}

template <typename T>
NodeId TractoEmbedModel<T>::classify(Graph<T>& g, const ModelInputs& in, double tau) {
    return head(g, fused(g, in, tau));
}

template <typename T>
void TractoEmbedModel<T>::freeze_pretrained() {
    if (senc) senc->set_frozen(true);
    if (penc) penc->set_frozen(true);
}

template <typename T>
void TractoEmbedModel<T>::params(std::vector<nn::Parameter<T>*>& out) {
    if (senc) senc->params(out);
    if (cenc) cenc->params(out);
    if (penc) penc->params(out);
    fc1.params(out);
    fc2.params(out);
}

template <typename T>
void TractoEmbedModel<T>::state(std::vector<nn::NamedTensor<T>>& out) {
    if (senc) senc->state(out);
    if (cenc) cenc->state(out);
    if (penc) penc->state(out);
    fc1.state(out);
    fc2.state(out);
}

template class TractoEmbedModel<float>;
template class TractoEmbedModel<double>;

}  // namespace tractokit::model
