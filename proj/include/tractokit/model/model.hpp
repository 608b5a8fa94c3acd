#pragma once

#include <memory>
#include <vector>

#include "tractokit/model/config.hpp"
#include "tractokit/model/encoders.hpp"
#include "tractokit/nn/graph.hpp"
#include "tractokit/nn/layers.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit::model {

// Node ids for one forward pass; only the inputs of enabled encoders are read.
struct ModelInputs {
    NodeId descriptor = 0;  // (B, 3, S, S)
    NodeId cloud = 0;       // (B, 3, n)
    NodeId patches = 0;     // (B, p_f, p_local, 3)
};

// Full classifier: the enabled encoder embeddings concatenated in fixed order
// (streamline, cluster, patch) through a two-layer MLP head. Encoders that an
// ablation disables are never constructed.
template <typename T>
class TractoEmbedModel {
public:
    TractoEmbedModel(ModelConfig cfg, Rng& rng);

    // Concatenated embedding, (B, fused_dim()).
    NodeId fused(Graph<T>& g, const ModelInputs& in, double tau = 1.0);
    // Classifier MLP on an already-fused embedding.
    NodeId head(Graph<T>& g, NodeId fused_embedding);
    NodeId classify(Graph<T>& g, const ModelInputs& in, double tau = 1.0);

    // Freeze the pretrained feature extractors (streamline + patch) for the
    // final training stage; cluster encoder and head stay trainable.
    void freeze_pretrained();

    void params(std::vector<nn::Parameter<T>*>& out);
    void state(std::vector<nn::NamedTensor<T>>& out);

    ModelConfig cfg;
    std::unique_ptr<StreamlineEncoder<T>> senc;
    std::unique_ptr<ClusterEncoder<T>> cenc;
    std::unique_ptr<PatchEncoder<T>> penc;
    nn::Linear<T> fc1, fc2;
};

}  // namespace tractokit::model
