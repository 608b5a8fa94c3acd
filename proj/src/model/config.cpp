#include "tractokit/model/config.hpp"

#include <string>

#include "tractokit/util/error.hpp"

namespace tractokit::model {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidInputError("ModelConfig: " + what);
}

}  // namespace

void ModelConfig::validate() const {
    require(num_classes >= 2, "need at least 2 classes");
    // Grid side 2*n_s must survive four floor-halving pools: 16 -> 8 -> 4 -> 2 -> 1.
    require(n_s >= 8, "n_s too small for four 2x2 pools");
    require(s_width >= 1 && c_base >= 1, "widths must be positive");
    require(token_dim >= 4 && token_dim % 4 == 0, "token_dim must be a positive multiple of 4");
    require(vocab >= 2, "codebook needs at least 2 entries");
    require(p_local >= 1, "patches need at least one point");
    require(knn_k >= 1 && knn_k <= p_f, "knn_k must be in [1, p_f]");
    require(classifier_hidden >= 1, "classifier hidden width must be positive");
    require(s_dropout >= 0.0 && s_dropout < 1.0, "dropout must be in [0,1)");
    require(use_streamline || use_cluster || use_patch, "at least one encoder must be enabled");
}

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.num_classes = 9;  // 8 tract classes plus "other"
    c.s_width = 8;
    c.c_base = 16;
    c.token_dim = 64;
    c.vocab = 512;
    c.p_f = 32;
    c.classifier_hidden = 128;
    return c;
}

}  // namespace tractokit::model
