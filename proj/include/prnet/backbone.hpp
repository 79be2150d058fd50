#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prnet/layers.hpp"

namespace prnet {

struct StageSpec {
    size_t blocks = 1;
    size_t channels = 16;  // bottleneck width; block output = channels * expansion
};

struct BackboneConfig {
    size_t input_size = 56;
    size_t stem_filters = 16;  // 5x5 stride-1 stem
    std::vector<StageSpec> stages = {{1, 16}, {1, 32}, {1, 64}};
    size_t expansion = 1;
    size_t num_classes = 16;

    static BackboneConfig desk_small(size_t num_classes);
    // Reference constants of the full-scale network; documented, never
    // instantiated in tests.
    static BackboneConfig paper_full();

    // Spatial sizes: input, after stem, after pool, after each stage.
    // Downsampling uses ceil division (same padding): stem stride 1,
    // pool stride 2, the first block of every stage past the first stride 2.
    std::vector<size_t> spatial_plan() const;
    size_t fmap_size() const { return spatial_plan().back(); }
    size_t fmap_channels() const { return stages.back().channels * expansion; }
    void validate() const;
};

// 1x1 reduce, 3x3 (stride at stage entry), 1x1 expand, each with BN; ReLU
// after the first two and after the residual add. Projection path when the
// shape changes.
struct Bottleneck {
    Conv2dLayer conv1, conv2, conv3;
    BatchNormLayer bn1, bn2, bn3;
    std::optional<Conv2dLayer> proj;
    std::optional<BatchNormLayer> proj_bn;

    Bottleneck(const std::string& name, size_t cin, size_t width, size_t expansion, size_t stride,
               Rng& rng);
    ad::Var forward(const ad::Var& x, bool training, bool update_running = true);
    std::vector<Parameter*> params();
    std::vector<std::pair<std::string, Tensor*>> aux_state();
};

class Backbone {
public:
    Backbone(const BackboneConfig& cfg, Rng& rng);

    struct Out {
        ad::Var fmap;    // [B, G, G, C]
        ad::Var f_g;     // [B, C] spatial mean
        ad::Var logits;  // [B, num_classes]
    };

    // images: [B, S, S, 3] in [0, 1].
    Out forward(const ad::Var& images, bool training, bool update_running = true);

    std::vector<Parameter*> params();
    std::vector<std::pair<std::string, Tensor*>> aux_state();
    void freeze();
    void unfreeze();
    bool frozen() const;
    uint64_t checksum();

    const BackboneConfig& config() const { return cfg_; }

private:
    BackboneConfig cfg_;
    Conv2dLayer stem_;
    BatchNormLayer stem_bn_;
    MaxPoolLayer pool_;
    std::vector<Bottleneck> blocks_;
    AffineLayer head_;
};

// Spatial mean of a [B,H,W,C] activation -> [B,C].
ad::Var global_average_pool(const ad::Var& x);

}  // namespace prnet
