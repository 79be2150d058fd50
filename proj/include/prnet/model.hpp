#pragma once

#include <array>
#include <optional>
#include <string>

#include "prnet/backbone.hpp"
#include "prnet/checkpoint.hpp"
#include "prnet/config.hpp"
#include "prnet/geometry.hpp"
#include "prnet/prn.hpp"

namespace prnet {

enum class Stage { Backbone = 0, Encoder = 1, Prn = 2, Fusion = 3 };

Stage parse_stage(const std::string& s);
std::string stage_name(Stage stage);

struct ModelConfig {
    BackboneConfig backbone;
    RelationConfig relation;
    Variant variant = Variant::C;
    uint64_t init_seed = 7;

    // Reads [backbone] and [prn] sections; unread keys are the caller's to
    // check via cfg.check_consumed().
    static ModelConfig from_config(const Config& cfg, size_t num_classes);
    void validate() const;
};

// The staged composite: backbone, optional identity encoder (variant C),
// optional relation module with a class head (B and C), optional fusion with
// a class head (B and C). Construction order and parameter names are fixed so
// checkpoints written at any stage load back into a freshly built model.
class FaceModel {
public:
    explicit FaceModel(const ModelConfig& cfg);

    ModelConfig cfg;
    Backbone backbone;
    std::optional<IdentityEncoder> encoder;
    std::optional<PrnModel> prn;
    std::optional<AffineLayer> prn_head;
    std::optional<FusionModel> fusion;
    std::optional<AffineLayer> fusion_head;

    std::array<bool, 4> done{};  // per-stage training completion flags

    size_t num_classes() const { return cfg.backbone.num_classes; }
    size_t local_channels() const { return cfg.backbone.fmap_channels(); }
    size_t embed_dim() const;
    RoiSpec roi() const;
    std::vector<size_t> subset() const;

    bool needs(Stage stage) const;  // whether the variant trains this stage
    std::vector<Parameter*> stage_params(Stage stage);
    std::vector<Parameter*> all_params();
    StateDict full_state();

    void save(const std::string& path);
    void load_state(const std::string& path);  // shapes must match this model
    static FaceModel load(const std::string& path);  // rebuilds from meta

    // Marks every stage before `stage` frozen and the stage itself trainable.
    void freeze_below(Stage stage);
};

// Overwrites dst tensors with src tensors; names and shapes must match 1:1.
void copy_state(const StateDict& src, const StateDict& dst);

}  // namespace prnet
