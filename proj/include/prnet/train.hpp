#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "prnet/dataset.hpp"
#include "prnet/losses.hpp"
#include "prnet/model.hpp"

namespace prnet {

struct StageOptions {
    double lr = 0.10;
    double lr_decay = 1.0;  // per-epoch geometric factor
    double momentum = 0.9;
    size_t batch = 32;
    size_t epochs = 10;
    uint64_t seed = 7;
    LossWeights weights;
    Mining mining = Mining::RandomK;
    size_t mine_k = 4;
    uint64_t mine_seed = 99;
    bool mean_reduction = false;
    double stop_acc = 2.0;  // early stop once val accuracy reaches this; >1 disables

    // Reads [train], [loss] and [mining] sections; stage-specific epoch
    // overrides use keys epochs_backbone, epochs_encoder, ...
    static StageOptions from_config(const Config& cfg, Stage stage);
};

struct LossRecord {
    size_t step = 0;
    double l_t = 0.0, l_p = 0.0, l_s = 0.0, joint = 0.0;
    size_t active = 0;
};

// "step, l_t, l_p, l_s, joint, active_triplets"
std::string format_loss_record(const LossRecord& rec);

struct StageResult {
    std::vector<LossRecord> log;
    double val_acc = 0.0;
    size_t epochs_run = 0;
};

// Runs one training stage with everything upstream frozen. Upstream outputs
// are computed once in inference mode and cached, so a stage only ever pays
// for its own forward/backward.
class Trainer {
public:
    Trainer(FaceModel& model, const Dataset& data);

    StageResult train_stage(Stage stage, const StageOptions& opt);

    // Classification accuracy of the stage's softmax head on the given split.
    double accuracy(Stage stage, bool val);

    // Final-model embeddings of a split: f_g for variant A, the fused
    // embedding otherwise.
    Tensor embeddings(bool val);
    std::vector<size_t> labels(bool val) const;

    const Tensor& fg(bool val);      // [n, C]
    const Tensor& locals(bool val);  // [n*N, C], landmark-subset rows
    const Tensor& sid(bool val);     // [n, S]
    const Tensor& rel(bool val);     // [n, R']

private:
    struct Flow {
        ad::Var emb, logits;
    };

    void check_prereq(Stage stage) const;
    void ensure_backbone_cache();
    void ensure_sid_cache();
    void ensure_rel_cache();
    void drop_caches_from(Stage stage);
    Flow stage_forward(Stage stage, const std::vector<size_t>& idx, bool val, bool training);
    StageResult run_loop(Stage stage, const StageOptions& opt);

    FaceModel& m_;
    const Dataset& data_;
    std::optional<Tensor> fg_[2], locals_[2], sid_[2], rel_[2];
};

// Per-seed accuracies for the variant comparison. Models B and C share the
// seed's trained backbone (and C's encoder trains on top of it), mirroring
// the staged recipe.
struct TrendSeedRow {
    uint64_t seed = 0;
    double acc_a = 0.0;       // backbone softmax head
    double acc_prn = 0.0;     // unconditioned relation head (model B's)
    double acc_prnplus = 0.0; // conditioned relation head (model C's)
    double acc_b = 0.0;       // fused model B
    double acc_c = 0.0;       // fused model C
};

struct TrendResult {
    std::vector<TrendSeedRow> rows;
    bool prnplus_wins = false;     // acc_prnplus >= acc_prn in a majority of seeds
    bool c_close_to_a = false;     // median(acc_c) >= median(acc_a) - 1 point
    bool c_beats_b = false;        // acc_c >= acc_b in a majority of seeds
    bool pass = false;
};

struct TrendOptions {
    DataGenConfig data;
    ModelConfig model;  // variant field ignored; B and C are built internally
    std::array<StageOptions, 4> stage;  // indexed by Stage
    std::vector<uint64_t> seeds = {11, 12, 13, 14, 15};
};

TrendResult trend_check(const TrendOptions& opt);

}  // namespace prnet
