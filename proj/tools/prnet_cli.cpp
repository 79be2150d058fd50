#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prnet/dataset.hpp"
#include "prnet/eval.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/model.hpp"
#include "prnet/prn.hpp"
#include "prnet/train.hpp"

namespace {

using namespace prnet;

int run_gen_data(const DataGenConfig& cfg, const std::string& out) {
    Dataset data = gen_dataset(cfg);
    save_dataset(data, out);
    std::cout << data.train.size() << " train / " << data.val.size() << " val samples ("
              << data.num_ids << " ids, " << data.image_size << "px) -> " << out << "\n";
    return 0;
}

std::vector<Stage> stages_to_run(const std::string& request, const FaceModel& model) {
    if (request == "all") {
        std::vector<Stage> order;
        for (Stage s : {Stage::Backbone, Stage::Encoder, Stage::Prn, Stage::Fusion})
            if (model.needs(s)) order.push_back(s);
        return order;
    }
    return {parse_stage(request)};
}

int run_train(const std::string& stage_str, const std::string& config_path,
              const std::string& data_dir, const std::string& out_path,
              const std::string& init_path, const std::string& log_path) {
    Dataset data = load_dataset(data_dir);
    Config cfg = Config::parse_file(config_path);
    ModelConfig mc = ModelConfig::from_config(cfg, data.num_ids);

    std::array<StageOptions, 4> opts;
    for (Stage s : {Stage::Backbone, Stage::Encoder, Stage::Prn, Stage::Fusion})
        opts[static_cast<size_t>(s)] = StageOptions::from_config(cfg, s);
    cfg.check_consumed();
    mc.init_seed = opts[0].seed;  // one seed drives init and batch order

    FaceModel model(mc);
    if (!init_path.empty()) model.load_state(init_path);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw ValidationError("cannot open loss log: " + log_path);
    }

    Trainer trainer(model, data);
    for (Stage s : stages_to_run(stage_str, model)) {
        if (stage_str == "all" && model.done[static_cast<size_t>(s)]) {
            std::cout << "stage " << stage_name(s) << ": already trained, skipping\n";
            continue;
        }
        StageResult res = trainer.train_stage(s, opts[static_cast<size_t>(s)]);
        if (log) {
            log << "# stage " << stage_name(s) << "\n";
            for (const LossRecord& rec : res.log) log << format_loss_record(rec) << "\n";
        }
        std::cout << "stage " << stage_name(s) << ": val acc " << res.val_acc << " after "
                  << res.epochs_run << " epoch(s)\n";
    }
    model.save(out_path);
    std::cout << "checkpoint -> " << out_path << "\n";
    return 0;
}

Tensor gather_emb(const Tensor& emb, const std::vector<size_t>& rows) {
    Tensor out({rows.size(), emb.dim(1)});
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < emb.dim(1); ++c) out.at(r, c) = emb.at(rows[r], c);
    return out;
}

int run_eval(const std::string& mode, const std::string& ckpt, const std::string& data_dir,
             const std::string& report_path) {
    FaceModel model = FaceModel::load(ckpt);
    Dataset data = load_dataset(data_dir);
    Trainer trainer(model, data);
    Tensor emb = trainer.embeddings(true);
    std::vector<size_t> labels = trainer.labels(true);

    EvalReport report;
    if (mode == "verify") {
        report = verify_pairs(emb, all_pairs(labels));
    } else {
        // Deterministic open-set split: the first val sample of every enrolled
        // identity forms the gallery; everything else probes it. The last fifth
        // of the identities is left out of the gallery to supply unmated probes.
        std::set<size_t> distinct(labels.begin(), labels.end());
        std::vector<size_t> ids(distinct.begin(), distinct.end());
        const size_t enrolled = std::max<size_t>(1, (ids.size() * 4 + 4) / 5);
        std::set<size_t> known(ids.begin(), ids.begin() + enrolled);
        std::vector<size_t> g_rows, p_rows;
        std::set<size_t> seen;
        for (size_t i = 0; i < labels.size(); ++i) {
            if (known.count(labels[i]) && !seen.count(labels[i])) {
                g_rows.push_back(i);
                seen.insert(labels[i]);
            } else {
                p_rows.push_back(i);
            }
        }
        std::vector<size_t> g_labels, p_labels;
        for (size_t r : g_rows) g_labels.push_back(labels[r]);
        for (size_t r : p_rows) p_labels.push_back(labels[r]);
        report = identify(gather_emb(emb, g_rows), g_labels, gather_emb(emb, p_rows), p_labels);
    }

    std::ofstream out(report_path);
    if (!out) throw ValidationError("cannot open report file: " + report_path);
    write_report(out, report);
    std::cout << mode << " report (" << labels.size() << " embeddings) -> " << report_path << "\n";
    return 0;
}

int run_gradcheck_cmd(const std::string& target, size_t seeds) {
    bool ok = true;
    for (const TargetReport& r : run_gradcheck(target, seeds)) {
        std::printf("%-18s max rel err %.3e (seed %llu) %s\n", r.target.c_str(), r.max_rel_err,
                    static_cast<unsigned long long>(r.worst_seed), r.pass() ? "ok" : "FAIL");
        ok = ok && r.pass();
    }
    return ok ? 0 : 3;
}

int run_align(const std::string& in, const std::string& out, double size,
              const std::string& tf_path) {
    LandmarkSet lm = read_landmarks(in);
    AlignResult res = align_face(lm, size);
    write_landmarks(res.aligned, out);
    char rec[128];
    std::snprintf(rec, sizeof rec, "%.17g %.17g %.17g %.17g", res.transform.rotation,
                  res.transform.scale, res.transform.dx, res.transform.dy);
    if (tf_path.empty()) {
        std::cout << rec << "\n";
    } else {
        std::ofstream tf(tf_path);
        if (!tf) throw ValidationError("cannot open transform file: " + tf_path);
        tf << rec << "\n";
    }
    return 0;
}

int run_pairs(size_t n) {
    auto pairs = enumerate_pairs(n);
    for (const auto& [i, j] : pairs) std::cout << i << " " << j << "\n";
    std::cout << "count " << pairs.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relational face embedding toolkit"};
    app.require_subcommand(1);

    DataGenConfig gen;
    std::string gen_out;
    auto* cmd_gen = app.add_subcommand("gen-data", "generate a seeded synthetic identity set");
    cmd_gen->add_option("--ids", gen.num_ids, "identity count")->required();
    cmd_gen->add_option("--per-id", gen.per_id, "samples per identity")->required();
    cmd_gen->add_option("--seed", gen.seed, "generator seed")->required();
    cmd_gen->add_option("--out", gen_out, "output directory")->required();
    cmd_gen->add_option("--image-size", gen.image_size, "square image side, pixels");
    cmd_gen->add_option("--rot-range", gen.rot_range, "pose rotation range, radians");
    cmd_gen->add_option("--shift-range", gen.shift_range, "pose shift range, pixels");
    cmd_gen->add_option("--jitter", gen.jitter, "per-sample landmark jitter");
    cmd_gen->add_option("--brightness", gen.brightness, "global brightness shift range");
    cmd_gen->add_option("--color-spread", gen.color_spread, "identity palette half-range");
    cmd_gen->add_option("--noise", gen.noise, "per-pixel noise sigma");
    cmd_gen->add_option("--deform", gen.deform, "identity geometry deformation");
    cmd_gen->add_option("--latent-gap", gen.latent_gap, "min identity latent distance");

    std::string tr_stage, tr_config, tr_data, tr_out, tr_init, tr_log;
    auto* cmd_train = app.add_subcommand("train", "train one stage or every stage in order");
    cmd_train->add_option("--stage", tr_stage, "backbone|encoder|prn|fusion|all")->required();
    cmd_train->add_option("--config", tr_config, "config file")->required();
    cmd_train->add_option("--data", tr_data, "dataset directory")->required();
    cmd_train->add_option("--out", tr_out, "checkpoint to write")->required();
    cmd_train->add_option("--init", tr_init, "checkpoint to start from");
    cmd_train->add_option("--log", tr_log, "loss log file");

    std::string ev_mode, ev_ckpt, ev_data, ev_report;
    auto* cmd_eval = app.add_subcommand("eval", "score the validation split of a dataset");
    cmd_eval->add_option("--mode", ev_mode, "verify|identify")
        ->required()
        ->check(CLI::IsMember({"verify", "identify"}));
    cmd_eval->add_option("--ckpt", ev_ckpt, "trained checkpoint")->required();
    cmd_eval->add_option("--data", ev_data, "dataset directory")->required();
    cmd_eval->add_option("--report", ev_report, "report file to write")->required();

    std::string gc_target = "all";
    size_t gc_seeds = 10;
    auto* cmd_gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    cmd_gc->add_option("--target", gc_target, "battery entry or all");
    cmd_gc->add_option("--seeds", gc_seeds, "random instances per target");

    std::string al_in, al_out, al_tf;
    double al_size = 140.0;
    auto* cmd_align = app.add_subcommand("align", "align a landmark file to the canonical frame");
    cmd_align->add_option("--in", al_in, "landmark file, 68 lines of x y")->required();
    cmd_align->add_option("--out", al_out, "aligned landmark file to write")->required();
    cmd_align->add_option("--size", al_size, "output frame side, pixels");
    cmd_align->add_option("--transform", al_tf, "write the transform record here, not stdout");

    size_t pairs_n = 68;
    auto* cmd_pairs = app.add_subcommand("pairs", "list landmark index pairs");
    cmd_pairs->add_option("--n", pairs_n, "landmark count");

    try {
        app.parse(argc, argv);
        if (*cmd_gen) return run_gen_data(gen, gen_out);
        if (*cmd_train) return run_train(tr_stage, tr_config, tr_data, tr_out, tr_init, tr_log);
        if (*cmd_eval) return run_eval(ev_mode, ev_ckpt, ev_data, ev_report);
        if (*cmd_gc) return run_gradcheck_cmd(gc_target, gc_seeds);
        if (*cmd_align) return run_align(al_in, al_out, al_size, al_tf);
        if (*cmd_pairs) return run_pairs(pairs_n);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const prnet::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const prnet::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
