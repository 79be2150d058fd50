#include "prnet/model.hpp"

#include <cmath>
#include <sstream>

#include "prnet/error.hpp"

namespace prnet {

namespace {

std::vector<StageSpec> parse_stages(const std::string& raw) {
    // "1x16, 1x32, 1x64"
    std::vector<StageSpec> out;
    std::string item;
    std::istringstream ss(raw);
    while (std::getline(ss, item, ',')) {
        size_t x = item.find('x');
        if (x == std::string::npos) throw InvalidConfig("stage entry needs BLOCKSxCHANNELS: " + item);
        try {
            StageSpec spec;
            spec.blocks = std::stoull(item.substr(0, x));
            spec.channels = std::stoull(item.substr(x + 1));
            out.push_back(spec);
        } catch (const std::exception&) {
            throw InvalidConfig("bad stage entry: " + item);
        }
    }
    if (out.empty()) throw InvalidConfig("empty stage list");
    return out;
}

Backbone make_backbone(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng = Rng(cfg.init_seed).fork(1);
    return Backbone(cfg.backbone, rng);
}

}  // namespace

Stage parse_stage(const std::string& s) {
    if (s == "backbone") return Stage::Backbone;
    if (s == "encoder") return Stage::Encoder;
    if (s == "prn") return Stage::Prn;
    if (s == "fusion") return Stage::Fusion;
    throw InvalidConfig("unknown stage: " + s);
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::Backbone: return "backbone";
        case Stage::Encoder: return "encoder";
        case Stage::Prn: return "prn";
        case Stage::Fusion: return "fusion";
    }
    return "?";
}

ModelConfig ModelConfig::from_config(const Config& cfg, size_t num_classes) {
    ModelConfig mc;
    std::string preset = cfg.get_str("backbone", "preset", "desk-small");
    if (preset == "desk-small") {
        mc.backbone = BackboneConfig::desk_small(num_classes);
    } else if (preset == "paper-full") {
        mc.backbone = BackboneConfig::paper_full();
        mc.relation = RelationConfig::paper_full();
    } else {
        throw InvalidConfig("unknown backbone preset: " + preset);
    }
    mc.backbone.num_classes = cfg.get_size("backbone", "num_classes", num_classes);
    mc.backbone.input_size = cfg.get_size("backbone", "input_size", mc.backbone.input_size);
    mc.backbone.stem_filters = cfg.get_size("backbone", "stem_filters", mc.backbone.stem_filters);
    mc.backbone.expansion = cfg.get_size("backbone", "expansion", mc.backbone.expansion);
    if (cfg.has("backbone", "stages")) {
        mc.backbone.stages = parse_stages(cfg.get_str("backbone", "stages", ""));
    }

    RelationConfig& rc = mc.relation;
    rc.g_layers = cfg.get_size_list("prn", "g_layers", rc.g_layers);
    rc.f_layers = cfg.get_size_list("prn", "f_layers", rc.f_layers);
    rc.lstm_hidden = cfg.get_size("prn", "lstm_hidden", rc.lstm_hidden);
    rc.sid_width = cfg.get_size("prn", "sid_width", rc.sid_width);
    rc.embed_dim = cfg.get_size("prn", "embed_dim", rc.embed_dim);
    rc.landmark_count = cfg.get_size("prn", "landmarks", rc.landmark_count);
    rc.margin = cfg.get_double("prn", "margin", rc.margin);
    auto weights = cfg.get_double_list("prn", "loss_weights",
                                       {rc.w_triplet, rc.w_pairwise, rc.w_softmax});
    if (weights.size() != 3) throw InvalidConfig("loss_weights needs three decimals");
    rc.w_triplet = weights[0];
    rc.w_pairwise = weights[1];
    rc.w_softmax = weights[2];
    mc.variant = parse_variant(cfg.get_str("prn", "variant", "C"));
    mc.validate();
    return mc;
}

void ModelConfig::validate() const {
    backbone.validate();
    relation.validate();
    if (relation.landmark_count > kLandmarkCount) {
        throw InvalidConfig("landmark subset cannot exceed " + std::to_string(kLandmarkCount));
    }
}

FaceModel::FaceModel(const ModelConfig& config) : cfg(config), backbone(make_backbone(config)) {
    Rng root(cfg.init_seed);
    const size_t channels = local_channels();
    if (cfg.variant == Variant::C) {
        Rng r = root.fork(2);
        encoder.emplace("encoder", channels, cfg.relation, num_classes(), r);
    }
    if (cfg.variant != Variant::A) {
        Rng r3 = root.fork(3);
        prn.emplace("prn", channels, cfg.relation, cfg.variant == Variant::C, r3);
        Rng r4 = root.fork(4);
        prn_head.emplace("prn/head", cfg.relation.relational_dim(), num_classes(), r4);
        Rng r5 = root.fork(5);
        fusion.emplace("fusion", channels, cfg.relation.relational_dim(), cfg.relation.embed_dim,
                       r5);
        Rng r6 = root.fork(6);
        fusion_head.emplace("fusion/head", cfg.relation.embed_dim, num_classes(), r6);
    }
    check_unique_names(all_params());
}

size_t FaceModel::embed_dim() const {
    return cfg.variant == Variant::A ? local_channels() : cfg.relation.embed_dim;
}

RoiSpec FaceModel::roi() const {
    RoiSpec spec;
    spec.input_size = static_cast<double>(cfg.backbone.input_size);
    spec.fmap_size = cfg.backbone.fmap_size();
    spec.region_image = (cfg.backbone.input_size + spec.fmap_size - 1) / spec.fmap_size;
    spec.region_fmap = 1;
    return spec;
}

std::vector<size_t> FaceModel::subset() const {
    return landmark_subset(kLandmarkCount, cfg.relation.landmark_count);
}

bool FaceModel::needs(Stage stage) const {
    switch (stage) {
        case Stage::Backbone: return true;
        case Stage::Encoder: return cfg.variant == Variant::C;
        case Stage::Prn:
        case Stage::Fusion: return cfg.variant != Variant::A;
    }
    return false;
}

std::vector<Parameter*> FaceModel::stage_params(Stage stage) {
    if (!needs(stage)) throw InvalidConfig("variant " + variant_name(cfg.variant) +
                                           " has no stage " + stage_name(stage));
    std::vector<Parameter*> out;
    switch (stage) {
        case Stage::Backbone: return backbone.params();
        case Stage::Encoder: return encoder->params();
        case Stage::Prn:
            out = prn->params();
            append_params(out, prn_head->params());
            return out;
        case Stage::Fusion:
            out = fusion->params();
            append_params(out, fusion_head->params());
            return out;
    }
    return out;
}

std::vector<Parameter*> FaceModel::all_params() {
    std::vector<Parameter*> out = backbone.params();
    if (encoder) append_params(out, encoder->params());
    if (prn) append_params(out, prn->params());
    if (prn_head) append_params(out, prn_head->params());
    if (fusion) append_params(out, fusion->params());
    if (fusion_head) append_params(out, fusion_head->params());
    return out;
}

StateDict FaceModel::full_state() {
    StateDict out;
    for (Parameter* p : all_params()) out.push_back({p->name, &p->value});
    for (auto& entry : backbone.aux_state()) out.push_back(entry);
    if (prn)
        for (auto& entry : prn->aux_state()) out.push_back(entry);
    if (fusion)
        for (auto& entry : fusion->aux_state()) out.push_back(entry);
    return out;
}

void FaceModel::freeze_below(Stage stage) {
    for (Parameter* p : all_params()) p->frozen = true;
    for (Parameter* p : stage_params(stage)) p->frozen = false;
}

namespace {

Tensor encode_backbone_meta(const BackboneConfig& b) {
    std::vector<double> v = {static_cast<double>(b.input_size),
                             static_cast<double>(b.stem_filters),
                             static_cast<double>(b.expansion),
                             static_cast<double>(b.num_classes),
                             static_cast<double>(b.stages.size())};
    for (const StageSpec& s : b.stages) {
        v.push_back(static_cast<double>(s.blocks));
        v.push_back(static_cast<double>(s.channels));
    }
    return Tensor({v.size()}, v);
}

BackboneConfig decode_backbone_meta(const Tensor& t) {
    BackboneConfig b;
    size_t k = 0;
    b.input_size = static_cast<size_t>(t[k++]);
    b.stem_filters = static_cast<size_t>(t[k++]);
    b.expansion = static_cast<size_t>(t[k++]);
    b.num_classes = static_cast<size_t>(t[k++]);
    size_t n = static_cast<size_t>(t[k++]);
    b.stages.clear();
    for (size_t s = 0; s < n; ++s) {
        StageSpec spec;
        spec.blocks = static_cast<size_t>(t[k++]);
        spec.channels = static_cast<size_t>(t[k++]);
        b.stages.push_back(spec);
    }
    return b;
}

Tensor encode_relation_meta(const RelationConfig& r) {
    std::vector<double> v;
    v.push_back(static_cast<double>(r.g_layers.size()));
    for (size_t w : r.g_layers) v.push_back(static_cast<double>(w));
    v.push_back(static_cast<double>(r.f_layers.size()));
    for (size_t w : r.f_layers) v.push_back(static_cast<double>(w));
    v.push_back(static_cast<double>(r.lstm_hidden));
    v.push_back(static_cast<double>(r.sid_width));
    v.push_back(static_cast<double>(r.embed_dim));
    v.push_back(static_cast<double>(r.landmark_count));
    v.push_back(r.margin);
    v.push_back(r.w_triplet);
    v.push_back(r.w_pairwise);
    v.push_back(r.w_softmax);
    return Tensor({v.size()}, v);
}

RelationConfig decode_relation_meta(const Tensor& t) {
    RelationConfig r;
    size_t k = 0;
    size_t ng = static_cast<size_t>(t[k++]);
    r.g_layers.assign(ng, 0);
    for (size_t i = 0; i < ng; ++i) r.g_layers[i] = static_cast<size_t>(t[k++]);
    size_t nf = static_cast<size_t>(t[k++]);
    r.f_layers.assign(nf, 0);
    for (size_t i = 0; i < nf; ++i) r.f_layers[i] = static_cast<size_t>(t[k++]);
    r.lstm_hidden = static_cast<size_t>(t[k++]);
    r.sid_width = static_cast<size_t>(t[k++]);
    r.embed_dim = static_cast<size_t>(t[k++]);
    r.landmark_count = static_cast<size_t>(t[k++]);
    r.margin = t[k++];
    r.w_triplet = t[k++];
    r.w_pairwise = t[k++];
    r.w_softmax = t[k++];
    return r;
}

}  // namespace

void FaceModel::save(const std::string& path) {
    Tensor meta_variant = Tensor::scalar(static_cast<double>(static_cast<int>(cfg.variant)));
    Tensor meta_seed = Tensor::scalar(static_cast<double>(cfg.init_seed));
    Tensor meta_done({4});
    for (size_t i = 0; i < 4; ++i) meta_done[i] = done[i] ? 1.0 : 0.0;
    Tensor meta_backbone = encode_backbone_meta(cfg.backbone);
    Tensor meta_relation = encode_relation_meta(cfg.relation);

    std::vector<std::pair<std::string, const Tensor*>> entries = {
        {"meta/variant", &meta_variant},
        {"meta/init_seed", &meta_seed},
        {"meta/done", &meta_done},
        {"meta/backbone", &meta_backbone},
        {"meta/relation", &meta_relation},
    };
    for (const auto& [name, tensor] : full_state()) entries.push_back({name, tensor});
    save_checkpoint(path, entries);
}

void FaceModel::load_state(const std::string& path) {
    auto loaded = load_checkpoint(path);
    auto it = loaded.find("meta/done");
    if (it == loaded.end()) throw ValidationError("checkpoint has no meta records: " + path);
    load_into(loaded, full_state());
    for (size_t i = 0; i < 4; ++i) done[i] = it->second[i] != 0.0;
}

FaceModel FaceModel::load(const std::string& path) {
    auto loaded = load_checkpoint(path);
    for (const char* key : {"meta/variant", "meta/init_seed", "meta/done", "meta/backbone",
                            "meta/relation"}) {
        if (loaded.find(key) == loaded.end()) {
            throw ValidationError(std::string("checkpoint missing ") + key + ": " + path);
        }
    }
    ModelConfig mc;
    mc.variant = static_cast<Variant>(static_cast<int>(loaded.at("meta/variant")[0]));
    mc.init_seed = static_cast<uint64_t>(loaded.at("meta/init_seed")[0]);
    mc.backbone = decode_backbone_meta(loaded.at("meta/backbone"));
    mc.relation = decode_relation_meta(loaded.at("meta/relation"));
    FaceModel model(mc);
    load_into(loaded, model.full_state());
    const Tensor& done = loaded.at("meta/done");
    for (size_t i = 0; i < 4; ++i) model.done[i] = done[i] != 0.0;
    return model;
}

void copy_state(const StateDict& src, const StateDict& dst) {
    if (src.size() != dst.size()) throw ShapeMismatch("state dictionaries differ in size");
    for (size_t i = 0; i < src.size(); ++i) {
        if (src[i].first != dst[i].first) {
            throw ValidationError("state name mismatch: " + src[i].first + " vs " + dst[i].first);
        }
        if (!src[i].second->same_shape(*dst[i].second)) {
            throw ShapeMismatch("state shape mismatch for " + src[i].first);
        }
        *dst[i].second = *src[i].second;
    }
}

}  // namespace prnet
