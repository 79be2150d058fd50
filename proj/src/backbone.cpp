#include "prnet/backbone.hpp"

#include "prnet/error.hpp"

namespace prnet {

BackboneConfig BackboneConfig::desk_small(size_t num_classes) {
    BackboneConfig cfg;
    cfg.num_classes = num_classes;
    return cfg;
}

BackboneConfig BackboneConfig::paper_full() {
    BackboneConfig cfg;
    cfg.input_size = 140;
    cfg.stem_filters = 64;
    cfg.stages = {{3, 64}, {4, 128}, {23, 256}, {3, 512}};
    cfg.expansion = 4;
    cfg.num_classes = 8630;
    return cfg;
}

std::vector<size_t> BackboneConfig::spatial_plan() const {
    auto half = [](size_t s) { return (s + 1) / 2; };
    std::vector<size_t> plan;
    plan.push_back(input_size);
    plan.push_back(input_size);        // stem, stride 1
    plan.push_back(half(plan.back())); // 3x3 max pool, stride 2
    for (size_t i = 0; i < stages.size(); ++i) {
        plan.push_back(i == 0 ? plan.back() : half(plan.back()));
    }
    return plan;
}

void BackboneConfig::validate() const {
    if (input_size == 0 || stem_filters == 0 || num_classes == 0 || expansion == 0) {
        throw InvalidConfig("backbone counts must be positive");
    }
    if (stages.empty()) throw InvalidConfig("backbone needs at least one stage");
    for (const StageSpec& s : stages) {
        if (s.blocks == 0 || s.channels == 0) throw InvalidConfig("stage counts must be positive");
    }
    if (fmap_size() == 0) throw InvalidConfig("stride plan collapses the feature map");
}

Bottleneck::Bottleneck(const std::string& name, size_t cin, size_t width, size_t expansion,
                       size_t stride, Rng& rng)
    : conv1(name + ".conv1", 1, cin, width, 1, Padding::Same, rng),
      conv2(name + ".conv2", 3, width, width, stride, Padding::Same, rng),
      conv3(name + ".conv3", 1, width, width * expansion, 1, Padding::Same, rng),
      bn1(name + ".bn1", width),
      bn2(name + ".bn2", width),
      bn3(name + ".bn3", width * expansion) {
    if (cin != width * expansion || stride != 1) {
        proj.emplace(name + ".proj", 1, cin, width * expansion, stride, Padding::Same, rng);
        proj_bn.emplace(name + ".proj_bn", width * expansion);
    }
}

ad::Var Bottleneck::forward(const ad::Var& x, bool training, bool update_running) {
    ad::Var y = ad::relu(bn1.apply_nhwc(conv1(x), training, update_running));
    y = ad::relu(bn2.apply_nhwc(conv2(y), training, update_running));
    y = bn3.apply_nhwc(conv3(y), training, update_running);
    ad::Var skip = x;
    if (proj) skip = proj_bn->apply_nhwc((*proj)(x), training, update_running);
    return ad::relu(ad::add(y, skip));
}

std::vector<Parameter*> Bottleneck::params() {
    std::vector<Parameter*> out;
    append_params(out, conv1.params());
    append_params(out, bn1.params());
    append_params(out, conv2.params());
    append_params(out, bn2.params());
    append_params(out, conv3.params());
    append_params(out, bn3.params());
    if (proj) {
        append_params(out, proj->params());
        append_params(out, proj_bn->params());
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Bottleneck::aux_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (BatchNormLayer* bn : {&bn1, &bn2, &bn3}) {
        auto aux = bn->aux_state();
        out.insert(out.end(), aux.begin(), aux.end());
    }
    if (proj_bn) {
        auto aux = proj_bn->aux_state();
        out.insert(out.end(), aux.begin(), aux.end());
    }
    return out;
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng)
    : cfg_([&] {
          cfg.validate();
          return cfg;
      }()),
      stem_("backbone.stem", 5, 3, cfg.stem_filters, 1, Padding::Same, rng),
      stem_bn_("backbone.stem_bn", cfg.stem_filters),
      head_("backbone.head", cfg.fmap_channels(), cfg.num_classes, rng) {
    size_t cin = cfg_.stem_filters;
    for (size_t s = 0; s < cfg_.stages.size(); ++s) {
        const StageSpec& st = cfg_.stages[s];
        for (size_t b = 0; b < st.blocks; ++b) {
            size_t stride = (s > 0 && b == 0) ? 2 : 1;
            std::string name =
                "backbone.s" + std::to_string(s) + ".b" + std::to_string(b);
            blocks_.emplace_back(name, cin, st.channels, cfg_.expansion, stride, rng);
            cin = st.channels * cfg_.expansion;
        }
    }
    check_unique_names(params());
}

ad::Var global_average_pool(const ad::Var& x) {
    if (x->value.rank() != 4) throw ShapeMismatch("pooling expects [B,H,W,C]");
    size_t b = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    ad::Var flat = ad::reshape(x, {b * h * w, c});
    return ad::sum_row_groups(flat, h * w, 1.0 / static_cast<double>(h * w));
}

Backbone::Out Backbone::forward(const ad::Var& images, bool training, bool update_running) {
    if (images->value.rank() != 4 || images->value.dim(1) != cfg_.input_size ||
        images->value.dim(2) != cfg_.input_size || images->value.dim(3) != 3) {
        throw ShapeMismatch("backbone expects [B," + std::to_string(cfg_.input_size) + "," +
                            std::to_string(cfg_.input_size) + ",3], got " +
                            images->value.shape_str());
    }
    ad::Var y = ad::relu(stem_bn_.apply_nhwc(stem_(images), training, update_running));
    y = pool_(y);
    for (Bottleneck& blk : blocks_) y = blk.forward(y, training, update_running);
    ad::Var f_g = global_average_pool(y);
    ad::Var logits = head_(f_g);
    return {y, f_g, logits};
}

std::vector<Parameter*> Backbone::params() {
    std::vector<Parameter*> out;
    append_params(out, stem_.params());
    append_params(out, stem_bn_.params());
    for (Bottleneck& blk : blocks_) append_params(out, blk.params());
    append_params(out, head_.params());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Backbone::aux_state() {
    std::vector<std::pair<std::string, Tensor*>> out = stem_bn_.aux_state();
    for (Bottleneck& blk : blocks_) {
        auto aux = blk.aux_state();
        out.insert(out.end(), aux.begin(), aux.end());
    }
    return out;
}

void Backbone::freeze() {
    for (Parameter* p : params()) p->frozen = true;
}

void Backbone::unfreeze() {
    for (Parameter* p : params()) p->frozen = false;
}

bool Backbone::frozen() const {
    auto self = const_cast<Backbone*>(this);
    for (Parameter* p : self->params())
        if (!p->frozen) return false;
    return true;
}

uint64_t Backbone::checksum() { return params_checksum(params()); }

}  // namespace prnet
