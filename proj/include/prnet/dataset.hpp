#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prnet/geometry.hpp"
#include "prnet/rng.hpp"
#include "prnet/tensor.hpp"

namespace prnet {

struct SampleRecord {
    Tensor image;  // [S,S,3] in [0,1], rendered in the aligned frame
    LandmarkSet landmarks;  // aligned coordinates, same frame as the image
    size_t label = 0;
};

struct Dataset {
    std::vector<SampleRecord> train;
    std::vector<SampleRecord> val;
    size_t num_ids = 0;
    size_t image_size = 0;
};

struct DataGenConfig {
    size_t num_ids = 16;
    size_t per_id = 40;
    size_t image_size = 56;
    uint64_t seed = 1;
    // nuisances, applied before alignment / during rendering
    double rot_range = 0.25;      // radians, undone by alignment
    double shift_range = 3.0;     // pixels, undone by alignment
    double jitter = 0.8;          // per-sample landmark jitter, template units
    double brightness = 0.16;     // global additive shift, survives alignment
    double color_spread = 0.3;    // identity palette half-range around mid-gray
    double noise = 0.015;         // per-pixel Gaussian noise
    double deform = 3.0;          // identity geometry deformation, template units
    double latent_gap = 1.0;      // min pairwise identity latent distance

    void validate() const;
};

// Procedural identities: a latent vector deforms a 68-point face template and
// colors a Gaussian blob per landmark; samples add pose/expression/brightness/
// noise nuisances. Images are rasterized directly in the aligned frame.
// Deterministic per seed. Validation takes ceil(10%) of each identity.
Dataset gen_dataset(const DataGenConfig& cfg);

// The undeformed 68-point template in a 100x100 frame; exposed for geometry
// property tests that need plausible non-degenerate landmark sets.
LandmarkSet face_template();

void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace prnet
