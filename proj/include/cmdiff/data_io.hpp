#pragma once

#include <array>
#include <string>
#include <vector>

#include "cmdiff/conditioning.hpp"
#include "cmdiff/constraints.hpp"
#include "cmdiff/rng.hpp"
#include "cmdiff/tensor.hpp"

namespace cmdiff {

// One aligned IR/VIS pair, normalized to [-1,1], edges in [0,1].
struct PairedSample {
    std::string id;
    Tensor ir;        // 3 channels (replicated from grayscale on load)
    Tensor vis;       // 3 channels
    Tensor edges_ir;  // 1 channel
    Tensor edges_vis; // 1 channel
};

struct DatasetManifest {
    std::string root;
    int resolution = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    size_t pair_count() const { return train_ids.size() + test_ids.size(); }
    std::vector<std::string> all_ids() const;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Scan root/{ir,vis}, validate pairing, and build (or reload) the manifest.
// Unmatched filenames raise a DataError naming every orphan. When
// root/manifest.json exists its split is reused.
DatasetManifest load_paired_dataset(const std::string& root, int resolution);

// Native resolution of a dataset: the manifest's value, else the first image's.
int detect_dataset_resolution(const std::string& root);

// Load one pair: 8-bit PNGs -> [-1,1], bilinear-resized to the manifest
// resolution. Edge maps come from edges_ir/ and edges_vis/ when detector is
// External (DataError naming the sample if missing), else they are computed.
PairedSample load_sample(const DatasetManifest& m, const std::string& id,
                         EdgeDetector detector = EdgeDetector::Sobel,
                         const CannyParams& canny = {});

std::vector<PairedSample> load_samples(const DatasetManifest& m,
                                       const std::vector<std::string>& ids,
                                       EdgeDetector detector = EdgeDetector::Sobel,
                                       const CannyParams& canny = {});

// Fit target-modality priors over every training pixel of the dataset.
ConstraintSpec fit_constraints(const DatasetManifest& m, Modality target_modality, int bins);

// ---------------------------------------------------------------------------
// Synthetic paired-modality generator
// ---------------------------------------------------------------------------

enum class ShapeKind { Rect, Disc };

struct SceneObject {
    ShapeKind kind = ShapeKind::Rect;
    int object_class = 0;  // indexes the color/emissivity tables
    double cx = 0, cy = 0; // center, pixel units
    double rx = 0, ry = 0; // half extents / radii
};

struct SyntheticScene {
    int resolution = 0;
    int terrain = 0;       // background class
    double grad_x = 0, grad_y = 0;  // brightness ramp across the frame
    std::vector<SceneObject> objects;
    uint64_t noise_seed = 0;
};

struct RenderedPair {
    Tensor vis_u8;   // 3 channels, 0..255
    Tensor ir_u8;    // 1 channel, 0..255
    Tensor edge_u8;  // 1 channel, analytic object boundaries, 0..255
};

int synthetic_num_object_classes();
int synthetic_num_terrains();
// Class -> IR gray level; constant inside each object mask up to sensor noise.
double synthetic_object_emissivity(int object_class);
std::array<double, 3> synthetic_object_color(int object_class);

SyntheticScene make_scene(RngStream& rng, int resolution);
RenderedPair render_scene(const SyntheticScene& scene);
// 1 inside object index i (topmost wins), for render-oracle checks.
std::vector<uint8_t> object_mask(const SyntheticScene& scene, size_t index);

// Write count pairs under root/{ir,vis,edges_ir,edges_vis}/<id>.png plus
// manifest.json with a 0.9/0.1 sorted-id split. Deterministic given the seed.
DatasetManifest generate_synthetic_pairs(const std::string& root, int count,
                                         int resolution, uint64_t seed);

// ---------------------------------------------------------------------------
// Image round-trip helpers
// ---------------------------------------------------------------------------

void save_image(const Tensor& normalized, const std::string& path);  // [-1,1] -> 8-bit PNG
Tensor load_image(const std::string& path);                         // 8-bit PNG -> [-1,1]

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

}  // namespace cmdiff
