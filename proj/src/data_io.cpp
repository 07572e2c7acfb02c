#include "cmdiff/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cmdiff/constraints.hpp"
#include "cmdiff/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmdiff {

std::vector<std::string> DatasetManifest::all_ids() const {
    std::vector<std::string> ids = train_ids;
    ids.insert(ids.end(), test_ids.begin(), test_ids.end());
    std::sort(ids.begin(), ids.end());
    return ids;
}

void DatasetManifest::save(const std::string& path) const {
    json j;
    j["root"] = root;
    j["resolution"] = resolution;
    j["train"] = train_ids;
    j["test"] = test_ids;
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read manifest: " + path);
    json j = json::parse(in);
    DatasetManifest m;
    m.root = j.at("root").get<std::string>();
    m.resolution = j.at("resolution").get<int>();
    m.train_ids = j.at("train").get<std::vector<std::string>>();
    m.test_ids = j.at("test").get<std::vector<std::string>>();
    return m;
}

namespace {

std::vector<std::string> list_png_stems(const fs::path& dir) {
    std::vector<std::string> stems;
    if (!fs::is_directory(dir)) throw DataError("missing directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            stems.push_back(e.path().stem().string());
        }
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

}  // namespace

DatasetManifest load_paired_dataset(const std::string& root, int resolution) {
    fs::path rootp(root);
    std::vector<std::string> ir_ids = list_png_stems(rootp / "ir");
    std::vector<std::string> vis_ids = list_png_stems(rootp / "vis");

    std::set<std::string> ir_set(ir_ids.begin(), ir_ids.end());
    std::set<std::string> vis_set(vis_ids.begin(), vis_ids.end());
    std::vector<std::string> orphans;
    for (const auto& id : ir_ids)
        if (!vis_set.count(id)) orphans.push_back("ir/" + id);
    for (const auto& id : vis_ids)
        if (!ir_set.count(id)) orphans.push_back("vis/" + id);
    if (!orphans.empty()) {
        std::ostringstream os;
        os << "unmatched samples in " << root << ":";
        for (const auto& o : orphans) os << " " << o;
        throw DataError(os.str());
    }
    if (ir_ids.empty()) throw DataError("no image pairs under " + root);

    fs::path manifest_path = rootp / "manifest.json";
    if (fs::exists(manifest_path)) {
        DatasetManifest m = DatasetManifest::load(manifest_path.string());
        m.root = root;
        m.resolution = resolution;
        std::set<std::string> listed;
        for (const auto& id : m.all_ids()) listed.insert(id);
        if (listed != ir_set) throw DataError("manifest out of sync with files under " + root);
        return m;
    }

    DatasetManifest m;
    m.root = root;
    m.resolution = resolution;
    size_t n_train = (ir_ids.size() * 9) / 10;
    if (n_train == 0) n_train = ir_ids.size() > 1 ? ir_ids.size() - 1 : 1;
    for (size_t i = 0; i < ir_ids.size(); ++i) {
        (i < n_train ? m.train_ids : m.test_ids).push_back(ir_ids[i]);
    }
    return m;
}

int detect_dataset_resolution(const std::string& root) {
    fs::path manifest_path = fs::path(root) / "manifest.json";
    if (fs::exists(manifest_path)) {
        return DatasetManifest::load(manifest_path.string()).resolution;
    }
    std::vector<std::string> ids = list_png_stems(fs::path(root) / "ir");
    if (ids.empty()) throw DataError("cannot detect resolution: no images under " + root);
    Tensor first = read_png_u8((fs::path(root) / "ir" / (ids.front() + ".png")).string());
    return first.h;
}

PairedSample load_sample(const DatasetManifest& m, const std::string& id,
                         EdgeDetector detector, const CannyParams& canny) {
    fs::path rootp(m.root);
    PairedSample s;
    s.id = id;

    Tensor ir_u8 = read_png_u8((rootp / "ir" / (id + ".png")).string());
    Tensor vis_u8 = read_png_u8((rootp / "vis" / (id + ".png")).string());
    if (ir_u8.c == 1) ir_u8 = replicate_gray_to_rgb(ir_u8);
    if (vis_u8.c != 3) throw DataError("vis image must be RGB: " + id);

    if (ir_u8.h != m.resolution || ir_u8.w != m.resolution) {
        ir_u8 = resize_bilinear(ir_u8, m.resolution, m.resolution);
    }
    if (vis_u8.h != m.resolution || vis_u8.w != m.resolution) {
        vis_u8 = resize_bilinear(vis_u8, m.resolution, m.resolution);
    }
    s.ir = normalize_u8(ir_u8);
    s.vis = normalize_u8(vis_u8);

    if (detector == EdgeDetector::External) {
        for (auto [field, sub] : {std::pair<Tensor*, const char*>{&s.edges_ir, "edges_ir"},
                                  std::pair<Tensor*, const char*>{&s.edges_vis, "edges_vis"}}) {
            fs::path p = rootp / sub / (id + ".png");
            if (!fs::exists(p)) {
                throw DataError("missing external edge map for sample '" + id + "': " + p.string());
            }
            Tensor e = read_png_u8(p.string());
            if (e.c != 1) throw DataError("edge map must be grayscale: " + p.string());
            if (e.h != m.resolution || e.w != m.resolution) {
                e = resize_bilinear(e, m.resolution, m.resolution);
            }
            *field = external_edges_from_u8(e);
        }
    } else {
        s.edges_ir = detect_edges(s.ir, detector, canny);
        s.edges_vis = detect_edges(s.vis, detector, canny);
    }
    return s;
}

std::vector<PairedSample> load_samples(const DatasetManifest& m,
                                       const std::vector<std::string>& ids,
                                       EdgeDetector detector, const CannyParams& canny) {
    std::vector<PairedSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(load_sample(m, id, detector, canny));
    return out;
}

ConstraintSpec fit_constraints(const DatasetManifest& m, Modality target_modality, int bins) {
    std::vector<Tensor> unit_images;
    unit_images.reserve(m.train_ids.size());
    for (const auto& id : m.train_ids) {
        PairedSample s = load_sample(m, id);
        unit_images.push_back(to_unit(target_modality == Modality::IR ? s.ir : s.vis));
    }
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(unit_images.size());
    for (const auto& t : unit_images) ptrs.push_back(&t);
    return fit_constraints_from_images(ptrs, bins);
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

struct Palette {
    std::array<double, 3> vis;
    double ir;
};

// Object classes: distinct saturated colors and distinct emissivities, so the
// VIS<->IR mapping is bijective per class and both directions are learnable.
// Emissivity levels are spaced 0.08 apart (4 sigma of the sensor noise) and
// stay clear of the terrain band below.
const Palette kObjects[] = {
    {{0.85, 0.12, 0.10}, 0.74},  // red vehicle
    {{0.10, 0.20, 0.85}, 0.66},  // blue vehicle
    {{0.92, 0.90, 0.88}, 0.58},  // white van
    {{0.88, 0.80, 0.12}, 0.50},  // yellow vehicle
    {{0.10, 0.70, 0.15}, 0.42},  // green vehicle
    {{0.25, 0.25, 0.28}, 0.34},  // dark structure
};

// Terrain backgrounds. The VIS palette is spread out (color-rich scenes) while
// the IR band is compressed and cool: visible images carry clearly more pixel
// variance than infrared ones, and the per-channel dataset means of the two
// modalities stay well separated.
const Palette kTerrains[] = {
    {{0.20, 0.62, 0.25}, 0.10},  // grass
    {{0.62, 0.38, 0.30}, 0.18},  // dirt
    {{0.38, 0.30, 0.55}, 0.26},  // asphalt
};

constexpr double kIrNoiseSigma = 0.02;

bool inside(const SceneObject& o, double x, double y) {
    if (o.kind == ShapeKind::Rect) {
        return std::abs(x - o.cx) <= o.rx && std::abs(y - o.cy) <= o.ry;
    }
    double dx = (x - o.cx) / o.rx, dy = (y - o.cy) / o.ry;
    return dx * dx + dy * dy <= 1.0;
}

bool overlaps(const SceneObject& a, const SceneObject& b) {
    double gap = 2.0;
    return std::abs(a.cx - b.cx) < a.rx + b.rx + gap &&
           std::abs(a.cy - b.cy) < a.ry + b.ry + gap;
}

int topmost_object(const SyntheticScene& s, double x, double y) {
    for (int i = static_cast<int>(s.objects.size()) - 1; i >= 0; --i) {
        if (inside(s.objects[i], x, y)) return i;
    }
    return -1;
}

}  // namespace

int synthetic_num_object_classes() { return static_cast<int>(std::size(kObjects)); }
int synthetic_num_terrains() { return static_cast<int>(std::size(kTerrains)); }
double synthetic_object_emissivity(int object_class) { return kObjects[object_class].ir; }
std::array<double, 3> synthetic_object_color(int object_class) { return kObjects[object_class].vis; }

SyntheticScene make_scene(RngStream& rng, int resolution) {
    SyntheticScene s;
    s.resolution = resolution;
    s.terrain = rng.uniform_int(0, synthetic_num_terrains() - 1);
    s.grad_x = rng.uniform(-0.06, 0.06);
    s.grad_y = rng.uniform(-0.06, 0.06);
    s.noise_seed = rng.next_u64();

    int want = rng.uniform_int(2, 4);
    for (int k = 0; k < want; ++k) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            SceneObject o;
            o.kind = rng.uniform() < 0.5 ? ShapeKind::Rect : ShapeKind::Disc;
            o.object_class = rng.uniform_int(0, synthetic_num_object_classes() - 1);
            o.rx = rng.uniform(0.08, 0.16) * resolution;
            o.ry = rng.uniform(0.08, 0.16) * resolution;
            o.cx = rng.uniform(o.rx + 2.0, resolution - o.rx - 2.0);
            o.cy = rng.uniform(o.ry + 2.0, resolution - o.ry - 2.0);
            bool ok = true;
            for (const auto& prev : s.objects) {
                if (overlaps(o, prev)) { ok = false; break; }
            }
            if (ok) {
                s.objects.push_back(o);
                break;
            }
        }
    }
    return s;
}

RenderedPair render_scene(const SyntheticScene& s) {
    int res = s.resolution;
    Tensor vis(1, 3, res, res);
    Tensor ir_gray(1, 1, res, res);
    Tensor edge(1, 1, res, res);

    RngStream noise(s.noise_seed);
    const Palette& terr = kTerrains[s.terrain];

    // class id per pixel (-1 terrain) for the edge/blur passes
    std::vector<int> cls(static_cast<size_t>(res) * res);
    std::vector<double> ir_clean(static_cast<size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            int oi = topmost_object(s, x, y);
            cls[static_cast<size_t>(y) * res + x] = oi;
            double ramp = s.grad_x * (x / static_cast<double>(res) - 0.5) +
                          s.grad_y * (y / static_cast<double>(res) - 0.5);
            double vis_tex = noise.uniform(-0.02, 0.02);
            double r, g, b, e;
            if (oi < 0) {
                r = terr.vis[0]; g = terr.vis[1]; b = terr.vis[2]; e = terr.ir;
            } else {
                const Palette& p = kObjects[s.objects[oi].object_class];
                r = p.vis[0]; g = p.vis[1]; b = p.vis[2]; e = p.ir;
            }
            vis.at(0, 0, y, x) = std::clamp(r + ramp + vis_tex, 0.0, 1.0);
            vis.at(0, 1, y, x) = std::clamp(g + ramp + vis_tex, 0.0, 1.0);
            vis.at(0, 2, y, x) = std::clamp(b + ramp + vis_tex, 0.0, 1.0);
            ir_clean[static_cast<size_t>(y) * res + x] = e;
        }
    }

    // mild 3x3 box blur on the IR plane, then sensor noise
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            double sum = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int yy = std::clamp(y + dy, 0, res - 1);
                    int xx = std::clamp(x + dx, 0, res - 1);
                    sum += ir_clean[static_cast<size_t>(yy) * res + xx];
                }
            }
            double v = sum / 9.0 + kIrNoiseSigma * noise.normal();
            ir_gray.at(0, 0, y, x) = std::clamp(v, 0.0, 1.0);
        }
    }

    // analytic class-boundary edges (the "external detector" ingestion path)
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            int me = cls[static_cast<size_t>(y) * res + x];
            bool boundary = false;
            for (int d = 0; d < 4 && !boundary; ++d) {
                int yy = y + (d == 0) - (d == 1);
                int xx = x + (d == 2) - (d == 3);
                if (yy < 0 || yy >= res || xx < 0 || xx >= res) continue;
                if (cls[static_cast<size_t>(yy) * res + xx] != me) boundary = true;
            }
            edge.at(0, 0, y, x) = boundary ? 1.0 : 0.0;
        }
    }

    auto to_u8 = [](Tensor t) {
        for (double& v : t.v) v = std::floor(v * 255.0 + 0.5);
        return t;
    };
    return {to_u8(vis), to_u8(ir_gray), to_u8(edge)};
}

std::vector<uint8_t> object_mask(const SyntheticScene& s, size_t index) {
    std::vector<uint8_t> mask(static_cast<size_t>(s.resolution) * s.resolution, 0);
    for (int y = 0; y < s.resolution; ++y) {
        for (int x = 0; x < s.resolution; ++x) {
            mask[static_cast<size_t>(y) * s.resolution + x] =
                topmost_object(s, x, y) == static_cast<int>(index) ? 1 : 0;
        }
    }
    return mask;
}

DatasetManifest generate_synthetic_pairs(const std::string& root, int count,
                                         int resolution, uint64_t seed) {
    if (count < 1) throw ConfigError("generate_synthetic_pairs: count must be >= 1");
    fs::path rootp(root);
    for (const char* sub : {"ir", "vis", "edges_ir", "edges_vis"}) {
        fs::create_directories(rootp / sub);
    }

    DatasetManifest m;
    m.root = root;
    m.resolution = resolution;
    for (int i = 0; i < count; ++i) {
        std::ostringstream id_os;
        id_os.width(5);
        id_os.fill('0');
        id_os << i;
        std::string id = id_os.str();

        RngStream rng = seed_stream(seed, "data/scene/" + id);
        SyntheticScene scene = make_scene(rng, resolution);
        RenderedPair r = render_scene(scene);

        write_png_u8_atomic((rootp / "vis" / (id + ".png")).string(), r.vis_u8);
        write_png_u8_atomic((rootp / "ir" / (id + ".png")).string(), r.ir_u8);
        write_png_u8_atomic((rootp / "edges_ir" / (id + ".png")).string(), r.edge_u8);
        write_png_u8_atomic((rootp / "edges_vis" / (id + ".png")).string(), r.edge_u8);

        size_t n_train = (static_cast<size_t>(count) * 9) / 10;
        if (n_train == 0) n_train = count > 1 ? count - 1 : 1;
        (static_cast<size_t>(i) < n_train ? m.train_ids : m.test_ids).push_back(id);
    }
    m.save((rootp / "manifest.json").string());
    return m;
}

void save_image(const Tensor& normalized, const std::string& path) {
    write_png_u8_atomic(path, denormalize_to_u8(normalized));
}

Tensor load_image(const std::string& path) { return normalize_u8(read_png_u8(path)); }

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (img.h == out_h && img.w == out_w) return img;
    Tensor out(img.n, img.c, out_h, out_w);
    double sy = static_cast<double>(img.h) / out_h;
    double sx = static_cast<double>(img.w) / out_w;
    for (int n = 0; n < img.n; ++n) {
        for (int c = 0; c < img.c; ++c) {
            for (int y = 0; y < out_h; ++y) {
                double fy = (y + 0.5) * sy - 0.5;
                int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.h - 1);
                int y1 = std::min(y0 + 1, img.h - 1);
                double wy = std::clamp(fy - y0, 0.0, 1.0);
                for (int x = 0; x < out_w; ++x) {
                    double fx = (x + 0.5) * sx - 0.5;
                    int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.w - 1);
                    int x1 = std::min(x0 + 1, img.w - 1);
                    double wx = std::clamp(fx - x0, 0.0, 1.0);
                    double v00 = img.at(n, c, y0, x0), v01 = img.at(n, c, y0, x1);
                    double v10 = img.at(n, c, y1, x0), v11 = img.at(n, c, y1, x1);
                    out.at(n, c, y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                         wy * ((1 - wx) * v10 + wx * v11);
                }
            }
        }
    }
    return out;
}

}  // namespace cmdiff
