// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "shadowdiff/degradation.hpp"
#include "shadowdiff/error.hpp"
#include "shadowdiff/io.hpp"

namespace shadowdiff {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Bilinear interpolation of a coarse grid of values drawn from [lo, hi].
std::vector<double> smooth_field(Rng& rng, int height, int width, double cell, double lo, double hi) {
    const int gh = static_cast<int>(std::ceil(height / cell)) + 1;
    const int gw = static_cast<int>(std::ceil(width / cell)) + 1;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (double& g : grid) g = uniform(rng, lo, hi);
    std::vector<double> out(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        const double fy = y / cell;
        const int y0 = std::min(static_cast<int>(fy), gh - 2);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = x / cell;
            const int x0 = std::min(static_cast<int>(fx), gw - 2);
            const double tx = fx - x0;
            const double a = grid[y0 * gw + x0];
            const double b = grid[y0 * gw + x0 + 1];
            const double c = grid[(y0 + 1) * gw + x0];
            const double d = grid[(y0 + 1) * gw + x0 + 1];
            out[static_cast<std::size_t>(y) * width + x] =
                (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
        }
    }
    return out;
}

void paint_ellipse(Rng& rng, MaskField& m) {
    const double size = std::min(m.height, m.width);
    const double cy = uniform(rng, 0.15, 0.85) * m.height;
    const double cx = uniform(rng, 0.15, 0.85) * m.width;
    const double ra = uniform(rng, 0.15, 0.32) * size;
    const double rb = uniform(rng, 0.15, 0.32) * size;
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
            const double u = (dx * ct + dy * st) / ra;
            const double v = (-dx * st + dy * ct) / rb;
            if (u * u + v * v <= 1.0) m.at(y, x) = 1.0f;
        }
    }
}

void paint_polygon(Rng& rng, MaskField& m) {
    const double size = std::min(m.height, m.width);
    const double cy = uniform(rng, 0.15, 0.85) * m.height;
    const double cx = uniform(rng, 0.15, 0.85) * m.width;
    const int n = uniform_int(rng, 3, 6);
    std::vector<double> angles(n);
    for (double& a : angles) a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    std::vector<double> px(n), py(n);
    for (int i = 0; i < n; ++i) {
        const double r = uniform(rng, 0.18, 0.36) * size;
        px[i] = cx + r * std::cos(angles[i]);
        py[i] = cy + r * std::sin(angles[i]);
    }
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const double qx = x + 0.5, qy = y + 0.5;
            bool inside = false;
            for (int i = 0, j = n - 1; i < n; j = i++) {
                if ((py[i] > qy) != (py[j] > qy) &&
                    qx < (px[j] - px[i]) * (qy - py[i]) / (py[j] - py[i]) + px[i]) {
                    inside = !inside;
                }
            }
            if (inside) m.at(y, x) = 1.0f;
        }
    }
}

double coverage(const MaskField& m) {
    double s = 0.0;
    for (float v : m.data) s += v;
    return s / static_cast<double>(m.size());
}

const char* shape_name(ShapeFamily s) {
    switch (s) {
        case ShapeFamily::kEllipse: return "ellipse";
        case ShapeFamily::kPolygon: return "polygon";
        case ShapeFamily::kMixed: return "mixed";
    }
    return "mixed";
}

ShapeFamily parse_shape(const std::string& s) {
    if (s == "ellipse") return ShapeFamily::kEllipse;
    if (s == "polygon") return ShapeFamily::kPolygon;
    if (s == "mixed") return ShapeFamily::kMixed;
    throw ConfigError("config key 'shape': expected ellipse|polygon|mixed, got '" + s + "'");
}

}  // namespace

void SceneConfig::validate() const {
    if (height < 8 || width < 8) throw InvalidArgument("scene size must be at least 8x8");
    if (channels != 1 && channels != 3) throw InvalidArgument("scene channels must be 1 or 3");
    if (regions < 1) throw InvalidArgument("scene needs at least one shadow region");
    if (!(w_min > 0.0 && w_min <= w_max && w_max < 1.0)) {
        throw InvalidArgument("illumination weight range must satisfy 0 < w_min <= w_max < 1");
    }
    if (!(x_min > 0.0 && x_min < x_max && x_max <= 1.0)) throw InvalidArgument("bad intensity range");
    if (x_min * (1.0 - w_max) < 0.1 + kDetectabilitySlack) {
        throw InvalidArgument("x_min*(1-w_max) is below the shadow detectability margin");
    }
    if (!(smoothness >= 1.0)) throw InvalidArgument("smoothness must be >= 1 pixel");
    if (!(texture >= 0.0)) throw InvalidArgument("texture amplitude must be non-negative");
    if (!(severity >= 0.0 && severity <= 1.0)) throw InvalidArgument("severity must lie in [0,1]");
}

KeyValues SceneConfig::to_key_values() const {
    KeyValues kv;
    kv.set("height", std::to_string(height));
    kv.set("width", std::to_string(width));
    kv.set("channels", std::to_string(channels));
    kv.set("regions", std::to_string(regions));
    kv.set("shape", shape_name(shape));
    kv.set("smoothness", format_double(smoothness));
    kv.set("w_min", format_double(w_min));
    kv.set("w_max", format_double(w_max));
    kv.set("x_min", format_double(x_min));
    kv.set("x_max", format_double(x_max));
    kv.set("texture", format_double(texture));
    kv.set("severity", format_double(severity));
    kv.set("seed", std::to_string(seed));
    return kv;
}

SceneConfig SceneConfig::from_key_values(const KeyValues& kv) {
    SceneConfig c;
    if (kv.contains("size")) c.height = c.width = static_cast<int>(kv.get_int("size"));
    c.height = static_cast<int>(kv.get_int("height", c.height));
    c.width = static_cast<int>(kv.get_int("width", c.width));
    c.channels = static_cast<int>(kv.get_int("channels", c.channels));
    c.regions = static_cast<int>(kv.get_int("regions", c.regions));
    if (kv.contains("shape")) c.shape = parse_shape(kv.get_string("shape"));
    c.smoothness = kv.get_double("smoothness", c.smoothness);
    c.w_min = kv.get_double("w_min", c.w_min);
    c.w_max = kv.get_double("w_max", c.w_max);
    c.x_min = kv.get_double("x_min", c.x_min);
    c.x_max = kv.get_double("x_max", c.x_max);
    c.texture = kv.get_double("texture", c.texture);
    c.severity = kv.get_double("severity", c.severity);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    return c;
}

SceneSample generate_scene(const SceneConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int H = cfg.height, W = cfg.width, C = cfg.channels;

    // Shadow-free background: per-channel base colour, smooth shading and an
    // oriented stripe texture.
    Image x(H, W, C);
    const double period = uniform(rng, 4.0, 10.0);
    const double orient = uniform(rng, 0.0, std::numbers::pi);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double kx = std::cos(orient) * 2.0 * std::numbers::pi / period;
    const double ky = std::sin(orient) * 2.0 * std::numbers::pi / period;
    for (int c = 0; c < C; ++c) {
        const double base = uniform(rng, 0.5, 0.8);
        const double tex_gain = uniform(rng, 0.5, 1.0) * cfg.texture;
        const auto shade = smooth_field(rng, H, W, cfg.smoothness, -0.12, 0.12);
        for (int yy = 0; yy < H; ++yy) {
            for (int xx = 0; xx < W; ++xx) {
                const double v = base + shade[static_cast<std::size_t>(yy) * W + xx] +
                                 tex_gain * std::sin(kx * xx + ky * yy + phase);
                x.at(yy, xx, c) = static_cast<float>(std::clamp(v, cfg.x_min, cfg.x_max));
            }
        }
    }

    MaskField m(H, W);
    for (int attempt = 0;; ++attempt) {
        if (attempt == 100) throw InvalidArgument("degenerate scene config: could not place a shadow region");
        std::fill(m.data.begin(), m.data.end(), 0.0f);
        for (int r = 0; r < cfg.regions; ++r) {
            const bool ellipse = cfg.shape == ShapeFamily::kEllipse ||
                                 (cfg.shape == ShapeFamily::kMixed && uniform_int(rng, 0, 1) == 0);
            if (ellipse) {
                paint_ellipse(rng, m);
            } else {
                paint_polygon(rng, m);
            }
        }
        const double cov = coverage(m);
        if (cov >= 0.08 && cov <= 0.6) break;
    }

    Field w(H, W, C);
    const auto base_w = smooth_field(rng, H, W, cfg.smoothness, cfg.w_min, cfg.w_max);
    for (int c = 0; c < C; ++c) {
        const double tint = C == 1 ? 0.0 : uniform(rng, -0.05, 0.05);
        for (std::size_t p = 0; p < x.pixel_count(); ++p) {
            w.data[p * C + c] = static_cast<float>(std::clamp(base_w[p] * (1.0 + tint), cfg.w_min, cfg.w_max));
        }
    }

    SceneSample s;
    s.y = apply_shadow(x, m, w);
    s.h = compose_h(m, w);
    s.m_tilde = corrupt_mask(m, cfg.severity, mix_seed(cfg.seed, 1));
    s.x = std::move(x);
    s.m = std::move(m);
    s.w = std::move(w);
    return s;
}

MaskField dilate(const MaskField& m, int radius) {
    if (radius <= 0) return m;
    MaskField out(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            float v = 0.0f;
            for (int dy = -radius; dy <= radius && v == 0.0f; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= m.height) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx;
                    if (xx >= 0 && xx < m.width && m.at(yy, xx) > 0.5f) {
                        v = 1.0f;
                        break;
                    }
                }
            }
            out.at(y, x) = v;
        }
    }
    return out;
}

MaskField erode(const MaskField& m, int radius) {
    if (radius <= 0) return m;
    MaskField inv(m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) inv.data[i] = m.data[i] > 0.5f ? 0.0f : 1.0f;
    MaskField grown = dilate(inv, radius);
    for (float& v : grown.data) v = 1.0f - v;
    return grown;
}

MaskField corrupt_mask(const MaskField& m, double severity, std::uint64_t seed) {
    if (!(severity >= 0.0 && severity <= 1.0)) throw InvalidArgument("severity must lie in [0,1]");
    if (!m.is_binary()) throw InvalidArgument("corrupt_mask expects a binary mask");
    if (severity == 0.0) return m;

    Rng rng(seed);
    const int kmax = static_cast<int>(std::lround(3.0 * severity));
    const int k_dilate = uniform_int(rng, 0, kmax);
    const int k_erode = uniform_int(rng, 0, kmax);
    MaskField out = erode(dilate(m, k_dilate), k_erode);

    const int H = out.height, W = out.width;
    const double flip_p = 0.5 * severity;
    MaskField before = out;
    auto differs = [&](int y, int x, int yy, int xx) {
        return yy >= 0 && yy < H && xx >= 0 && xx < W && before.at(y, x) != before.at(yy, xx);
    };
    std::bernoulli_distribution flip(flip_p);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const bool band = differs(y, x, y - 1, x) || differs(y, x, y + 1, x) || differs(y, x, y, x - 1) ||
                              differs(y, x, y, x + 1);
            if (band && flip(rng)) out.at(y, x) = 1.0f - out.at(y, x);
        }
    }

    const double min_area = severity * 0.02 * H * W;
    std::vector<int> label(out.size(), -1);
    std::vector<int> stack, component;
    for (int start = 0; start < static_cast<int>(out.size()); ++start) {
        if (out.data[start] < 0.5f || label[start] >= 0) continue;
        component.clear();
        stack.assign(1, start);
        label[start] = start;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            component.push_back(p);
            const int py = p / W, px = p % W;
            const int nbrs[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
            for (const auto& q : nbrs) {
                if (q[0] < 0 || q[0] >= H || q[1] < 0 || q[1] >= W) continue;
                const int qi = q[0] * W + q[1];
                if (out.data[qi] > 0.5f && label[qi] < 0) {
                    label[qi] = start;
                    stack.push_back(qi);
                }
            }
        }
        if (static_cast<double>(component.size()) < min_area) {
            for (int p : component) out.data[p] = 0.0f;
        }
    }
    return out;
}

std::string scene_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05d", index);
    return buf;
}

std::string image_extension(int channels) { return channels == 1 ? ".pgm" : ".ppm"; }

std::uint64_t scene_seed(std::uint64_t dataset_seed, int index) {
    return mix_seed(dataset_seed, static_cast<std::uint64_t>(index) + 1000);
}

void write_scene(const SceneSample& s, const std::filesystem::path& dir, const KeyValues& meta) {
    std::filesystem::create_directories(dir);
    const std::string ext = image_extension(s.x.channels);
    save_image(s.x, dir / ("x" + ext));
    save_image(s.y, dir / ("y" + ext));
    save_mask(s.m, dir / "m.pgm");
    save_mask(s.m_tilde, dir / "m_tilde.pgm");
    save_raw_plane(s.h, dir / "h.rpln");
    save_raw_plane(s.w, dir / "w.rpln");
    write_file(dir / "meta", meta.to_string());
}

SceneSample read_scene(const std::filesystem::path& dir) {
    SceneSample s;
    const std::string ext = std::filesystem::exists(dir / "x.pgm") ? ".pgm" : ".ppm";
    s.x = load_image(dir / ("x" + ext));
    s.y = load_image(dir / ("y" + ext));
    s.m = load_mask(dir / "m.pgm");
    s.m_tilde = load_mask(dir / "m_tilde.pgm");
    s.h = DegradationMap(load_raw_plane(dir / "h.rpln"));
    s.w = load_raw_plane(dir / "w.rpln");
    require_same_shape(s.x, s.y, "scene x/y");
    require_same_extent(s.x, s.m, "scene mask");
    require_same_extent(s.x, s.m_tilde, "scene initial mask");
    require_same_extent(s.x, s.h, "scene degradation map");
    return s;
}

std::vector<SceneSample> generate_scenes(const SceneConfig& base, int count, int first_index) {
    std::vector<SceneSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        SceneConfig c = base;
        c.seed = scene_seed(base.seed, first_index + i);
        out.push_back(generate_scene(c));
    }
    return out;
}

std::filesystem::path write_dataset(const SceneConfig& base, int count, const std::filesystem::path& root) {
    base.validate();
    if (count < 1) throw InvalidArgument("dataset count must be at least 1");
    std::filesystem::create_directories(root);
    KeyValues manifest = base.to_key_values();
    manifest.set("count", std::to_string(count));
    std::string scene_lines;
    for (int i = 0; i < count; ++i) {
        SceneConfig c = base;
        c.seed = scene_seed(base.seed, i);
        KeyValues meta = c.to_key_values();
        meta.set("index", std::to_string(i));
        meta.set("dataset_seed", std::to_string(base.seed));
        write_scene(generate_scene(c), root / scene_dir_name(i), meta);
        scene_lines += "scene=" + scene_dir_name(i) + "\n";
    }
    const auto path = root / "manifest";
    write_file(path, manifest.to_string() + scene_lines);
    return path;
}

Dataset read_dataset(const std::filesystem::path& root) {
    const auto path = root / "manifest";
    if (!std::filesystem::exists(path)) throw FormatError("no manifest in " + root.string());
    const std::string text = read_file(path);
    Dataset ds;
    std::string config_text;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.rfind("scene=", 0) == 0) {
            ds.names.push_back(line.substr(6));
        } else {
            config_text += line + "\n";
        }
    }
    ds.manifest = KeyValues::parse(config_text, path.string());
    for (const auto& name : ds.names) ds.scenes.push_back(read_scene(root / name));
    if (ds.scenes.empty()) throw FormatError("dataset " + root.string() + " lists no scenes");
    return ds;
}

}  // namespace shadowdiff
