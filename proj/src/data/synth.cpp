#include "data/synth.hpp"

#include <array>
#include <cmath>

#include "core/rng.hpp"

namespace bnnkit {

namespace {

struct Pt {
    double x, y;
};
using Poly = std::vector<Pt>;

Poly loop(double cx, double cy, double rx, double ry, int n = 10, double phase = 0) {
    Poly p;
    for (int i = 0; i <= n; ++i) {
        double a = phase + 2.0 * M_PI * i / n;
        p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return p;
}

// digit skeletons on the unit square (x right, y down)
std::vector<Poly> glyph(int digit) {
    switch (digit) {
        case 0: return {loop(0.5, 0.5, 0.24, 0.36)};
        case 1: return {{{0.38, 0.28}, {0.55, 0.12}, {0.55, 0.9}}};
        case 2:
            return {{{0.24, 0.3}, {0.3, 0.15}, {0.55, 0.1}, {0.74, 0.2}, {0.76, 0.38},
                     {0.3, 0.72}, {0.22, 0.88}},
                    {{0.22, 0.88}, {0.78, 0.88}}};
        case 3:
            return {{{0.26, 0.18}, {0.5, 0.1}, {0.72, 0.2}, {0.68, 0.4}, {0.48, 0.48}},
                    {{0.48, 0.48}, {0.72, 0.58}, {0.74, 0.78}, {0.5, 0.9}, {0.26, 0.8}}};
        case 4: return {{{0.62, 0.1}, {0.22, 0.62}, {0.82, 0.62}}, {{0.62, 0.1}, {0.62, 0.9}}};
        case 5:
            return {{{0.72, 0.12}, {0.3, 0.12}, {0.28, 0.46}},
                    {{0.28, 0.46}, {0.6, 0.42}, {0.75, 0.58}, {0.68, 0.8}, {0.44, 0.88},
                     {0.26, 0.78}}};
        case 6:
            return {{{0.68, 0.12}, {0.45, 0.2}, {0.32, 0.42}, {0.3, 0.68}},
                    loop(0.5, 0.68, 0.2, 0.2)};
        case 7: return {{{0.22, 0.14}, {0.78, 0.14}, {0.44, 0.9}}};
        case 8: return {loop(0.5, 0.3, 0.17, 0.18), loop(0.5, 0.68, 0.21, 0.21)};
        case 9:
            return {loop(0.5, 0.32, 0.2, 0.2), {{0.7, 0.32}, {0.68, 0.58}, {0.54, 0.9}}};
        default: fail(ErrorKind::Parameter, "glyph: digit out of range");
    }
}

double seg_dist(double px, double py, Pt a, Pt b) {
    double dx = b.x - a.x, dy = b.y - a.y;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double qx = a.x + t * dx - px, qy = a.y + t * dy - py;
    return std::sqrt(qx * qx + qy * qy);
}

void draw_poly(float* img, int side, const Poly& poly, double thick) {
    const double aa = 0.7;
    for (size_t s = 0; s + 1 < poly.size(); ++s) {
        Pt a = poly[s], b = poly[s + 1];
        int x0 = static_cast<int>(std::floor(std::min(a.x, b.x) - thick - 1));
        int x1 = static_cast<int>(std::ceil(std::max(a.x, b.x) + thick + 1));
        int y0 = static_cast<int>(std::floor(std::min(a.y, b.y) - thick - 1));
        int y1 = static_cast<int>(std::ceil(std::max(a.y, b.y) + thick + 1));
        for (int y = std::max(0, y0); y <= std::min(side - 1, y1); ++y)
            for (int x = std::max(0, x0); x <= std::min(side - 1, x1); ++x) {
                double d = seg_dist(x + 0.5, y + 0.5, a, b);
                double v = 1.0 - (d - thick * 0.5) / aa;
                if (v <= 0) continue;
                float* px = img + y * side + x;
                *px = std::max(*px, static_cast<float>(std::min(v, 1.0)));
            }
    }
}

} // namespace

Dataset make_synthetic_digits(const SynthConfig& cfg, std::string split_tag) {
    if (cfg.count <= 0) fail(ErrorKind::Parameter, "synthetic dataset: count must be positive");
    const int side = 28;
    Dataset d;
    d.images = Tensor({cfg.count, side, side, 1});
    d.labels.resize(static_cast<size_t>(cfg.count));
    d.split = std::move(split_tag);

    for (int64_t i = 0; i < cfg.count; ++i) {
        SeededRng rng(cfg.seed, derive_stream({kStreamData, static_cast<uint64_t>(i)}));
        int digit = static_cast<int>(rng.next_u32() % 10);
        d.labels[static_cast<size_t>(i)] = digit;

        double rot = (rng.uniform() * 2 - 1) * cfg.max_rotate;
        double scale = cfg.min_scale + rng.uniform() * (cfg.max_scale - cfg.min_scale);
        double shear = (rng.uniform() * 2 - 1) * cfg.max_shear;
        double tx = (rng.uniform() * 2 - 1) * cfg.max_shift;
        double ty = (rng.uniform() * 2 - 1) * cfg.max_shift;
        double thick = cfg.min_thick + rng.uniform() * (cfg.max_thick - cfg.min_thick);

        double box = 22.0 * scale; // glyph box in pixels, centered
        double cx = side / 2.0 + tx, cy = side / 2.0 + ty;
        double ca = std::cos(rot), sa = std::sin(rot);
        auto map = [&](Pt p) -> Pt {
            double gx = (p.x - 0.5 + shear * (0.5 - p.y)) * box;
            double gy = (p.y - 0.5) * box;
            return {cx + ca * gx - sa * gy, cy + sa * gx + ca * gy};
        };

        float* img = d.images.ptr() + i * side * side;
        for (const Poly& poly : glyph(digit)) {
            Poly mapped;
            mapped.reserve(poly.size());
            for (Pt p : poly) mapped.push_back(map(p));
            draw_poly(img, side, mapped, thick);
        }
        for (int k = 0; k < cfg.distractor_strokes; ++k) {
            Pt a{rng.uniform() * side, rng.uniform() * side};
            double len = 2.0 + rng.uniform() * 4.0, ang = rng.uniform() * 2 * M_PI;
            Pt b{a.x + len * std::cos(ang), a.y + len * std::sin(ang)};
            draw_poly(img, side, {a, b}, 0.6);
        }
        if (cfg.noise_std > 0)
            for (int64_t p = 0; p < side * side; ++p) {
                double v = img[p] + rng.normal() * cfg.noise_std;
                img[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    }
    return d;
}

} // namespace bnnkit
