#include "p2f/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>

#include "p2f/errors.hpp"
#include "p2f/rng.hpp"

namespace p2f::world {

namespace {

struct Rgb {
    double r, g, b;
};

Rgb base_color(int class_id) {
    switch (class_id) {
        case kSky: return {0.55, 0.75, 0.95};
        case kGround: return {0.35, 0.55, 0.20};
        case kCircle: return {0.85, 0.25, 0.25};
        case kSquare: return {0.25, 0.35, 0.85};
        case kTriangle: return {0.76, 0.04, 0.76};
        default: return {0.88, 0.04, 1.00};  // kCross
    }
}

struct Shape {
    int class_id;
    std::ptrdiff_t cx, cy, r;
};

bool inside_shape(const Shape& s, std::ptrdiff_t x, std::ptrdiff_t y) {
    const std::ptrdiff_t dx = x - s.cx, dy = y - s.cy;
    switch (s.class_id) {
        case kCircle:
            return dx * dx + dy * dy <= s.r * s.r;
        case kSquare:
            return std::abs(dx) <= s.r && std::abs(dy) <= s.r;
        case kTriangle: {
            // Up-pointing isoceles triangle: apex at cy - r, base at cy + r.
            if (dy < -s.r || dy > s.r) return false;
            const double half = static_cast<double>(s.r) * (static_cast<double>(dy + s.r)) /
                                (2.0 * static_cast<double>(s.r));
            return std::abs(static_cast<double>(dx)) <= half;
        }
        default: {  // kCross
            const std::ptrdiff_t t = std::max<std::ptrdiff_t>(2, s.r / 3);
            return (std::abs(dx) <= t && std::abs(dy) <= s.r) ||
                   (std::abs(dy) <= t && std::abs(dx) <= s.r);
        }
    }
}

bool region_is_connected(const std::vector<std::uint16_t>& inst, std::size_t size,
                         std::uint16_t id) {
    std::size_t total = 0, start = inst.size();
    for (std::size_t p = 0; p < inst.size(); ++p) {
        if (inst[p] == id) {
            ++total;
            if (start == inst.size()) start = p;
        }
    }
    if (total == 0) return false;
    std::vector<std::uint8_t> seen(inst.size(), 0);
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    std::size_t reached = 0;
    while (!queue.empty()) {
        const std::size_t p = queue.front();
        queue.pop_front();
        ++reached;
        const std::size_t y = p / size, x = p % size;
        const std::size_t neigh[4] = {x > 0 ? p - 1 : p, x + 1 < size ? p + 1 : p,
                                      y > 0 ? p - size : p, y + 1 < size ? p + size : p};
        for (std::size_t q : neigh) {
            if (q != p && !seen[q] && inst[q] == id) {
                seen[q] = 1;
                queue.push_back(q);
            }
        }
    }
    return reached == total;
}

int split_id(Split s) {
    switch (s) {
        case Split::train: return 0;
        case Split::val_closed: return 1;
        default: return 2;
    }
}

}  // namespace

const std::vector<ClassInfo>& default_catalog() {
    static const std::vector<ClassInfo> catalog = {
        {kSky, "sky", false, false},      {kGround, "ground", false, false},
        {kCircle, "circle", true, false}, {kSquare, "square", true, false},
        {kTriangle, "triangle", true, true}, {kCross, "cross", true, true},
    };
    return catalog;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val_closed: return "val_closed";
        default: return "val_open";
    }
}

Sample generate_sample(const SceneSpec& spec, Split split, std::size_t index) {
    const std::size_t size = spec.size;
    const std::size_t hw = size * size;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        SplitMix64 rng(derive_key(spec.seed, static_cast<std::uint64_t>(split_id(split)),
                                  static_cast<std::uint64_t>(index), attempt));
        PanopticLabel label;
        label.height = size;
        label.width = size;
        label.catalog = default_catalog();
        label.class_map.assign(hw, static_cast<std::uint16_t>(kGround));
        label.instance_map.assign(hw, 0);

        const std::size_t horizon =
            static_cast<std::size_t>(rng.next_uniform(0.3, 0.7) * static_cast<double>(size));
        for (std::size_t p = 0; p < horizon * size; ++p) {
            label.class_map[p] = static_cast<std::uint16_t>(kSky);
        }

        // Radii scale with the canvas (5..10 at the default 64) so small
        // test canvases stay valid.
        const std::size_t r_lo = std::max<std::size_t>(2, size * 5 / 64);
        const std::size_t r_hi = std::max(r_lo, std::min(size * 10 / 64, (size - 2) / 2));
        auto draw_shape = [&](bool ood) {
            Shape s;
            if (ood) {
                s.class_id = rng.next_below(2) == 0 ? kTriangle : kCross;
            } else {
                s.class_id = rng.next_below(2) == 0 ? kCircle : kSquare;
            }
            s.r = static_cast<std::ptrdiff_t>(r_lo + rng.next_below(r_hi - r_lo + 1));
            s.cx = static_cast<std::ptrdiff_t>(s.r + rng.next_below(size - 2 * s.r));
            s.cy = static_cast<std::ptrdiff_t>(s.r + rng.next_below(size - 2 * s.r));
            return s;
        };
        std::vector<Shape> shapes;
        const std::size_t n_things =
            spec.min_things + rng.next_below(spec.max_things - spec.min_things + 1);
        for (std::size_t k = 0; k < n_things; ++k) shapes.push_back(draw_shape(false));
        if (split == Split::val_open) {
            const std::size_t n_ood = 1 + rng.next_below(2);
            for (std::size_t k = 0; k < n_ood; ++k) shapes.push_back(draw_shape(true));
        }

        for (std::size_t k = 0; k < shapes.size(); ++k) {
            const Shape& s = shapes[k];
            for (std::ptrdiff_t y = s.cy - s.r; y <= s.cy + s.r; ++y) {
                for (std::ptrdiff_t x = s.cx - s.r; x <= s.cx + s.r; ++x) {
                    if (inside_shape(s, x, y)) {
                        const std::size_t p = static_cast<std::size_t>(y) * size +
                                              static_cast<std::size_t>(x);
                        label.class_map[p] = static_cast<std::uint16_t>(s.class_id);
                        label.instance_map[p] = static_cast<std::uint16_t>(k + 1);
                    }
                }
            }
        }

        // Later shapes occlude earlier ones; reject scenes where occlusion
        // erased or split an instance.
        bool valid = true;
        for (std::size_t k = 0; k < shapes.size() && valid; ++k) {
            valid = region_is_connected(label.instance_map, size,
                                        static_cast<std::uint16_t>(k + 1));
        }
        if (!valid) continue;

        Sample sample;
        sample.label = std::move(label);
        sample.image.assign(3 * hw, 0.0);
        // Per-instance jitter: index 0/1 for the stuff classes, then shapes.
        std::vector<Rgb> colors;
        for (int cls : {kSky, kGround}) {
            Rgb c = base_color(cls);
            c.r += rng.next_uniform(-0.04, 0.04);
            c.g += rng.next_uniform(-0.04, 0.04);
            c.b += rng.next_uniform(-0.04, 0.04);
            colors.push_back(c);
        }
        for (const Shape& s : shapes) {
            Rgb c = base_color(s.class_id);
            c.r += rng.next_uniform(-0.04, 0.04);
            c.g += rng.next_uniform(-0.04, 0.04);
            c.b += rng.next_uniform(-0.04, 0.04);
            colors.push_back(c);
        }
        for (std::size_t p = 0; p < hw; ++p) {
            const std::uint16_t inst = sample.label.instance_map[p];
            const Rgb& c = inst == 0
                               ? colors[sample.label.class_map[p] == kSky ? 0 : 1]
                               : colors[1 + inst];
            const double noise_r = rng.next_gaussian() * spec.pixel_noise;
            const double noise_g = rng.next_gaussian() * spec.pixel_noise;
            const double noise_b = rng.next_gaussian() * spec.pixel_noise;
            sample.image[p] = std::clamp(c.r + noise_r, 0.0, 1.0);
            sample.image[hw + p] = std::clamp(c.g + noise_g, 0.0, 1.0);
            sample.image[2 * hw + p] = std::clamp(c.b + noise_b, 0.0, 1.0);
        }
        return sample;
    }
    throw EvaluationError("generate_sample: no valid scene after 64 attempts (seed " +
                          std::to_string(spec.seed) + ", index " + std::to_string(index) + ")");
}

std::vector<Sample> generate_split(const SceneSpec& spec, Split split, std::size_t count) {
    if (count < 1) throw DomainError("generate_split: count must be >= 1");
    std::vector<Sample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) samples.push_back(generate_sample(spec, split, i));
    return samples;
}

BinaryMasks to_binary_masks(const PanopticLabel& label) {
    const std::size_t hw = label.height * label.width;
    BinaryMasks out;
    std::vector<bool> is_ood_class(label.catalog.size() + 1, false);
    std::vector<bool> is_thing_class(label.catalog.size() + 1, false);
    int max_id = 0;
    for (const ClassInfo& c : label.catalog) max_id = std::max(max_id, c.id);
    is_ood_class.assign(max_id + 1, false);
    is_thing_class.assign(max_id + 1, false);
    for (const ClassInfo& c : label.catalog) {
        is_ood_class[c.id] = c.is_ood;
        is_thing_class[c.id] = c.is_thing;
    }
    // Stuff masks in class-id order.
    for (const ClassInfo& c : label.catalog) {
        if (c.is_thing || c.is_ood) continue;
        BinaryMask mask(hw, 0);
        bool present = false;
        for (std::size_t p = 0; p < hw; ++p) {
            if (label.class_map[p] == c.id) {
                mask[p] = 1;
                present = true;
            }
        }
        if (present) {
            out.masks.push_back(std::move(mask));
            out.classes.push_back(c.id);
        }
    }
    // Thing-instance masks in instance-id order; OOD instances stay void.
    std::uint16_t max_inst = 0;
    for (std::uint16_t v : label.instance_map) max_inst = std::max(max_inst, v);
    for (std::uint16_t id = 1; id <= max_inst; ++id) {
        BinaryMask mask(hw, 0);
        int cls = -1;
        bool present = false;
        for (std::size_t p = 0; p < hw; ++p) {
            if (label.instance_map[p] == id) {
                mask[p] = 1;
                cls = label.class_map[p];
                present = true;
            }
        }
        if (present && !is_ood_class[cls]) {
            out.masks.push_back(std::move(mask));
            out.classes.push_back(cls);
        }
    }
    return out;
}

void write_ppm(const std::string& path, const std::vector<double>& image, std::size_t height,
               std::size_t width) {
    const std::size_t hw = height * width;
    if (image.size() != 3 * hw) throw DimensionError("write_ppm: image size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_ppm: cannot open " + path);
    f << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> buf(3 * hw);
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(image[c * hw + p], 0.0, 1.0);
            buf[3 * p + c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

namespace {

void read_pnm_header(std::ifstream& f, const std::string& path, const char* magic,
                     std::size_t& width, std::size_t& height, std::size_t& maxval) {
    std::string tag;
    f >> tag;
    if (tag != magic) throw ParseError(path + ": expected " + std::string(magic) + " header");
    f >> width >> height >> maxval;
    if (!f) throw ParseError(path + ": malformed header");
    f.get();  // single whitespace after maxval
}

}  // namespace

std::vector<double> read_ppm(const std::string& path, std::size_t& height, std::size_t& width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_ppm: cannot open " + path);
    std::size_t maxval = 0;
    read_pnm_header(f, path, "P6", width, height, maxval);
    if (maxval != 255) throw ParseError(path + ": expected maxval 255");
    const std::size_t hw = height * width;
    std::vector<unsigned char> buf(3 * hw);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != buf.size()) {
        throw ParseError(path + ": truncated pixel data at byte " +
                         std::to_string(f.gcount()));
    }
    std::vector<double> image(3 * hw);
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            image[c * hw + p] = static_cast<double>(buf[3 * p + c]) / 255.0;
        }
    }
    return image;
}

void write_pgm16(const std::string& path, const std::vector<std::uint16_t>& map,
                 std::size_t height, std::size_t width) {
    if (map.size() != height * width) throw DimensionError("write_pgm16: map size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_pgm16: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    std::vector<unsigned char> buf(2 * map.size());
    for (std::size_t p = 0; p < map.size(); ++p) {
        buf[2 * p] = static_cast<unsigned char>(map[p] >> 8);  // big-endian per Netpbm
        buf[2 * p + 1] = static_cast<unsigned char>(map[p] & 0xFF);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<std::uint16_t> read_pgm16(const std::string& path, std::size_t& height,
                                      std::size_t& width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_pgm16: cannot open " + path);
    std::size_t maxval = 0;
    read_pnm_header(f, path, "P5", width, height, maxval);
    if (maxval != 65535) throw ParseError(path + ": expected maxval 65535");
    std::vector<unsigned char> buf(2 * height * width);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != buf.size()) {
        throw ParseError(path + ": truncated pixel data at byte " + std::to_string(f.gcount()));
    }
    std::vector<std::uint16_t> map(height * width);
    for (std::size_t p = 0; p < map.size(); ++p) {
        map[p] = static_cast<std::uint16_t>((buf[2 * p] << 8) | buf[2 * p + 1]);
    }
    return map;
}

void write_pgm8(const std::string& path, const std::vector<std::uint8_t>& map, std::size_t height,
                std::size_t width) {
    if (map.size() != height * width) throw DimensionError("write_pgm8: map size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_pgm8: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(map.data()), static_cast<std::streamsize>(map.size()));
}

}  // namespace p2f::world
