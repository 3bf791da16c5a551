#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include <doctest.h>

#include "p2f/errors.hpp"
#include "p2f/world.hpp"

using namespace p2f;
using namespace p2f::world;

namespace {

bool has_ood(const PanopticLabel& label) {
    for (std::uint16_t c : label.class_map) {
        if (c == kTriangle || c == kCross) return true;
    }
    return false;
}

// 4-connected flood fill size from the first pixel of the region.
std::size_t component_size(const std::vector<std::uint16_t>& inst, std::size_t size,
                          std::uint16_t id) {
    std::size_t start = inst.size();
    for (std::size_t p = 0; p < inst.size(); ++p) {
        if (inst[p] == id) { start = p; break; }
    }
    if (start == inst.size()) return 0;
    std::set<std::size_t> seen{start};
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const std::size_t y = p / size, x = p % size;
        const std::size_t neigh[4] = {x > 0 ? p - 1 : p, x + 1 < size ? p + 1 : p,
                                      y > 0 ? p - size : p, y + 1 < size ? p + size : p};
        for (std::size_t q : neigh) {
            if (q != p && inst[q] == id && seen.insert(q).second) stack.push_back(q);
        }
    }
    return seen.size();
}

}  // namespace

TEST_CASE("samples are deterministic per (seed, split, index)") {
    SceneSpec spec;
    spec.seed = 7;
    const Sample a = generate_sample(spec, Split::val_open, 3);
    const Sample b = generate_sample(spec, Split::val_open, 3);
    CHECK(a.image == b.image);
    CHECK(a.label.class_map == b.label.class_map);
    CHECK(a.label.instance_map == b.label.instance_map);

    const Sample c = generate_sample(spec, Split::val_closed, 3);
    CHECK(a.image != c.image);
}

TEST_CASE("split guarantees: OOD classes only in val_open") {
    SceneSpec spec;
    spec.seed = 11;
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(!has_ood(generate_sample(spec, Split::train, i).label));
        CHECK(!has_ood(generate_sample(spec, Split::val_closed, i).label));
        const Sample open = generate_sample(spec, Split::val_open, i);
        CHECK(has_ood(open.label));
        // at least one full OOD *instance*, not just stray pixels
        std::set<std::uint16_t> ood_ids;
        for (std::size_t p = 0; p < open.label.class_map.size(); ++p) {
            if (open.label.class_map[p] == kTriangle || open.label.class_map[p] == kCross) {
                ood_ids.insert(open.label.instance_map[p]);
            }
        }
        CHECK(!ood_ids.empty());
        CHECK(ood_ids.count(0) == 0);
    }
}

TEST_CASE("labels are structurally valid") {
    SceneSpec spec;
    spec.seed = 13;
    for (std::size_t i = 0; i < 20; ++i) {
        const Sample s = generate_sample(spec, Split::val_open, i);
        const std::size_t n = spec.size;
        for (double v : s.image) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        std::set<std::uint16_t> ids;
        for (std::size_t p = 0; p < n * n; ++p) {
            const std::uint16_t cls = s.label.class_map[p];
            const std::uint16_t id = s.label.instance_map[p];
            const ClassInfo& info = s.label.catalog[cls];
            // stuff pixels carry instance 0, thing pixels a nonzero id
            CHECK(info.is_thing == (id != 0));
            if (id != 0) ids.insert(id);
        }
        // every instance id is one 4-connected region of a single class
        for (std::uint16_t id : ids) {
            std::set<int> classes;
            std::size_t area = 0;
            for (std::size_t p = 0; p < n * n; ++p) {
                if (s.label.instance_map[p] == id) {
                    classes.insert(s.label.class_map[p]);
                    ++area;
                }
            }
            CHECK(classes.size() == 1);
            CHECK(component_size(s.label.instance_map, n, id) == area);
        }
    }
}

TEST_CASE("every in-distribution class appears in a healthy share of training images") {
    SceneSpec spec;
    spec.seed = 42;
    std::map<int, std::size_t> images_with;
    const std::size_t count = 200;
    for (std::size_t i = 0; i < count; ++i) {
        const Sample s = generate_sample(spec, Split::train, i);
        std::set<int> present;
        for (std::uint16_t c : s.label.class_map) present.insert(c);
        for (int c : present) images_with[c]++;
    }
    for (int c : {kSky, kGround, kCircle, kSquare}) {
        CHECK(images_with[c] >= count / 10);
    }
}

TEST_CASE("binary masks partition the non-void canvas") {
    SceneSpec spec;
    spec.seed = 17;
    for (std::size_t i = 0; i < 10; ++i) {
        const Sample s = generate_sample(spec, Split::val_open, i);
        const BinaryMasks bm = to_binary_masks(s.label);
        REQUIRE(bm.masks.size() == bm.classes.size());
        const std::size_t hw = spec.size * spec.size;
        std::vector<int> covered(hw, 0);
        for (const BinaryMask& m : bm.masks) {
            REQUIRE(m.size() == hw);
            for (std::size_t p = 0; p < hw; ++p) covered[p] += m[p] ? 1 : 0;
        }
        for (std::size_t p = 0; p < hw; ++p) {
            const std::uint16_t cls = s.label.class_map[p];
            const bool ood = cls == kTriangle || cls == kCross;
            // OOD pixels are void: excluded from supervision entirely
            CHECK(covered[p] == (ood ? 0 : 1));
        }
        // no OOD class ever appears as a supervised target
        for (int c : bm.classes) {
            CHECK(c != kTriangle);
            CHECK(c != kCross);
        }
    }
}

TEST_CASE("mask count is stuff-classes-present plus thing instances") {
    SceneSpec spec;
    spec.seed = 19;
    const Sample s = generate_sample(spec, Split::val_closed, 0);
    std::set<int> stuff_present;
    std::set<std::uint16_t> thing_ids;
    for (std::size_t p = 0; p < s.label.class_map.size(); ++p) {
        if (s.label.instance_map[p] == 0) {
            stuff_present.insert(s.label.class_map[p]);
        } else {
            thing_ids.insert(s.label.instance_map[p]);
        }
    }
    const BinaryMasks bm = to_binary_masks(s.label);
    CHECK(bm.masks.size() == stuff_present.size() + thing_ids.size());
}

TEST_CASE("small canvases generate valid scenes") {
    SceneSpec spec;
    spec.seed = 23;
    spec.size = 16;
    const Sample s = generate_sample(spec, Split::train, 0);
    CHECK(s.label.class_map.size() == 16 * 16);
    CHECK(s.image.size() == 3 * 16 * 16);
}

TEST_CASE("netpbm round trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "p2f_world_test";
    fs::create_directories(dir);

    SceneSpec spec;
    spec.seed = 29;
    const Sample s = generate_sample(spec, Split::train, 0);

    const std::string ppm = (dir / "img.ppm").string();
    write_ppm(ppm, s.image, spec.size, spec.size);
    std::size_t h = 0, w = 0;
    const std::vector<double> back = read_ppm(ppm, h, w);
    REQUIRE(h == spec.size);
    REQUIRE(w == spec.size);
    double max_err = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
        max_err = std::max(max_err, std::abs(back[i] - s.image[i]));
    }
    CHECK(max_err <= 0.5 / 255.0 + 1e-12);  // 8-bit quantization only

    const std::string pgm = (dir / "cls.pgm").string();
    write_pgm16(pgm, s.label.class_map, spec.size, spec.size);
    const std::vector<std::uint16_t> cls = read_pgm16(pgm, h, w);
    CHECK(cls == s.label.class_map);

    CHECK_THROWS_AS(read_ppm((dir / "missing.ppm").string(), h, w), DataError);
    fs::remove_all(dir);
}
