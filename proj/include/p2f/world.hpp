#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2f/matching.hpp"

namespace p2f::world {

struct ClassInfo {
    int id;
    std::string name;
    bool is_thing;
    bool is_ood;
};

// class ids 0..3 are in-distribution, 4..5 are held-out OOD shapes.
const std::vector<ClassInfo>& default_catalog();
constexpr int kSky = 0;
constexpr int kGround = 1;
constexpr int kCircle = 2;
constexpr int kSquare = 3;
constexpr int kTriangle = 4;
constexpr int kCross = 5;

struct PanopticLabel {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint16_t> class_map;     // per pixel class id
    std::vector<std::uint16_t> instance_map;  // 0 = stuff/none
    std::vector<ClassInfo> catalog;
};

enum class Split { train, val_closed, val_open };
std::string split_name(Split s);

struct SceneSpec {
    std::uint64_t seed = 42;
    std::size_t size = 64;
    std::size_t min_things = 1;
    std::size_t max_things = 4;
    double pixel_noise = 0.05;
};

struct Sample {
    std::vector<double> image;  // [3, H*W], values in [0, 1]
    PanopticLabel label;
};

// Deterministic per (seed, split, index). val_open samples always contain at
// least one OOD instance; train/val_closed never do.
Sample generate_sample(const SceneSpec& spec, Split split, std::size_t index);
std::vector<Sample> generate_split(const SceneSpec& spec, Split split, std::size_t count);

struct BinaryMasks {
    std::vector<BinaryMask> masks;  // disjoint; union covers the non-void canvas
    std::vector<int> classes;       // parallel class ids
};

// One mask per in-distribution stuff class present and one per InD thing
// instance; OOD pixels are emitted as void (excluded from supervision).
BinaryMasks to_binary_masks(const PanopticLabel& label);

// Netpbm IO: binary P6 (8-bit RGB) images, binary P5 16-bit label maps.
void write_ppm(const std::string& path, const std::vector<double>& image, std::size_t height,
               std::size_t width);
std::vector<double> read_ppm(const std::string& path, std::size_t& height, std::size_t& width);
void write_pgm16(const std::string& path, const std::vector<std::uint16_t>& map,
                 std::size_t height, std::size_t width);
std::vector<std::uint16_t> read_pgm16(const std::string& path, std::size_t& height,
                                      std::size_t& width);
void write_pgm8(const std::string& path, const std::vector<std::uint8_t>& map, std::size_t height,
                std::size_t width);

}  // namespace p2f::world
