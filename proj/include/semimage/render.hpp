#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semimage/image.hpp"

namespace semimage {

struct RgbPixel {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const RgbPixel&) const = default;
};

/// atan2(h_sin, h_cos) in degrees, wrapped to [0, 360). (0, 0) gives 0.
double hue_angle(double h_cos, double h_sin);

/// Hexcone HSV to RGB; s and v are clamped to [0, 1], channels rounded half-up.
RgbPixel hsv_to_rgb(double theta_deg, double s, double v);

/// Inverse hue of an RGB triple in degrees, [0, 360); 0 for grays.
double rgb_hue(RgbPixel p);

struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// Each image cell becomes a cell x cell block. Pad pixels are black.
Raster rasterize(const SemImage& img, std::size_t cell);

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Raster& r);
/// 8-bit RGB PNG, one IDAT chunk.
std::string encode_png(const Raster& r);

std::string render_image(const SemImage& img, std::size_t cell);

/// Picks PPM or PNG from the extension (.png for PNG, anything else PPM).
void write_raster(const std::filesystem::path& path, const Raster& r);

}  // namespace semimage
