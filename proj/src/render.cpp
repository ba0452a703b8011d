#include "semimage/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include <zlib.h>

#include "semimage/error.hpp"

namespace semimage {

double hue_angle(double h_cos, double h_sin) {
    if (h_cos == 0.0 && h_sin == 0.0) return 0.0;
    double deg = std::atan2(h_sin, h_cos) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

namespace {

std::uint8_t to_byte(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(x * 255.0 + 0.5));
}

}  // namespace

RgbPixel hsv_to_rgb(double theta_deg, double s, double v) {
    s = std::clamp(s, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    double h = std::fmod(theta_deg, 360.0);
    if (h < 0.0) h += 360.0;
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    const double m = v - c;
    return {to_byte(r + m), to_byte(g + m), to_byte(b + m)};
}

double rgb_hue(RgbPixel p) {
    const double r = p.r / 255.0, g = p.g / 255.0, b = p.b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    if (d == 0.0) return 0.0;
    double h;
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / d + 2.0);
    else
        h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0.0) h += 360.0;
    return h;
}

Raster rasterize(const SemImage& img, std::size_t cell) {
    if (cell == 0) throw UsageError("--cell must be >= 1");
    Raster out;
    out.width = img.width * cell;
    out.height = img.height * cell;
    out.rgb.assign(out.width * out.height * 3, 0);
    const bool hsv = img.space() == PixelSpace::hsv;
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            RgbPixel px;
            if (!img.is_pad(r, c)) {
                if (hsv) {
                    px = hsv_to_rgb(hue_angle(img.at(r, c, channel::h_cos), img.at(r, c, channel::h_sin)),
                                    img.at(r, c, channel::sat), img.at(r, c, channel::val));
                } else {
                    px = {to_byte(img.at(r, c, 0)), to_byte(img.at(r, c, 1)), to_byte(img.at(r, c, 2))};
                }
            }
            for (std::size_t dy = 0; dy < cell; ++dy) {
                auto* row = &out.rgb[((r * cell + dy) * out.width + c * cell) * 3];
                for (std::size_t dx = 0; dx < cell; ++dx) {
                    row[3 * dx] = px.r;
                    row[3 * dx + 1] = px.g;
                    row[3 * dx + 2] = px.b;
                }
            }
        }
    }
    return out;
}

std::string encode_ppm(const Raster& r) {
    std::string out = "P6\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(r.rgb.data()), r.rgb.size());
    return out;
}

namespace {

void put_u32_be(std::string& s, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    put_u32_be(out, static_cast<std::uint32_t>(
                        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace

std::string encode_png(const Raster& r) {
    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(r.width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(r.height));
    ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit, truecolor
    put_chunk(out, "IHDR", ihdr);

    std::string raw;
    raw.reserve(r.height * (1 + 3 * r.width));
    for (std::size_t y = 0; y < r.height; ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(&r.rgb[y * r.width * 3]), r.width * 3);
    }
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    std::string z(len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw DataError("png: deflate failed");
    z.resize(len);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", "");
    return out;
}

std::string render_image(const SemImage& img, std::size_t cell) { return encode_ppm(rasterize(img, cell)); }

void write_raster(const std::filesystem::path& path, const Raster& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const auto bytes = path.extension() == ".png" ? encode_png(r) : encode_ppm(r);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace semimage
