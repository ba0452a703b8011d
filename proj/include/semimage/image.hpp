#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "semimage/colormapper.hpp"
#include "semimage/corpus.hpp"
#include "semimage/embeddings.hpp"

namespace semimage {

enum class RowKind : std::uint8_t { sentence = 0, boundary = 1 };

struct RowTag {
    RowKind kind = RowKind::sentence;
    std::uint32_t index = 0;  // sentence i, or boundary between sentences i and i+1

    bool operator==(const RowTag&) const = default;
};

struct ImageMode {
    PixelSpace space = PixelSpace::hsv;
    bool boundaries = true;
};

enum class AuxPool { mean, max };

/// height x width x channels, row-major, channels innermost.
struct SemImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> data;
    std::vector<RowTag> rows;
    std::vector<std::uint8_t> pad_mask;  // height x width, 1 on pad pixels

    SemImage() = default;
    SemImage(std::size_t h, std::size_t w, std::size_t c)
        : height(h), width(w), channels(c), data(h * w * c, 0.0f), rows(h), pad_mask(h * w, 0) {}

    PixelSpace space() const { return channels == 4 ? PixelSpace::hsv : PixelSpace::rgb; }
    float& at(std::size_t r, std::size_t c, std::size_t ch) { return data[(r * width + c) * channels + ch]; }
    float at(std::size_t r, std::size_t c, std::size_t ch) const { return data[(r * width + c) * channels + ch]; }
    bool is_pad(std::size_t r, std::size_t c) const { return pad_mask[r * width + c] != 0; }
    bool is_word(std::size_t r, std::size_t c) const { return rows[r].kind == RowKind::sentence && !is_pad(r, c); }

    bool operator==(const SemImage&) const = default;
};

struct PooledFeatures {
    double hbar_cos = 0.0;
    double hbar_sin = 0.0;
    double s_avg = 0.0;
};

/// clamp(1 - cosine_sim(s_i, s_j), 0, 1).
double boundary_intensity(std::span<const double> s_i, std::span<const double> s_j);

/// intensity * v_max with v_max = (0, 0, 0, 1).
Pixel boundary_pixel(std::span<const double> s_i, std::span<const double> s_j);

/// Parameter-free layout of a document's image: where every word pixel sits
/// and the (fixed) intensity of every boundary row.
struct ImagePlan {
    struct WordCell {
        std::uint32_t row = 0;
        std::uint32_t col = 0;
        TokenId token = kUnkId;
    };
    struct BoundaryRow {
        std::uint32_t row = 0;
        double intensity = 0.0;
    };

    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<RowTag> rows;
    std::vector<WordCell> words;
    std::vector<BoundaryRow> boundaries;
};

ImagePlan plan_image(const Document& doc, const EmbeddingTable& table, const SentenceEncoder& encoder,
                     bool boundaries);

/// Writes the boundary rows and pad mask of plan into img (word pixels untouched).
void paint_layout(const ImagePlan& plan, SemImage& img);

template <typename T>
SemImage assemble(const Document& doc, const MapperParams<T>& params, const EmbeddingTable& table,
                  const SentenceEncoder& encoder, ImageMode mode);

/// Means (or max, for s_avg) of h_cos, h_sin, sat over word pixels only.
PooledFeatures pooled_features(const SemImage& img, AuxPool pool = AuxPool::mean);

/// Tensor dump: "SEMI", version byte 1, u32 height/width/channels (LE),
/// row-major float32 data, then one row-kind byte per row and one pad byte
/// per pixel.
void write_semi(std::ostream& out, const SemImage& img);
SemImage read_semi(std::istream& in);
void save_semi(const std::filesystem::path& path, const SemImage& img);
SemImage load_semi(const std::filesystem::path& path);

}  // namespace semimage
