#include "semimage/image.hpp"

#include <algorithm>
#include <fstream>

#include "semimage/binary_io.hpp"
#include "semimage/error.hpp"

namespace semimage {

double boundary_intensity(std::span<const double> s_i, std::span<const double> s_j) {
    return std::clamp(1.0 - cosine_sim(s_i, s_j), 0.0, 1.0);
}

Pixel boundary_pixel(std::span<const double> s_i, std::span<const double> s_j) {
    return Pixel{0.0, 0.0, 0.0, boundary_intensity(s_i, s_j)};
}

ImagePlan plan_image(const Document& doc, const EmbeddingTable& table, const SentenceEncoder& encoder,
                     bool boundaries) {
    const auto n = doc.sentences.size();
    if (n == 0) throw DataError("document '" + doc.doc_id + "' has no sentences");
    ImagePlan plan;
    plan.width = doc.sentences.front().tokens.size();
    plan.height = boundaries ? 2 * n - 1 : n;
    plan.rows.resize(plan.height);

    std::vector<std::vector<double>> sentence_vecs;
    if (boundaries) {
        for (std::size_t i = 0; i < n; ++i)
            sentence_vecs.push_back(encoder.encode(table, doc.sentences[i], doc.doc_id, i));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = doc.sentences[i];
        if (s.tokens.size() != plan.width)
            throw DataError("document '" + doc.doc_id + "' has ragged sentence rows");
        const auto row = static_cast<std::uint32_t>(boundaries ? 2 * i : i);
        plan.rows[row] = {RowKind::sentence, static_cast<std::uint32_t>(i)};
        for (std::size_t c = 0; c < s.tokens.size(); ++c) {
            if (!s.tokens[c].is_pad) plan.words.push_back({row, static_cast<std::uint32_t>(c), s.tokens[c].id});
        }
        if (boundaries && i + 1 < n) {
            plan.rows[row + 1] = {RowKind::boundary, static_cast<std::uint32_t>(i)};
            plan.boundaries.push_back({row + 1, boundary_intensity(sentence_vecs[i], sentence_vecs[i + 1])});
        }
    }
    return plan;
}

void paint_layout(const ImagePlan& plan, SemImage& img) {
    img.rows = plan.rows;
    // Pad everywhere on sentence rows, then clear the word cells.
    for (std::size_t r = 0; r < plan.height; ++r) {
        const std::uint8_t pad = plan.rows[r].kind == RowKind::sentence ? 1 : 0;
        std::fill_n(img.pad_mask.begin() + static_cast<std::ptrdiff_t>(r * plan.width), plan.width, pad);
    }
    for (const auto& w : plan.words) img.pad_mask[w.row * plan.width + w.col] = 0;
    for (const auto& b : plan.boundaries) {
        const auto v = static_cast<float>(b.intensity);
        for (std::size_t c = 0; c < plan.width; ++c) {
            if (img.space() == PixelSpace::hsv) {
                img.at(b.row, c, channel::val) = v;
            } else {
                // White in RGB is (1, 1, 1).
                for (std::size_t ch = 0; ch < 3; ++ch) img.at(b.row, c, ch) = v;
            }
        }
    }
}

template <typename T>
SemImage assemble(const Document& doc, const MapperParams<T>& params, const EmbeddingTable& table,
                  const SentenceEncoder& encoder, ImageMode mode) {
    if (mode.space != params.space) throw DataError("image mode and mapper pixel space disagree");
    if (params.d != table.dim()) throw DataError("mapper input dimension does not match the embedding table");
    const auto plan = plan_image(doc, table, encoder, mode.boundaries);
    SemImage img(plan.height, plan.width, params.channels());
    paint_layout(plan, img);
    for (const auto& w : plan.words) {
        const auto px = cm_forward(params, table.lookup(w.token));
        for (std::size_t ch = 0; ch < img.channels; ++ch) img.at(w.row, w.col, ch) = static_cast<float>(px[ch]);
    }
    return img;
}

template SemImage assemble<float>(const Document&, const MapperParams<float>&, const EmbeddingTable&,
                                  const SentenceEncoder&, ImageMode);
template SemImage assemble<double>(const Document&, const MapperParams<double>&, const EmbeddingTable&,
                                   const SentenceEncoder&, ImageMode);

PooledFeatures pooled_features(const SemImage& img, AuxPool pool) {
    if (img.space() != PixelSpace::hsv) throw DataError("pooled features are only defined for HSV images");
    double hc = 0.0;
    double hs = 0.0;
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            if (!img.is_word(r, c)) continue;
            hc += img.at(r, c, channel::h_cos);
            hs += img.at(r, c, channel::h_sin);
            const double sat = img.at(r, c, channel::sat);
            s = pool == AuxPool::mean ? s + sat : (count == 0 ? sat : std::max(s, sat));
            ++count;
        }
    }
    if (count == 0) return {};
    const auto n = static_cast<double>(count);
    return {hc / n, hs / n, pool == AuxPool::mean ? s / n : s};
}

// --- tensor dump ---------------------------------------------------------------------

void write_semi(std::ostream& out, const SemImage& img) {
    out.write("SEMI", 4);
    out.put(1);
    io::write_u32(out, static_cast<std::uint32_t>(img.height));
    io::write_u32(out, static_cast<std::uint32_t>(img.width));
    io::write_u32(out, static_cast<std::uint32_t>(img.channels));
    io::write_f32(out, std::span<const float>(img.data));
    for (const auto& r : img.rows) out.put(static_cast<char>(r.kind));
    out.write(reinterpret_cast<const char*>(img.pad_mask.data()), static_cast<std::streamsize>(img.pad_mask.size()));
}

SemImage read_semi(std::istream& in) {
    char magic[5] = {};
    if (!in.read(magic, 5) || std::string_view(magic, 4) != "SEMI") throw DataError("not a SEMI tensor dump");
    if (magic[4] != 1) throw DataError("unsupported SEMI version " + std::to_string(int(magic[4])));
    const auto h = io::read_u32(in);
    const auto w = io::read_u32(in);
    const auto c = io::read_u32(in);
    if (c != 3 && c != 4) throw DataError("SEMI dump has " + std::to_string(c) + " channels");
    SemImage img(h, w, c);
    io::read_f32(in, std::span<float>(img.data));
    std::uint32_t sentence = 0;
    std::uint32_t boundary = 0;
    for (auto& r : img.rows) {
        const int kind = in.get();
        if (kind != 0 && kind != 1) throw DataError("SEMI dump has a bad row kind");
        r.kind = static_cast<RowKind>(kind);
        r.index = r.kind == RowKind::sentence ? sentence++ : boundary++;
    }
    if (!in.read(reinterpret_cast<char*>(img.pad_mask.data()), static_cast<std::streamsize>(img.pad_mask.size())))
        throw DataError("SEMI dump is truncated");
    return img;
}

void save_semi(const std::filesystem::path& path, const SemImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_semi(out, img);
}

SemImage load_semi(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return read_semi(in);
}

}  // namespace semimage
