#include "semimage/colormapper.hpp"

#include <fstream>

#include "semimage/binary_io.hpp"

namespace semimage {

void write_mapper(std::ostream& out, const MapperParams<float>& p) {
    out << (p.space == PixelSpace::hsv ? "SEMI-CM" : "SEMI-RGB") << " v1 d=" << p.d << " h=" << p.h << '\n';
    for (const auto t : p.tensors()) io::write_f32(out, t);
}

MapperParams<float> read_mapper(std::istream& in) {
    const auto header = io::HeaderLine::parse(io::read_line(in));
    if (header.words.size() != 2 || header.words[1] != "v1" ||
        (header.words[0] != "SEMI-CM" && header.words[0] != "SEMI-RGB"))
        throw DataError("not a color mapper checkpoint");
    const auto space = header.words[0] == "SEMI-CM" ? PixelSpace::hsv : PixelSpace::rgb;
    auto p = MapperParams<float>::zeros(space, header.count("d"), header.count("h"));
    for (auto t : p.tensors()) io::read_f32(in, t);
    return p;
}

void save_mapper(const std::filesystem::path& path, const MapperParams<float>& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_mapper(out, p);
}

MapperParams<float> load_mapper(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return read_mapper(in);
}

}  // namespace semimage
