#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "semimage/error.hpp"

namespace semimage::io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename T>
void write_f32(std::ostream& out, std::span<const T> values) {
    for (const T v : values) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

template <typename T>
void read_f32(std::istream& in, std::span<T> values) {
    for (auto& v : values) v = static_cast<T>(std::bit_cast<float>(read_u32(in)));
}

inline std::string read_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("unexpected end of file while reading a header");
    return line;
}

/// Splits "MAGIC v1 a=1 b=2" into its magic/version words and key=value fields.
struct HeaderLine {
    std::vector<std::string> words;
    std::map<std::string, std::string> fields;

    static HeaderLine parse(const std::string& line) {
        HeaderLine h;
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                h.words.push_back(tok);
            } else {
                h.fields[tok.substr(0, eq)] = tok.substr(eq + 1);
            }
        }
        return h;
    }

    const std::string& at(const std::string& key) const {
        const auto it = fields.find(key);
        if (it == fields.end()) throw DataError("header is missing field '" + key + "'");
        return it->second;
    }

    std::size_t count(const std::string& key) const { return std::stoul(at(key)); }
};

}  // namespace semimage::io
