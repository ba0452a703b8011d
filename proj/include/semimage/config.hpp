#pragma once

// Run configuration files: a small TOML subset (tables, key = value with
// strings, integers, floats, booleans and one-line arrays, # comments).

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "semimage/corpus.hpp"
#include "semimage/model.hpp"
#include "semimage/train.hpp"

namespace semimage {

namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<std::string, std::int64_t, double, bool, Array> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(v); }
    bool is_float() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_array() const { return std::holds_alternative<Array>(v); }
};

/// table name ("" for the root) -> key -> value, keys in file order not kept.
using Document = std::map<std::string, std::map<std::string, Value>>;

/// Throws UsageError with "<origin>:<line>: ..." on malformed input.
Document parse(std::string_view text, const std::string& origin = "<string>");
Document parse_file(const std::filesystem::path& path);

}  // namespace toml

struct RunConfig {
    DataSources data;
    GridShape grid;
    std::uint64_t split_seed = 1;
    ModelConfig model;
    TrainConfig train;
    std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
};

/// Unknown tables or keys and wrongly typed values are UsageErrors. Relative
/// data paths are resolved against base_dir.
RunConfig run_config_from(const toml::Document& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
/// Round-trips through load_run_config; paths are written as given.
std::string to_toml(const RunConfig& cfg);

/// Keys may sit at the root or under [corpus].
CorpusSpec corpus_spec_from(const toml::Document& doc);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);
std::string to_toml(const CorpusSpec& spec);

}  // namespace semimage
