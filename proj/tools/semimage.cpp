// semimage: synth / build / train / eval / ablate / render.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semimage/config.hpp"
#include "semimage/corpus.hpp"
#include "semimage/embeddings.hpp"
#include "semimage/error.hpp"
#include "semimage/image.hpp"
#include "semimage/model.hpp"
#include "semimage/render.hpp"
#include "semimage/rng.hpp"
#include "semimage/threads.hpp"
#include "semimage/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace semimage;

namespace {

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

/// Written before work starts and rewritten with the finish time.
class Manifest {
public:
    Manifest(fs::path path, std::string command, const std::vector<std::string>& argv) : path_(std::move(path)) {
        j_["command"] = std::move(command);
        j_["argv"] = argv;
        j_["git_describe"] = SEMIMAGE_GIT_DESCRIBE;
        j_["threads"] = thread_count();
        j_["started_at"] = now_utc();
        j_["finished_at"] = nullptr;
        j_["outputs"] = json::array();
    }
    json& operator[](const char* key) { return j_[key]; }
    void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
    void save() const { write_text(path_, j_.dump(2) + "\n"); }
    void finish() {
        j_["finished_at"] = now_utc();
        save();
    }

private:
    fs::path path_;
    json j_;
};

std::string safe_name(const std::string& id) {
    std::string out;
    for (const char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
    return out.empty() ? "doc" : out;
}

// --- synth --------------------------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string out;
    double test_fraction = 0.2;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
    const auto spec = a.spec.empty() ? CorpusSpec{} : load_corpus_spec(a.spec);
    spec.validate();
    if (a.test_fraction < 0.0 || a.test_fraction >= 1.0) throw UsageError("--test-fraction must be in [0, 1)");
    const fs::path out(a.out);
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    make_dir(dir);
    const auto stem = out.stem().string();
    Manifest manifest(dir / (stem + ".manifest.json"), "synth", argv);
    manifest["spec"] = to_toml(spec);
    manifest["seed"] = spec.seed;
    manifest["test_fraction"] = a.test_fraction;
    manifest.save();

    const auto corpus = generate_synthetic(spec);
    const fs::path vec = dir / (stem + ".vec");
    EmbeddingTable::save(vec, corpus.vectors);
    manifest.output(vec);
    if (a.test_fraction > 0.0) {
        const auto split = stratified_split(corpus.docs, a.test_fraction, mix_seed(spec.seed, 99));
        const fs::path test = dir / (stem + ".test.jsonl");
        write_jsonl(out, split.kept);
        write_jsonl(test, split.holdout);
        manifest.output(out);
        manifest.output(test);
        std::cout << "wrote " << split.kept.size() << " train and " << split.holdout.size() << " test documents\n";
    } else {
        write_jsonl(out, corpus.docs);
        manifest.output(out);
        std::cout << "wrote " << corpus.docs.size() << " documents\n";
    }
    manifest.finish();
    return 0;
}

// --- build --------------------------------------------------------------------------------------

struct BuildArgs {
    std::string corpus;
    std::string ckpt;
    std::string vectors;
    std::string vocab;
    std::string sentence_vectors;
    std::string out;
    std::size_t sentence_len = 40;
    std::size_t max_sentences = 40;
    bool no_boundaries = false;
};

bool starts_with_file(const fs::path& p, std::string_view magic) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::string head(magic.size(), '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    return head == magic;
}

int cmd_build(const BuildArgs& a, const std::vector<std::string>& argv) {
    const fs::path out(a.out);
    make_dir(out);
    Manifest manifest(out / "manifest.json", "build", argv);
    manifest.save();

    const fs::path ckpt(a.ckpt);
    MapperParams<float> mapper;
    ImageMode mode{PixelSpace::hsv, !a.no_boundaries};
    GridShape grid{a.sentence_len, a.max_sentences};
    if (starts_with_file(ckpt, "SEMI-MODEL")) {
        auto model = load_model(ckpt);
        mapper = model.mapper;
        mode = model.config.image_mode();
        grid = model.config.grid;
    } else {
        mapper = load_mapper(ckpt);
        mode.space = mapper.space;
    }
    const auto raws = read_jsonl(a.corpus);
    Vocabulary vocab;
    if (!a.vocab.empty())
        vocab = Vocabulary::load(a.vocab);
    else if (fs::exists(ckpt.parent_path() / "vocab.tsv"))
        vocab = Vocabulary::load(ckpt.parent_path() / "vocab.tsv");
    else
        vocab = build_vocabulary(raws);
    // Labels are not needed for images; keep whatever the corpus says.
    const auto docs = encode_documents(raws, vocab, build_topic_labels(raws), build_sentiment_labels(raws), grid);
    const auto table = EmbeddingTable::load(a.vectors, vocab);
    if (table.dim() != mapper.d)
        throw DataError("vectors have dimension " + std::to_string(table.dim()) + " but the checkpoint expects " +
                        std::to_string(mapper.d));
    const auto encoder = a.sentence_vectors.empty() ? SentenceEncoder::mean_pool()
                                                    : SentenceEncoder::load_precomputed(a.sentence_vectors);
    for (const auto& doc : docs) {
        const auto img = assemble<float>(doc, mapper, table, encoder, mode);
        const auto path = out / (safe_name(doc.doc_id) + ".semi");
        save_semi(path, img);
        manifest.output(path);
    }
    std::cout << "wrote " << docs.size() << " images to " << out.string() << "\n";
    manifest.finish();
    return 0;
}

// --- train / eval / ablate -------------------------------------------------------------------

struct TrainOverrides {
    std::optional<double> lambda1, lambda2, lr, val_fraction;
    std::optional<std::size_t> max_epochs, patience, batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> ablation, aux_pool, main_task;
    bool detach_main = false;

    void add_to(CLI::App* app) {
        app->add_option("--lambda1", lambda1, "Topic aux loss weight");
        app->add_option("--lambda2", lambda2, "Sentiment aux loss weight");
        app->add_option("--lr", lr, "Adam learning rate");
        app->add_option("--max-epochs,--max_epochs", max_epochs, "Epoch limit");
        app->add_option("--early-stop-patience,--early_stop_patience", patience, "Epochs without improvement");
        app->add_option("--batch-size,--batch_size", batch_size, "Mini-batch size");
        app->add_option("--seed", seed, "Initialization and shuffling seed");
        app->add_option("--ablation", ablation, "full | no_boundary | no_aux | rgb");
        app->add_option("--aux-pool,--aux_pool", aux_pool, "mean | max (saturation pooling)");
        app->add_option("--main-task,--main_task", main_task, "topic | sentiment | joint");
        app->add_option("--val-fraction,--val_fraction", val_fraction, "Validation share of the training file");
        app->add_flag("--detach-main,--detach_main", detach_main, "Debug: drop the main-loss gradient");
    }

    void apply(TrainConfig& t) const {
        if (lambda1) t.lambda1 = *lambda1;
        if (lambda2) t.lambda2 = *lambda2;
        if (lr) t.lr = *lr;
        if (val_fraction) t.val_fraction = *val_fraction;
        if (max_epochs) t.max_epochs = *max_epochs;
        if (patience) t.early_stop_patience = *patience;
        if (batch_size) t.batch_size = *batch_size;
        if (seed) t.seed = *seed;
        if (ablation) t.ablation = parse_ablation(*ablation);
        if (aux_pool) t.aux_pool = parse_aux_pool(*aux_pool);
        if (main_task) t.main_task = parse_main_task(*main_task);
        if (detach_main) t.detach_main = true;
        t.validate();
    }
};

struct TrainArgs {
    std::string config;
    std::string out;
    TrainOverrides overrides;
};

fs::path default_out(const std::string& config, const char* suffix) {
    return fs::path("runs") / (fs::path(config).stem().string() + suffix);
}

void print_epoch(const EpochRecord& r) {
    std::fprintf(stderr, "epoch %zu  train %.4f  val %.4f", r.epoch, r.train.total, r.val.total);
    if (r.val_metrics.exact_match) std::fprintf(stderr, "  val_exact %.4f", *r.val_metrics.exact_match);
    std::fprintf(stderr, "\n");
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
    auto cfg = load_run_config(a.config);
    a.overrides.apply(cfg.train);
    const fs::path out = a.out.empty() ? default_out(a.config, ".run") : fs::path(a.out);
    make_dir(out);
    Manifest manifest(out / "manifest.json", "train", argv);
    manifest["config"] = to_toml(cfg);
    manifest["seed"] = cfg.train.seed;
    manifest.save();
    write_text(out / "config.toml", to_toml(cfg));
    manifest.output(out / "config.toml");

    const auto data = load_experiment(cfg.data, cfg.grid, cfg.train.val_fraction, cfg.split_seed);
    data.vocab.save(out / "vocab.tsv");
    data.topics.save(out / "topics.tsv");
    data.sentiments.save(out / "sentiments.tsv");
    const auto run = run_experiment(data, cfg.train, cfg.model, print_epoch);
    save_model(out / "model.bin", run.train.model);
    write_history_csv(out / "history.csv", run.train.history);

    json metrics;
    metrics["best_epoch"] = run.train.best_epoch;
    metrics["best_val_loss"] = run.train.best_val_loss;
    metrics["val"] = to_json(run.train.history.at(run.train.best_epoch - 1).val_metrics);
    if (!data.test.empty()) metrics["test"] = to_json(run.test);
    write_text(out / "metrics.json", metrics.dump(2) + "\n");
    for (const char* f : {"vocab.tsv", "topics.tsv", "sentiments.tsv", "model.bin", "history.csv", "metrics.json"})
        manifest.output(out / f);
    std::cout << metrics.dump(2) << "\n";
    manifest.finish();
    return 0;
}

struct EvalArgs {
    std::string ckpt;
    std::string corpus;
    std::string vectors;
    std::string out;
    std::string sentence_vectors;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
    const fs::path ckpt(a.ckpt);
    const fs::path run_dir = ckpt.has_parent_path() ? ckpt.parent_path() : fs::path(".");
    std::optional<Manifest> manifest;
    if (!a.out.empty()) {
        make_dir(a.out);
        manifest.emplace(fs::path(a.out) / "manifest.json", "eval", argv);
        manifest->save();
    }
    const auto model = load_model(ckpt);
    const auto vocab = Vocabulary::load(run_dir / "vocab.tsv");
    const auto topics = LabelMap::load(run_dir / "topics.tsv");
    const auto sentiments = LabelMap::load(run_dir / "sentiments.tsv");
    fs::path vectors = a.vectors;
    std::optional<RunConfig> cfg;
    if (fs::exists(run_dir / "config.toml")) cfg = load_run_config(run_dir / "config.toml");
    if (vectors.empty()) {
        if (!cfg) throw UsageError("--vectors is required when the checkpoint has no config.toml beside it");
        vectors = cfg->data.vectors;
    }
    fs::path sentence_vectors = a.sentence_vectors;
    if (sentence_vectors.empty() && cfg) sentence_vectors = cfg->data.sentence_vectors;

    const auto docs = load_jsonl(a.corpus, vocab, topics, sentiments, model.config.grid);
    const auto table = EmbeddingTable::load(vectors, vocab);
    const auto encoder = sentence_vectors.empty() ? SentenceEncoder::mean_pool()
                                                  : SentenceEncoder::load_precomputed(sentence_vectors);
    const auto examples = make_examples(docs, table, encoder, model.config);
    LossWeights weights;
    if (cfg) weights = cfg->train.loss_weights();
    const auto metrics = to_json(evaluate(model, examples, table, weights));
    std::cout << metrics.dump(2) << "\n";
    if (manifest) {
        const auto path = fs::path(a.out) / "metrics.json";
        write_text(path, metrics.dump(2) + "\n");
        manifest->output(path);
        manifest->finish();
    }
    return 0;
}

struct AblateArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> seeds;
    TrainOverrides overrides;
};

int cmd_ablate(const AblateArgs& a, const std::vector<std::string>& argv) {
    auto cfg = load_run_config(a.config);
    a.overrides.apply(cfg.train);
    if (a.seeds) {
        if (*a.seeds == 0) throw UsageError("--seeds must be >= 1");
        cfg.ablation_seeds.clear();
        for (std::uint64_t s = 1; s <= *a.seeds; ++s) cfg.ablation_seeds.push_back(s);
    }
    const fs::path out = a.out.empty() ? default_out(a.config, ".ablation") : fs::path(a.out);
    make_dir(out);
    Manifest manifest(out / "manifest.json", "ablate", argv);
    manifest["config"] = to_toml(cfg);
    manifest["seeds"] = cfg.ablation_seeds;
    manifest.save();
    write_text(out / "config.toml", to_toml(cfg));

    const auto data = load_experiment(cfg.data, cfg.grid, cfg.train.val_fraction, cfg.split_seed);
    json runs = json::array();
    const auto report =
        run_ablation_suite(data, cfg.train, cfg.model, cfg.ablation_seeds,
                           [&](Ablation ab, std::uint64_t seed, const RunResult& r) {
                               std::fprintf(stderr, "%s seed %llu: exact %.4f\n", to_string(ab).c_str(),
                                            static_cast<unsigned long long>(seed), *r.test.exact_match);
                               json row;
                               row["ablation"] = to_string(ab);
                               row["seed"] = seed;
                               row["best_epoch"] = r.train.best_epoch;
                               row["test"] = to_json(r.test);
                               runs.push_back(row);
                               write_history_csv(out / ("history_" + to_string(ab) + "_seed" +
                                                        std::to_string(seed) + ".csv"),
                                                 r.train.history);
                           });
    const auto md = report.to_markdown();
    write_text(out / "ablation.md", md);
    write_text(out / "ablation.json", runs.dump(2) + "\n");
    manifest.output(out / "config.toml");
    manifest.output(out / "ablation.md");
    manifest.output(out / "ablation.json");
    std::cout << md;
    manifest.finish();
    return 0;
}

// --- render -------------------------------------------------------------------------------------

struct RenderArgs {
    std::string in;
    std::string out;
    std::size_t cell = 8;
    std::string format = "ppm";
};

int cmd_render(const RenderArgs& a) {
    if (a.cell == 0) throw UsageError("--cell must be >= 1");
    if (a.format != "ppm" && a.format != "png") throw UsageError("--format must be ppm or png");
    const fs::path in(a.in);
    if (!fs::is_directory(in)) {
        write_raster(a.out, rasterize(load_semi(in), a.cell));
        return 0;
    }
    const fs::path out(a.out);
    make_dir(out);
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".semi") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    for (const auto& p : inputs) {
        const auto target = out / (p.stem().string() + "." + a.format);
        write_raster(target, rasterize(load_semi(p), a.cell));
    }
    std::cout << "rendered " << inputs.size() << " images to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SemImage: text documents as semantic images"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(SEMIMAGE_GIT_DESCRIBE));

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a seeded synthetic topic x sentiment corpus");
    s->add_option("--spec", synth.spec, "Corpus spec (TOML); defaults when omitted")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output corpus (.jsonl); .vec and .test.jsonl are written beside it")
        ->required();
    s->add_option("--test-fraction,--test_fraction", synth.test_fraction, "Stratified test share");

    BuildArgs build;
    auto* b = app.add_subcommand("build", "Assemble semantic images and dump them as .semi tensors");
    b->add_option("--corpus", build.corpus, "Corpus (.jsonl)")->required()->check(CLI::ExistingFile);
    b->add_option("--ckpt", build.ckpt, "Model or pixel-mapper checkpoint")->required()->check(CLI::ExistingFile);
    b->add_option("--vectors", build.vectors, "Word vectors")->required()->check(CLI::ExistingFile);
    b->add_option("--vocab", build.vocab, "Vocabulary (defaults to vocab.tsv beside the checkpoint)");
    b->add_option("--sentence-vectors", build.sentence_vectors, "Precomputed sentence vectors (.jsonl)");
    b->add_option("--out", build.out, "Output directory")->required();
    b->add_option("--sentence-len", build.sentence_len, "Words per row (mapper checkpoints only)");
    b->add_option("--max-sentences", build.max_sentences, "Sentence cap (mapper checkpoints only)");
    b->add_flag("--no-boundaries", build.no_boundaries, "Omit boundary rows (mapper checkpoints only)");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train one model from a run config");
    t->add_option("--config", train.config, "Run config (TOML)")->required()->check(CLI::ExistingFile);
    t->add_option("--out", train.out, "Run directory (default runs/<config>.run)");
    train.overrides.add_to(t);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
    e->add_option("--ckpt", eval.ckpt, "model.bin inside a run directory")->required()->check(CLI::ExistingFile);
    e->add_option("--corpus", eval.corpus, "Labeled corpus (.jsonl)")->required()->check(CLI::ExistingFile);
    e->add_option("--vectors", eval.vectors, "Word vectors (default: the run's)");
    e->add_option("--sentence-vectors", eval.sentence_vectors, "Precomputed sentence vectors (.jsonl)");
    e->add_option("--out", eval.out, "Write metrics.json and a manifest here");

    AblateArgs ablate;
    auto* ab = app.add_subcommand("ablate", "Train every ablation over several seeds");
    ab->add_option("--config", ablate.config, "Run config (TOML)")->required()->check(CLI::ExistingFile);
    ab->add_option("--seeds", ablate.seeds, "Use seeds 1..k");
    ab->add_option("--out", ablate.out, "Output directory (default runs/<config>.ablation)");
    ablate.overrides.add_to(ab);

    RenderArgs render;
    auto* r = app.add_subcommand("render", "Render .semi dumps as PPM (or PNG) images");
    r->add_option("--in", render.in, ".semi file or a directory of them")->required()->check(CLI::ExistingPath);
    r->add_option("--out", render.out, "Output image, or directory in batch mode")->required();
    r->add_option("--cell", render.cell, "Pixels per image cell");
    r->add_option("--format", render.format, "ppm | png (batch mode)");

    // Unknown flags are reported before missing required options, so the
    // message names the offending flag.
    std::vector<std::pair<CLI::App*, CLI::Option*>> required;
    for (auto* sub : app.get_subcommands({})) {
        sub->allow_extras();
        for (auto* opt : sub->get_options()) {
            if (!opt->get_required()) continue;
            opt->required(false);
            opt->description(opt->get_description() + " [required]");
            required.emplace_back(sub, opt);
        }
    }

    try {
        app.parse(argc, argv);
        for (auto* sub : app.get_subcommands()) {
            if (!sub->remaining().empty()) throw CLI::ExtrasError(sub->remaining());
        }
        for (auto [sub, opt] : required) {
            if (sub->parsed() && opt->count() == 0) throw CLI::RequiredError(opt->get_name());
        }
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }

    const std::vector<std::string> args(argv, argv + argc);
    try {
        configure_threads();
        if (*s) return cmd_synth(synth, args);
        if (*b) return cmd_build(build, args);
        if (*t) return cmd_train(train, args);
        if (*e) return cmd_eval(eval, args);
        if (*ab) return cmd_ablate(ablate, args);
        if (*r) return cmd_render(render);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 1;
}
