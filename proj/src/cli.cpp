#include "albumgan/cli.hpp"

#include <fmt/chrono.h>
#include <fmt/core.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <json.hpp>
#include <limits>
#include <optional>
#include <ostream>
#include <thread>

#include "albumgan/data.hpp"
#include "albumgan/fixture_server.hpp"
#include "albumgan/latent.hpp"
#include "albumgan/log.hpp"
#include "albumgan/metrics.hpp"
#include "albumgan/network.hpp"
#include "albumgan/playlist.hpp"
#include "albumgan/style_train.hpp"
#include "albumgan/train.hpp"

#ifndef ALBUMGAN_GIT_DESCRIBE
#define ALBUMGAN_GIT_DESCRIBE "unknown"
#endif

namespace albumgan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                    std::chrono::system_clock::now())));
}

json flags_of(const CLI::App& cmd) {
    json flags = json::object();
    for (const CLI::Option* opt : cmd.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help") continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            flags[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else {
            const std::string def = opt->get_default_str();
            flags[name] = def.empty() ? json(nullptr) : json(def);
        }
    }
    return flags;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// One manifest per output directory, written before any work and rewritten
// with the outputs when the command ends.
class Manifest {
   public:
    Manifest(fs::path dir, const CLI::App& cmd, std::optional<std::uint64_t> seed) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
        j_["command"] = cmd.get_name();
        j_["flags"] = flags_of(cmd);
        j_["seed"] = seed ? json(*seed) : json(nullptr);
        j_["started"] = utc_now();
        j_["finished"] = nullptr;
        j_["status"] = "running";
        j_["git_describe"] = ALBUMGAN_GIT_DESCRIBE;
        j_["outputs"] = json::array();
        write();
    }
    Manifest(const Manifest&) = delete;
    Manifest& operator=(const Manifest&) = delete;
    ~Manifest() {
        if (finished_) return;
        try {
            finish("failed");
        } catch (...) {
        }
    }

    void set(const std::string& key, json value) { j_[key] = std::move(value); }
    void output(const fs::path& p) {
        const fs::path rel = p.lexically_relative(dir_);
        j_["outputs"].push_back(rel.empty() || *rel.begin() == ".." ? p.generic_string() : rel.generic_string());
    }
    void finish(const std::string& status = "ok") {
        finished_ = true;
        j_["finished"] = utc_now();
        j_["status"] = status;
        write();
    }

   private:
    void write() const { write_text(dir_ / kManifestFile, j_.dump(2) + "\n"); }

    fs::path dir_;
    json j_;
    bool finished_ = false;
};

// The model named by a config file, if it has a model line.
std::optional<ModelKind> config_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = line.substr(0, line.find('#'));
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line.substr(0, eq)) != "model") continue;
        try {
            return parse_model_kind(trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("model", e.what());
        }
    }
    return std::nullopt;
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

float tau_of(const std::optional<double>& trunc) {
    if (!trunc) return std::numeric_limits<float>::infinity();
    if (!(*trunc > 0.0f)) throw UsageError(fmt::format("--trunc must be positive, got {}", *trunc));
    return static_cast<float>(*trunc);
}

StyleVector resolve_vector(const std::string& token, const StyleGenerator& g, float tau) {
    if (fs::is_regular_file(token)) return load_style_vector(token);
    if (!token.empty() && token.find_first_not_of("0123456789") == std::string::npos) {
        return map_latent(g, seed_latent(std::stoull(token), g.config().latent_dim, tau));
    }
    throw UsageError(fmt::format("'{}' is neither a style vector file nor a seed", token));
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::atomic<bool> g_stop{false};
extern "C" void on_stop_signal(int) { g_stop = true; }

struct Args {
    // dataset
    std::string source, dest;
    std::size_t width = 256, height = 256;
    // train
    std::string outdir, data, config, model;
    std::optional<std::uint64_t> seed;
    std::optional<int> gpus;
    std::optional<std::size_t> epochs, batch_size;
    std::vector<std::string> sets;
    // generate / latent
    std::string network, seeds, target, a, b;
    std::optional<double> trunc;
    std::size_t num_steps = kDefaultProjectionSteps;
    std::size_t divisions = 50;
    std::size_t k = 7;
    std::uint64_t latent_seed = 0;
    std::vector<std::string> sources;
    // fetch
    std::vector<std::string> playlists;
    std::string api_url = kDefaultApiUrl;
    std::size_t parallelism = 8;
    // fid
    std::string real, fake, run_dir;
    // serve-fixture / make-fixture
    std::string host = "127.0.0.1";
    int port = 8765;
    double duration = 0.0;
    std::uint64_t fixture_seed = 7;
    std::size_t count = 64, channels = 1;
    std::size_t fixture_width = 28, fixture_height = 28;
    std::string fixture_style = "strokes";
};

int cmd_dataset(const Args& a, const CLI::App& cmd, std::ostream& out) {
    if (a.width == 0 || a.height == 0) throw UsageError("--width and --height must be positive");
    Manifest m(a.dest, cmd, std::nullopt);
    const PrepareResult r = prepare_dataset(a.source, a.dest, a.width, a.height);
    for (const auto& f : sorted_files(a.dest, ".png")) m.output(f);
    m.output(fs::path(a.dest) / kDatasetMetadataFile);
    m.set("skipped", r.skipped);
    m.finish();
    out << fmt::format("{} images written to {} ({} skipped)\n", r.written, a.dest, r.skipped.size());
    return kExitOk;
}

TrainConfig train_config(const Args& a) {
    std::optional<std::string> text;
    if (!a.config.empty()) text = read_text(a.config);
    ModelKind model = ModelKind::style;
    if (!a.model.empty()) {
        try {
            model = parse_model_kind(a.model);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    } else if (text) {
        if (auto m = config_model(*text)) model = *m;
    }
    TrainConfig c = TrainConfig::defaults_for(model);
    if (text) c = parse_config(*text, c);
    c.model = model;
    if (a.seed) c.seed = *a.seed;
    if (a.epochs) c.epochs = *a.epochs;
    if (a.batch_size) c.batch_size = *a.batch_size;
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError(fmt::format("--set expects key=value, got '{}'", kv));
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
}

int cmd_train(const Args& a, const CLI::App& cmd, std::ostream& out) {
    if (a.gpus) logging::warn("--gpus {} ignored: training runs on the CPU", *a.gpus);
    const TrainConfig config = train_config(a);

    const ImageSet set = load_image_dir(a.data, config.channels);
    if (set.size() == 0) throw std::runtime_error(fmt::format("no images in {}", a.data));
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Image& im = set.images[i];
        if (im.width != config.width || im.height != config.height) {
            throw std::runtime_error(fmt::format("{} is {}x{} but the config expects {}x{}; set width/height or "
                                                 "resize with the dataset command",
                                                 set.ids[i], im.width, im.height, config.width, config.height));
        }
    }
    std::optional<ChannelStats> computed;
    if (config.normalize_mode == NormalizeMode::computed_stats) computed = channel_stats(set.images);
    std::vector<std::size_t> idx(set.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor dataset = to_batch(set.images, idx, stats_for(config.normalize_mode, config.channels, computed));

    const fs::path outdir = a.outdir;
    Manifest m(outdir, cmd, config.seed);
    m.set("model", to_string(config.model));
    m.set("images", set.size());
    const auto t0 = std::chrono::steady_clock::now();
    const TrainOutputs result = config.model == ModelKind::style ? train_style_gan(config, dataset, outdir)
                                                                 : train_conv_gan(config, dataset, outdir);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const auto divergence = detect_divergence(result.history);
    json stats{{"model", to_string(config.model)},
               {"iterations", result.history.size()},
               {"reals_shown", result.reals_shown},
               {"kimg", static_cast<double>(result.reals_shown) / 1000.0},
               {"wall_clock_s", seconds},
               {"final_g_loss", result.history.records().back().g_loss},
               {"final_d_loss", result.history.records().back().d_loss},
               {"collapse_score", result.collapse_score},
               {"divergence_iter", divergence ? json(*divergence) : json(nullptr)}};
    write_text(outdir / kRunStatsFile, stats.dump(2) + "\n");

    m.output(outdir / kLossCsv);
    m.output(outdir / kNetworkFile);
    m.output(config_path_for(outdir / kNetworkFile));
    for (const auto& c : result.checkpoints) {
        m.output(c);
        m.output(config_path_for(c));
    }
    for (const auto& g : result.grids) m.output(g);
    m.output(outdir / kRunStatsFile);
    m.finish();
    if (divergence) logging::warn("generator loss diverged around iteration {}", *divergence);
    out << fmt::format("trained {} for {} epochs ({} iterations, {:.1f} s); collapse score {:.4f}\n",
                       to_string(config.model), config.epochs, result.history.size(), seconds, result.collapse_score);
    return kExitOk;
}

int cmd_generate(const Args& a, const CLI::App& cmd, std::ostream& out) {
    const float tau = tau_of(a.trunc);
    std::vector<std::uint64_t> seeds;
    try {
        seeds = parse_seeds(a.seeds);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Network net = Network::load(a.network);
    Manifest m(a.outdir, cmd, std::nullopt);
    m.set("tau", a.trunc ? json(*a.trunc) : json(nullptr));
    m.set("seeds", seeds);
    m.set("model", to_string(net.model()));
    for (const auto seed : seeds) {
        const auto z = seed_latent(seed, net.latent_dim(), tau);
        const Image image = net.generate(Tensor::from({1, z.size()}, z)).front();
        const fs::path path = fs::path(a.outdir) / fmt::format("seed{:04d}.png", seed);
        write_png(path, image);
        m.output(path);
    }
    m.finish();
    out << fmt::format("{} images written to {}\n", seeds.size(), a.outdir);
    return kExitOk;
}

int cmd_project(const Args& a, const CLI::App& cmd, std::ostream& out) {
    if (a.num_steps == 0) throw UsageError("--num-steps must be positive");
    const Network net = Network::load(a.network);
    const StyleGenerator& g = net.style_generator();
    const Tensor goal = projection_target(read_image(a.target), g.config());

    const fs::path outdir = a.outdir;
    Manifest m(outdir, cmd, a.latent_seed);
    m.set("num_steps", a.num_steps);
    ProjectOptions options;
    options.steps = a.num_steps;
    options.seed = a.latent_seed;
    const ProjectionRun run = project(goal, g, options);

    save_style_vector(outdir / "projected_w.ckpt", run.w);
    write_png(outdir / "target.png", render_batch(goal, OutputRange::symmetric).front());
    write_png(outdir / "proj.png", render(g, run.w));
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < run.loss_trace.size(); ++i) csv += fmt::format("{},{}\n", i, run.loss_trace[i]);
    write_text(outdir / "projection_loss.csv", csv);
    for (const char* name : {"projected_w.ckpt", "target.png", "proj.png", "projection_loss.csv"}) m.output(outdir / name);
    m.set("initial_loss", run.loss_trace.front());
    m.set("final_loss", run.loss_trace.back());
    m.finish();
    out << fmt::format("projected {} in {} steps: loss {:.5f} -> {:.5f}\n", a.target, run.steps,
                       run.loss_trace.front(), run.loss_trace.back());
    return kExitOk;
}

int cmd_mix(const Args& a, const CLI::App& cmd, std::ostream& out) {
    const float tau = tau_of(a.trunc);
    const Network net = Network::load(a.network);
    const StyleGenerator& g = net.style_generator();
    if (a.k > g.config().num_styles()) {
        throw UsageError(fmt::format("--k {} exceeds the generator's {} styles", a.k, g.config().num_styles()));
    }
    std::vector<StyleVector> vectors;
    for (const auto& s : a.sources) vectors.push_back(resolve_vector(s, g, tau));

    const fs::path outdir = a.outdir;
    Manifest m(outdir, cmd, std::nullopt);
    m.set("k", a.k);
    const MixingGrid grid = mixing_grid(vectors, a.k, g, a.sources);
    write_mixing_grid(outdir / "mix.png", grid);
    m.output(outdir / "mix.png");
    m.output(outdir / "mix.json");
    m.finish();
    out << fmt::format("{}x{} mixing grid (k={}) written to {}\n", vectors.size(), vectors.size(), a.k,
                       (outdir / "mix.png").string());
    return kExitOk;
}

int cmd_interpolate(const Args& a, const CLI::App& cmd, std::ostream& out) {
    if (a.divisions == 0) throw UsageError("--divisions must be positive");
    const float tau = tau_of(a.trunc);
    const Network net = Network::load(a.network);
    const StyleGenerator& g = net.style_generator();
    const StyleVector wa = resolve_vector(a.a, g, tau);
    const StyleVector wb = resolve_vector(a.b, g, tau);

    Manifest m(a.outdir, cmd, std::nullopt);
    m.set("divisions", a.divisions);
    const auto frames = interpolation_sequence(g, wa, wb, a.divisions);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const fs::path path = fs::path(a.outdir) / fmt::format("frame{:04d}.png", i);
        write_png(path, frames[i]);
        m.output(path);
    }
    m.finish();
    out << fmt::format("{} frames written to {}\n", frames.size(), a.outdir);
    return kExitOk;
}

int cmd_fetch(const Args& a, const CLI::App& cmd, std::ostream& out) {
    const char* env = std::getenv(kTokenEnvVar);
    const std::string token = env ? env : "";
    if (token.empty()) logging::warn("{} is not set; the playlist API will likely refuse the requests", kTokenEnvVar);

    Manifest m(a.dest, cmd, std::nullopt);
    HttplibClient client;
    const FetchResult r = fetch_covers(PlaylistQuery{a.playlists, a.api_url, token}, client);
    const DownloadResult d = download_all(r.albums, a.dest, a.parallelism, client);

    const fs::path index = fs::path(a.dest) / "albums.json";
    json j{{"albums", r.albums},
           {"playlist_errors", r.errors},
           {"download_failures", d.failures},
           {"pages", r.pages},
           {"skipped_tracks", r.skipped_tracks}};
    write_text(index, j.dump(2) + "\n");
    for (const auto& f : d.files) m.output(f);
    m.output(index);
    m.set("albums", r.albums.size());
    m.set("downloaded", d.downloaded);
    const bool failed = !a.playlists.empty() && r.errors.size() == a.playlists.size();
    m.finish(failed ? "failed" : "ok");
    out << fmt::format("{} albums from {} playlists; {} covers downloaded, {} failed\n", r.albums.size(),
                       a.playlists.size(), d.downloaded, d.failures.size());
    return failed ? kExitFailure : kExitOk;
}

int cmd_fid(const Args& a, const CLI::App& cmd, std::ostream& out) {
    const FidReport report = fid_report(fs::path(a.real), fs::path(a.fake));
    for (const auto& w : report.warnings) logging::warn("{}", w);
    json j = json::parse(report.to_json());
    if (!a.run_dir.empty()) {
        const json stats = json::parse(read_text(fs::path(a.run_dir) / kRunStatsFile));
        j["kimg"] = stats.at("kimg");
        j["wall_clock_s"] = stats.at("wall_clock_s");
    }
    const std::string text = j.dump(2) + "\n";
    if (!a.outdir.empty()) {
        Manifest m(a.outdir, cmd, std::nullopt);
        write_text(fs::path(a.outdir) / "fid.json", text);
        m.output(fs::path(a.outdir) / "fid.json");
        m.finish();
    }
    out << text;
    return kExitOk;
}

int cmd_serve_fixture(const Args& a, std::ostream& out) {
    FixtureServer server(default_fixture_catalog(a.fixture_seed));
    server.start(a.host, a.port);
    out << server.base_url() << std::endl;
    g_stop = false;
    std::signal(SIGINT, on_stop_signal);
    std::signal(SIGTERM, on_stop_signal);
    const auto t0 = std::chrono::steady_clock::now();
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (a.duration > 0.0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= a.duration)
            break;
    }
    server.stop();
    return kExitOk;
}

int cmd_make_fixture(const Args& a, const CLI::App& cmd, std::ostream& out) {
    FixtureStyle style;
    if (a.fixture_style == "strokes") {
        style = FixtureStyle::strokes;
    } else if (a.fixture_style == "covers") {
        style = FixtureStyle::covers;
    } else {
        throw UsageError(fmt::format("unknown fixture style '{}'", a.fixture_style));
    }
    if (a.channels != 1 && a.channels != 3) throw UsageError("--channels must be 1 or 3");
    Manifest m(a.dest, cmd, a.fixture_seed);
    const auto images = fixture_images(a.count, a.fixture_width, a.fixture_height, a.channels, style, a.fixture_seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const fs::path path = fs::path(a.dest) / fmt::format("fixture_{:04d}.png", i);
        write_png(path, images[i]);
        m.output(path);
    }
    m.finish();
    out << fmt::format("{} fixture images written to {}\n", images.size(), a.dest);
    return kExitOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    auto number = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            throw std::invalid_argument(fmt::format("bad seed '{}' in '{}'", s, text));
        }
        return std::stoull(s);
    };
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(number(part));
            continue;
        }
        const auto lo = number(part.substr(0, dash)), hi = number(part.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(fmt::format("empty seed range '{}'", part));
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw std::invalid_argument("no seeds given");
    return seeds;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Desk-scale GAN toolkit for album covers", "albumgan"};
    app.require_subcommand(1);
    Args a;

    auto* dataset = app.add_subcommand("dataset", "Resize a folder of images into a training set");
    dataset->add_option("--source", a.source, "Input image folder")->required();
    dataset->add_option("--dest", a.dest, "Output folder")->required();
    dataset->add_option("--width", a.width, "Output width")->capture_default_str();
    dataset->add_option("--height", a.height, "Output height")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train a GAN on a prepared image folder");
    train->add_option("--outdir", a.outdir, "Run directory")->required();
    train->add_option("--data", a.data, "Training image folder")->required();
    train->add_option("--model", a.model, "intro, dcgan or style (default: config file, else style)");
    train->add_option("--config", a.config, "key=value config file");
    train->add_option("--seed", a.seed, "Run seed");
    train->add_option("--epochs", a.epochs, "Override epochs");
    train->add_option("--batch-size", a.batch_size, "Override batch size");
    train->add_option("--set", a.sets, "Override any config key (key=value)");
    train->add_option("--gpus", a.gpus, "Accepted for compatibility and ignored");

    auto* generate = app.add_subcommand("generate", "Render one image per seed");
    generate->add_option("--network", a.network, "Checkpoint")->required();
    generate->add_option("--seeds", a.seeds, "Seeds, e.g. 600-605")->required();
    generate->add_option("--trunc", a.trunc, "Truncation threshold tau on z");
    generate->add_option("--outdir", a.outdir, "Output folder")->required();

    auto* proj = app.add_subcommand("project", "Find the style vector reproducing a target image");
    proj->add_option("--target", a.target, "Target image")->required();
    proj->add_option("--network", a.network, "Style checkpoint")->required();
    proj->add_option("--num-steps", a.num_steps, "Optimization steps")->capture_default_str();
    proj->add_option("--seed", a.latent_seed, "Seed for the mean-w estimate")->capture_default_str();
    proj->add_option("--outdir", a.outdir, "Output folder")->required();

    auto* mix = app.add_subcommand("mix", "Style-mixing grid over several sources");
    mix->add_option("--network", a.network, "Style checkpoint")->required();
    mix->add_option("--sources", a.sources, "Style vector files or seeds")->required()->delimiter(',');
    mix->add_option("--k", a.k, "Number of leading styles taken from the column source")->capture_default_str();
    mix->add_option("--trunc", a.trunc, "Truncation for seed sources");
    mix->add_option("--outdir", a.outdir, "Output folder")->required();

    auto* interp = app.add_subcommand("interpolate", "Frames along the line between two style vectors");
    interp->add_option("--network", a.network, "Style checkpoint")->required();
    interp->add_option("--a", a.a, "Start: style vector file or seed")->required();
    interp->add_option("--b", a.b, "End: style vector file or seed")->required();
    interp->add_option("--divisions", a.divisions, "Number of frames")->capture_default_str();
    interp->add_option("--trunc", a.trunc, "Truncation for seed endpoints");
    interp->add_option("--outdir", a.outdir, "Output folder")->required();

    auto* fetch = app.add_subcommand("fetch", "Download album covers of playlists");
    fetch->add_option("--playlists", a.playlists, "Playlist ids")->required()->delimiter(',');
    fetch->add_option("--dest", a.dest, "Output folder")->required();
    fetch->add_option("--api-url", a.api_url, "Playlist API base URL")->capture_default_str();
    fetch->add_option("--parallelism", a.parallelism, "Concurrent downloads")->capture_default_str();

    auto* fid = app.add_subcommand("fid", "Toy Frechet distance between two image folders");
    fid->add_option("--real", a.real, "Real image folder")->required();
    fid->add_option("--fake", a.fake, "Generated image folder")->required();
    fid->add_option("--run", a.run_dir, "Training run whose KIMG and wall clock go into the report");
    fid->add_option("--outdir", a.outdir, "Write fid.json here");

    auto* serve = app.add_subcommand("serve-fixture", "Serve the bundled playlist fixture over HTTP");
    serve->add_option("--host", a.host)->capture_default_str();
    serve->add_option("--port", a.port, "0 picks a free port")->capture_default_str();
    serve->add_option("--seed", a.fixture_seed, "Fixture catalog seed")->capture_default_str();
    serve->add_option("--duration", a.duration, "Stop after this many seconds (0: until interrupted)");

    auto* fixture = app.add_subcommand("make-fixture", "Write procedural fixture images");
    fixture->add_option("--dest", a.dest, "Output folder")->required();
    fixture->add_option("--count", a.count)->capture_default_str();
    fixture->add_option("--width", a.fixture_width)->capture_default_str();
    fixture->add_option("--height", a.fixture_height)->capture_default_str();
    fixture->add_option("--channels", a.channels)->capture_default_str();
    fixture->add_option("--style", a.fixture_style, "strokes or covers")->capture_default_str();
    fixture->add_option("--seed", a.fixture_seed)->capture_default_str();

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*dataset) return cmd_dataset(a, *dataset, out);
        if (*train) return cmd_train(a, *train, out);
        if (*generate) return cmd_generate(a, *generate, out);
        if (*proj) return cmd_project(a, *proj, out);
        if (*mix) return cmd_mix(a, *mix, out);
        if (*interp) return cmd_interpolate(a, *interp, out);
        if (*fetch) return cmd_fetch(a, *fetch, out);
        if (*fid) return cmd_fid(a, *fid, out);
        if (*serve) return cmd_serve_fixture(a, out);
        if (*fixture) return cmd_make_fixture(a, *fixture, out);
    } catch (const ConfigError& e) {
        err << fmt::format("config error ({}): {}\n", e.key(), e.what());
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace albumgan::cli
