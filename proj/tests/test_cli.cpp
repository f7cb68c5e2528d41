#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "albumgan/cli.hpp"
#include "albumgan/fixture_server.hpp"
#include "albumgan/image.hpp"
#include "albumgan/latent.hpp"
#include "albumgan/log.hpp"
#include "albumgan/network.hpp"
#include "albumgan/playlist.hpp"
#include "support/tempdir.hpp"

using namespace albumgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr float kNoTruncation = std::numeric_limits<float>::infinity();

struct Result {
    int code;
    std::string out, err, log;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "albumgan");
    std::ostringstream out, err, log;
    logging::set_sink([&log](logging::Level, const std::string& m) { log << m << "\n"; });
    const int code = cli::run(args, out, err);
    logging::set_sink({});
    return {code, out.str(), err.str(), log.str()};
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::vector<std::uint8_t> bytes(const fs::path& p) { return read_file(p); }

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

// A 16x16 style network trained for a moment, shared by the generation tests.
const fs::path& style_network() {
    static test::TempDir dir;
    static const fs::path ckpt = [] {
        const fs::path data = dir.path() / "fx";
        REQUIRE(run({"make-fixture", "--dest", data.string(), "--count", "32", "--width", "16", "--height", "16",
                     "--channels", "3", "--style", "covers"})
                    .code == 0);
        const fs::path outdir = dir.path() / "run";
        const Result r = run({"train", "--outdir", outdir.string(), "--data", data.string(), "--model", "style",
                              "--epochs", "1", "--set", "width=16", "--set", "height=16", "--set", "latent_dim=16",
                              "--set", "style_fmaps=8", "--set", "images_per_phase=32"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return outdir / "network.ckpt";
    }();
    return ckpt;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("seed lists") {
        CHECK(cli::parse_seeds("600-605") == std::vector<std::uint64_t>{600, 601, 602, 603, 604, 605});
        CHECK(cli::parse_seeds("1,4,10-12") == std::vector<std::uint64_t>{1, 4, 10, 11, 12});
        CHECK(cli::parse_seeds("7") == std::vector<std::uint64_t>{7});
        CHECK_THROWS_AS(cli::parse_seeds(""), std::invalid_argument);
        CHECK_THROWS_AS(cli::parse_seeds("5-3"), std::invalid_argument);
        CHECK_THROWS_AS(cli::parse_seeds("a"), std::invalid_argument);
    }

    TEST_CASE("usage errors exit with 2") {
        test::TempDir dir;
        CHECK(run({}).code == cli::kExitUsage);
        CHECK(run({"dataset", "--dest", dir.path().string()}).code == cli::kExitUsage);
        CHECK(run({"no-such-command"}).code == cli::kExitUsage);
        CHECK(run({"--help"}).code == cli::kExitOk);

        const fs::path data = dir.path() / "fx";
        REQUIRE(run({"make-fixture", "--dest", data.string(), "--count", "4"}).code == 0);
        const Result bad_key =
            run({"train", "--outdir", (dir.path() / "r").string(), "--data", data.string(), "--set", "nosuchkey=1"});
        CHECK(bad_key.code == cli::kExitUsage);
        CHECK(bad_key.err.find("nosuchkey") != std::string::npos);
        const Result bad_value = run({"train", "--outdir", (dir.path() / "r").string(), "--data", data.string(),
                                      "--model", "intro", "--set", "learning_rate=-1"});
        CHECK(bad_value.code == cli::kExitUsage);
        CHECK(bad_value.err.find("learning_rate") != std::string::npos);
        CHECK(run({"train", "--outdir", (dir.path() / "r").string(), "--data", data.string(), "--model", "gan3000"})
                  .code == cli::kExitUsage);
    }

    TEST_CASE("intro training smoke run") {
        test::TempDir dir;
        const fs::path data = dir.path() / "fx";
        REQUIRE(run({"make-fixture", "--dest", data.string()}).code == 0);
        const fs::path outdir = dir.path() / "run";
        const Result r = run({"train", "--outdir", outdir.string(), "--data", data.string(), "--model", "intro",
                              "--epochs", "2", "--batch-size", "16", "--gpus", "4"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(r.log.find("--gpus 4 ignored") != std::string::npos);

        const json stats = read_json(outdir / cli::kRunStatsFile);
        CHECK(stats["iterations"] == 8);
        CHECK(stats["reals_shown"] == 64);
        CHECK(std::isfinite(stats["final_d_loss"].get<double>()));
        CHECK(std::isfinite(stats["final_g_loss"].get<double>()));

        const json m = read_json(outdir / cli::kManifestFile);
        CHECK(m["status"] == "ok");
        CHECK(m["command"] == "train");
        CHECK(m["flags"]["gpus"] == "4");
        CHECK_FALSE(m["finished"].is_null());
        CHECK(fs::exists(outdir / "network.ckpt"));
        CHECK(fs::exists(outdir / "loss.csv"));
    }

    TEST_CASE("generate is reproducible") {
        test::TempDir dir;
        const fs::path a = dir.path() / "a", b = dir.path() / "b";
        const std::string net = style_network().string();
        REQUIRE(run({"generate", "--network", net, "--seeds", "600-605", "--trunc", "0.7", "--outdir", a.string()})
                    .code == 0);
        REQUIRE(run({"generate", "--network", net, "--seeds", "600-605", "--trunc", "0.7", "--outdir", b.string()})
                    .code == 0);
        for (int seed = 600; seed <= 605; ++seed) {
            const std::string name = "seed0" + std::to_string(seed) + ".png";
            REQUIRE(fs::exists(a / name));
            CHECK(bytes(a / name) == bytes(b / name));
        }
        const json m = read_json(a / cli::kManifestFile);
        CHECK(m["tau"] == 0.7);
        CHECK(m["outputs"].size() == 6);
        CHECK(bytes(a / "seed0600.png") != bytes(a / "seed0601.png"));
    }

    TEST_CASE("project uses 600 steps by default") {
        test::TempDir dir;
        const fs::path target = dir.path() / "target.png";
        write_png(target, Network::load(style_network()).generate(Tensor::from({1, 16}, seed_latent(3, 16, kNoTruncation)))[0]);
        const fs::path outdir = dir.path() / "proj";
        const Result r =
            run({"project", "--target", target.string(), "--network", style_network().string(), "--outdir", outdir.string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(line_count(outdir / "projection_loss.csv") == 601);
        for (const char* f : {"projected_w.ckpt", "target.png", "proj.png", cli::kManifestFile})
            CHECK(fs::exists(outdir / f));
        const StyleVector w = load_style_vector(outdir / "projected_w.ckpt");
        CHECK(w.latent_dim == 16);
    }

    TEST_CASE("mix with k 0 keeps each row source") {
        test::TempDir dir;
        const Result r = run({"mix", "--network", style_network().string(), "--sources", "11,12,13", "--k", "0",
                              "--outdir", dir.path().string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const Network net = Network::load(style_network());
        const StyleGenerator& g = net.style_generator();
        std::vector<Image> tiles;
        for (std::uint64_t s : {11, 12, 13}) {
            const Image row = render(g, map_latent(g, seed_latent(s, 16, kNoTruncation)));
            for (int c = 0; c < 3; ++c) tiles.push_back(row);
        }
        CHECK(read_image(dir.path() / "mix.png").pixels == tile_grid(tiles, 3).pixels);
        CHECK(fs::exists(dir.path() / "mix.json"));
        CHECK(run({"mix", "--network", style_network().string(), "--sources", "1,2", "--k", "99", "--outdir",
                   dir.path().string()})
                  .code == cli::kExitUsage);
    }

    TEST_CASE("interpolate writes one frame per division") {
        test::TempDir dir;
        const Result r = run({"interpolate", "--network", style_network().string(), "--a", "1", "--b", "2", "--outdir",
                              dir.path().string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        std::size_t frames = 0, manifests = 0;
        for (const auto& e : fs::directory_iterator(dir.path())) {
            if (e.path().extension() == ".png") ++frames;
            if (e.path().filename() == cli::kManifestFile) ++manifests;
        }
        CHECK(frames == 50);
        CHECK(manifests == 1);
        CHECK(read_json(dir.path() / cli::kManifestFile)["outputs"].size() == 50);
    }

    TEST_CASE("fetch against the fixture server") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        test::TempDir dir;
        const std::vector<std::string> ids{"fixture-mix", "fixture-long", "fixture-overlap"};

        ::setenv(kTokenEnvVar, "test-token", 1);
        const Result r = run({"fetch", "--playlists", "fixture-mix,fixture-long,fixture-overlap", "--dest",
                              dir.path().string(), "--api-url", server.base_url()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const json index = read_json(dir.path() / "albums.json");
        CHECK(index["albums"].size() == server.catalog().expected_albums(ids));
        CHECK(read_json(dir.path() / cli::kManifestFile)["status"] == "ok");

        test::TempDir other;
        CHECK(run({"fetch", "--playlists", "fixture-broken", "--dest", other.path().string(), "--api-url",
                   server.base_url()})
                  .code == cli::kExitFailure);

        ::unsetenv(kTokenEnvVar);
        test::TempDir anon;
        const Result denied =
            run({"fetch", "--playlists", "fixture-mix", "--dest", anon.path().string(), "--api-url", server.base_url()});
        CHECK(denied.code == cli::kExitFailure);
        CHECK(denied.log.find(kTokenEnvVar) != std::string::npos);
        server.stop();
    }

    TEST_CASE("fid command") {
        test::TempDir dir;
        const fs::path data = dir.path() / "fx";
        REQUIRE(run({"make-fixture", "--dest", data.string(), "--count", "8", "--channels", "3"}).code == 0);
        const Result r = run({"fid", "--real", data.string(), "--fake", data.string(), "--outdir",
                              (dir.path() / "fid").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const json j = json::parse(r.out);
        CHECK(std::abs(j["fid"].get<double>()) < 1e-6);
        CHECK(j["n_real"] == 8);
        CHECK_FALSE(j["warnings"].empty());
        CHECK(fs::exists(dir.path() / "fid" / "fid.json"));
    }
}
