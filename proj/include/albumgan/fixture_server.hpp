#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace albumgan {

struct FixtureTrack {
    bool null_track = false;
    bool null_album = false;
    std::string album_id;
    // Paths on the fixture server, e.g. "/images/a1_300.jpg".
    std::vector<std::string> image_paths;
};

struct FixtureCatalog {
    std::map<std::string, std::vector<FixtureTrack>> playlists;
    // Playlists that always answer 500.
    std::vector<std::string> broken_playlists;
    std::map<std::string, std::vector<std::uint8_t>> files;
    std::size_t page_size = 50;

    /// Distinct album ids reachable through usable tracks of the given playlists.
    std::size_t expected_albums(const std::vector<std::string>& ids) const;
};

/// Playlists: "fixture-mix" (3 tracks from 2 albums), "fixture-long" (100
/// tracks over two pages including null and malformed entries),
/// "fixture-overlap" (shares albums with the others) and "fixture-broken".
FixtureCatalog default_fixture_catalog(std::uint64_t seed = 7);

/// Local HTTP server answering GET /playlists/{id}/items and GET /images/...
/// Requests to the playlist endpoint need an "Authorization: Bearer" header
/// (any token).
class FixtureServer {
   public:
    explicit FixtureServer(FixtureCatalog catalog);
    ~FixtureServer();
    FixtureServer(const FixtureServer&) = delete;
    FixtureServer& operator=(const FixtureServer&) = delete;

    /// Binds (port 0 picks a free port) and returns the bound port.
    int bind(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void serve();
    /// bind() then serve() on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

    std::string base_url() const;
    int port() const { return port_; }
    const FixtureCatalog& catalog() const { return catalog_; }

   private:
    void install_routes();

    FixtureCatalog catalog_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int port_ = 0;
};

}  // namespace albumgan
