#include "albumgan/fixture_server.hpp"

#include <httplib.h>

#include <algorithm>
#include <fmt/core.h>
#include <json.hpp>
#include <set>
#include <stdexcept>

#include "albumgan/data.hpp"
#include "albumgan/image.hpp"

namespace albumgan {

using nlohmann::json;

std::size_t FixtureCatalog::expected_albums(const std::vector<std::string>& ids) const {
    std::set<std::string> albums;
    for (const auto& id : ids) {
        const auto it = playlists.find(id);
        if (it == playlists.end()) continue;
        if (std::find(broken_playlists.begin(), broken_playlists.end(), id) != broken_playlists.end()) continue;
        for (const auto& t : it->second)
            if (!t.null_track && !t.null_album && t.image_paths.size() >= 2) albums.insert(t.album_id);
    }
    return albums.size();
}

namespace {

FixtureTrack album_track(const std::string& id, std::size_t images = 3) {
    FixtureTrack t;
    t.album_id = id;
    const char* sizes[] = {"640", "300", "64"};
    for (std::size_t i = 0; i < images; ++i) t.image_paths.push_back("/images/" + id + "_" + sizes[i] + ".jpg");
    return t;
}

}  // namespace

FixtureCatalog default_fixture_catalog(std::uint64_t seed) {
    FixtureCatalog c;
    c.playlists["fixture-mix"] = {album_track("albA"), album_track("albA"), album_track("albB")};

    auto& long_list = c.playlists["fixture-long"];
    for (int i = 0; i < 100; ++i) {
        if (i == 10) {
            FixtureTrack t;
            t.null_track = true;
            long_list.push_back(t);
        } else if (i == 20) {
            FixtureTrack t;
            t.null_album = true;
            long_list.push_back(t);
        } else if (i == 30) {
            long_list.push_back(album_track("single", 1));
        } else if (i == 40) {
            long_list.push_back(album_track("dead"));
        } else {
            long_list.push_back(album_track(fmt::format("long{:02d}", i % 45)));
        }
    }
    c.playlists["fixture-overlap"] = {album_track("albB"), album_track("long00"), album_track("long01"),
                                      album_track("ovl")};
    c.playlists["fixture-broken"] = {album_track("never")};
    c.broken_playlists = {"fixture-broken"};

    std::set<std::string> ids;
    for (const auto& [name, tracks] : c.playlists)
        for (const auto& t : tracks)
            if (!t.null_track && !t.null_album && t.album_id != "dead") ids.insert(t.album_id);
    const auto covers = fixture_images(ids.size(), 32, 32, 3, FixtureStyle::covers, seed);
    std::size_t i = 0;
    for (const auto& id : ids) {
        const auto bytes = encode_jpeg(covers[i++], 90);
        c.files["/images/" + id + "_300.jpg"] = bytes;
        c.files["/images/" + id + "_640.jpg"] = bytes;
    }
    return c;
}

FixtureServer::FixtureServer(FixtureCatalog catalog)
    : catalog_(std::move(catalog)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

FixtureServer::~FixtureServer() { stop(); }

std::string FixtureServer::base_url() const { return fmt::format("http://{}:{}", host_, port_); }

void FixtureServer::install_routes() {
    server_->Get(R"(/playlists/([^/]+)/items)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string auth = req.get_header_value("Authorization");
        if (auth.rfind("Bearer ", 0) != 0) {
            res.status = 401;
            res.set_content(R"({"error":"missing bearer token"})", "application/json");
            return;
        }
        const std::string id = req.matches[1];
        const auto& broken = catalog_.broken_playlists;
        if (std::find(broken.begin(), broken.end(), id) != broken.end()) {
            res.status = 500;
            res.set_content(R"({"error":"internal"})", "application/json");
            return;
        }
        const auto it = catalog_.playlists.find(id);
        if (it == catalog_.playlists.end()) {
            res.status = 404;
            res.set_content(R"({"error":"not found"})", "application/json");
            return;
        }
        const auto& tracks = it->second;
        const std::size_t offset = req.has_param("offset") ? std::stoul(req.get_param_value("offset")) : 0;
        std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : catalog_.page_size;
        limit = std::clamp<std::size_t>(limit, 1, catalog_.page_size);

        json items = json::array();
        for (std::size_t i = offset; i < std::min(tracks.size(), offset + limit); ++i) {
            const FixtureTrack& t = tracks[i];
            if (t.null_track) {
                items.push_back({{"track", nullptr}});
                continue;
            }
            if (t.null_album) {
                items.push_back({{"track", {{"album", nullptr}}}});
                continue;
            }
            json images = json::array();
            for (const auto& p : t.image_paths) images.push_back({{"url", base_url() + p}});
            items.push_back({{"track", {{"album", {{"id", t.album_id}, {"images", images}}}}}});
        }
        json page{{"items", items}, {"total", tracks.size()}};
        if (offset + limit < tracks.size()) {
            page["next"] = fmt::format("{}/playlists/{}/items?offset={}&limit={}", base_url(), id, offset + limit, limit);
        } else {
            page["next"] = nullptr;
        }
        res.set_content(page.dump(), "application/json");
    });

    server_->Get(R"(/images/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto it = catalog_.files.find(req.path);
        if (it == catalog_.files.end()) {
            res.status = 404;
            return;
        }
        res.set_content(std::string(it->second.begin(), it->second.end()), "image/jpeg");
    });
}

int FixtureServer::bind(const std::string& host, int port) {
    host_ = host;
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
    return port_;
}

void FixtureServer::serve() { server_->listen_after_bind(); }

int FixtureServer::start(const std::string& host, int port) {
    if (thread_.joinable()) throw std::logic_error("fixture server already running");
    bind(host, port);
    thread_ = std::thread([this] { serve(); });
    server_->wait_until_ready();
    return port_;
}

void FixtureServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace albumgan
