#include "albumgan/playlist.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "albumgan/image.hpp"
#include "albumgan/log.hpp"

namespace albumgan {

namespace fs = std::filesystem;
using nlohmann::json;

UrlParts parse_url(const std::string& url) {
    UrlParts parts;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("url without scheme: " + url);
    parts.scheme = url.substr(0, scheme_end);
    if (parts.scheme != "http") throw std::invalid_argument("only http urls are supported: " + url);
    const auto host_begin = scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    std::string authority = url.substr(host_begin, path_begin == std::string::npos ? std::string::npos
                                                                                  : path_begin - host_begin);
    parts.path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        parts.port = std::stoi(authority.substr(colon + 1));
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw std::invalid_argument("url without host: " + url);
    parts.host = authority;
    return parts;
}

HttpResponse HttplibClient::get(const std::string& url, const std::string& bearer_token) {
    const UrlParts parts = parse_url(url);
    httplib::Client client(parts.host, parts.port);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    auto res = client.Get(parts.path, headers);
    if (!res) throw std::runtime_error("GET " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body, res->get_header_value("Content-Type")};
}

namespace {

std::string items_url(const std::string& base, const std::string& playlist_id) {
    std::string b = base;
    while (!b.empty() && b.back() == '/') b.pop_back();
    return b + "/playlists/" + playlist_id + "/items?limit=" + std::to_string(kPlaylistPageLimit);
}

// Adds one page's albums; returns the next page URL or "" at the end.
std::string consume_page(const json& page, std::map<std::string, std::string>& albums, std::size_t& skipped) {
    for (const auto& item : page.at("items")) {
        const auto track = item.find("track");
        if (track == item.end() || track->is_null()) {
            ++skipped;
            continue;
        }
        const auto album = track->find("album");
        if (album == track->end() || album->is_null()) {
            ++skipped;
            continue;
        }
        const auto images = album->find("images");
        if (images == album->end() || !images->is_array() || images->size() < 2) {
            ++skipped;
            continue;
        }
        const auto id = album->at("id").get<std::string>();
        const auto url = (*images)[1].at("url").get<std::string>();
        // Keep the smallest URL on conflicts so the result does not depend on playlist order.
        auto [it, inserted] = albums.emplace(id, url);
        if (!inserted && url < it->second) it->second = url;
    }
    const auto next = page.find("next");
    if (next == page.end() || next->is_null()) return {};
    return next->get<std::string>();
}

}  // namespace

FetchResult fetch_covers(const PlaylistQuery& query, HttpClient& client) {
    if (query.playlist_ids.empty()) throw std::invalid_argument("fetch_covers: no playlist ids");
    FetchResult result;
    for (const auto& id : query.playlist_ids) {
        // Albums from pages read before a failure are kept.
        std::map<std::string, std::string> found;
        std::size_t skipped = 0, pages = 0;
        try {
            std::string url = items_url(query.base_url, id);
            while (!url.empty()) {
                const HttpResponse res = client.get(url, query.token);
                if (res.status != 200) throw std::runtime_error("HTTP " + std::to_string(res.status) + " for " + url);
                url = consume_page(json::parse(res.body), found, skipped);
                ++pages;
            }
        } catch (const std::exception& e) {
            logging::warn("playlist {}: {}; exception, continuing to next playlist", id, e.what());
            result.errors[id] = e.what();
        }
        for (const auto& [album, url] : found) {
            auto [it, inserted] = result.albums.emplace(album, url);
            if (!inserted && url < it->second) it->second = url;
        }
        result.skipped_tracks += skipped;
        result.pages += pages;
    }
    return result;
}

std::string cover_extension(const std::string& url, const std::string& content_type) {
    std::string path = url;
    if (const auto q = path.find_first_of("?#"); q != std::string::npos) path.resize(q);
    const auto slash = path.rfind('/');
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        std::string ext = path.substr(dot);
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".jpg" || ext == ".jpeg" || ext == ".png") return ext;
    }
    if (content_type.find("png") != std::string::npos) return ".png";
    return ".jpg";
}

DownloadResult download_all(const std::map<std::string, std::string>& urls, const fs::path& dest,
                            std::size_t parallelism, HttpClient& client) {
    if (parallelism == 0) throw std::invalid_argument("download_all: parallelism must be positive");
    std::error_code ec;
    fs::create_directories(dest, ec);
    if (ec || !fs::is_directory(dest)) throw std::runtime_error("cannot create " + dest.string());

    const std::vector<std::pair<std::string, std::string>> jobs(urls.begin(), urls.end());
    std::atomic<std::size_t> cursor{0};
    std::mutex mutex;
    DownloadResult result;

    auto fetch_one = [&](const std::string& id, const std::string& url) {
        const HttpResponse res = client.get(url, "");
        if (res.status != 200) throw std::runtime_error("HTTP " + std::to_string(res.status));
        const fs::path target = dest / (id + cover_extension(url, res.content_type));
        const fs::path partial = target.string() + ".part";
        write_file(partial, std::vector<std::uint8_t>(res.body.begin(), res.body.end()));
        fs::rename(partial, target);
        return target;
    };

    auto worker = [&] {
        for (std::size_t i = cursor++; i < jobs.size(); i = cursor++) {
            const auto& [id, url] = jobs[i];
            std::string error;
            for (int attempt = 0; attempt < 2; ++attempt) {
                try {
                    const fs::path file = fetch_one(id, url);
                    std::lock_guard lock(mutex);
                    result.files.push_back(file);
                    ++result.downloaded;
                    error.clear();
                    break;
                } catch (const std::exception& e) {
                    error = e.what();
                }
            }
            if (!error.empty()) {
                logging::error("download of {} from {} failed: {}", id, url, error);
                std::lock_guard lock(mutex);
                result.failures[id] = error;
            }
        }
    };

    const std::size_t threads = std::min(parallelism, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    std::sort(result.files.begin(), result.files.end());
    return result;
}

}  // namespace albumgan
