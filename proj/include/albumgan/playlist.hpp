#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace albumgan {

/// Environment variable holding the bearer token for the playlist API.
inline constexpr const char* kTokenEnvVar = "ALBUMGAN_API_TOKEN";
inline constexpr std::size_t kPlaylistPageLimit = 50;

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string content_type;
};

/// Blocking GET. Implementations must be safe to call from several threads.
class HttpClient {
   public:
    virtual ~HttpClient() = default;
    virtual HttpResponse get(const std::string& url, const std::string& bearer_token) = 0;
};

/// cpp-httplib backed client (plain http only). A fresh connection per call.
class HttplibClient : public HttpClient {
   public:
    explicit HttplibClient(int timeout_seconds = 10) : timeout_seconds_(timeout_seconds) {}
    HttpResponse get(const std::string& url, const std::string& bearer_token) override;

   private:
    int timeout_seconds_;
};

struct UrlParts {
    std::string scheme;
    std::string host;
    int port = 80;
    std::string path;  // includes query string
};
UrlParts parse_url(const std::string& url);

struct PlaylistQuery {
    std::vector<std::string> playlist_ids;
    std::string base_url;
    std::string token;
};

struct FetchResult {
    // album id -> cover URL (second image entry)
    std::map<std::string, std::string> albums;
    // playlist id -> error message
    std::map<std::string, std::string> errors;
    std::size_t pages = 0;
    std::size_t skipped_tracks = 0;
};

/// Walks every playlist's item pages, following `next` until null. Tracks
/// that are null, have no album or fewer than 2 images are skipped. A
/// failing playlist is recorded and the rest continue.
FetchResult fetch_covers(const PlaylistQuery& query, HttpClient& client);

struct DownloadResult {
    std::size_t downloaded = 0;
    // album id -> error message
    std::map<std::string, std::string> failures;
    std::vector<std::filesystem::path> files;
};

/// Fetches each URL into dest/<album_id><ext> with at most `parallelism`
/// concurrent requests; each failure is retried once.
DownloadResult download_all(const std::map<std::string, std::string>& urls, const std::filesystem::path& dest,
                            std::size_t parallelism, HttpClient& client);

/// Extension for a downloaded cover: from the URL path, else the content type, else ".jpg".
std::string cover_extension(const std::string& url, const std::string& content_type);

}  // namespace albumgan
