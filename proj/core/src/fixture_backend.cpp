#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semac/backends.hpp"
#include "semac/rng.hpp"

namespace semac {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string messages_key(const json& messages) { return messages.dump(); }

// Plain-string responses are wrapped into a minimal completion body.
std::string as_body(const json& response) {
    if (response.is_string())
        return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", response}}}}})}}.dump();
    return response.dump();
}

} // namespace

FixtureStore::FixtureStore(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) return;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::ifstream in(p);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw std::runtime_error("bad fixture " + p.string() + ": " + e.what());
        }
        if (!j.contains("messages") || !j.contains("response"))
            throw std::runtime_error("fixture " + p.string() + " needs 'messages' and 'response'");
        index_.emplace(messages_key(j["messages"]), as_body(j["response"]));
    }
}

std::optional<std::string> FixtureStore::find(const std::string& request_body) const {
    const json req = json::parse(request_body);
    const auto it = index_.find(messages_key(req.at("messages")));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void FixtureStore::record(const std::string& request_body, const std::string& response_body) {
    const json req = json::parse(request_body);
    const std::string key = messages_key(req.at("messages"));
    fs::create_directories(dir_);
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.json",
                  static_cast<unsigned long long>(Rng::derive_seed(0, key)));
    json rec{{"messages", req["messages"]}, {"response", json::parse(response_body)}};
    std::ofstream out(dir_ / name);
    if (!out) throw std::runtime_error("cannot write fixture in " + dir_.string());
    out << rec.dump(2) << '\n';
    index_[key] = response_body;
}

FixtureTransport::FixtureTransport(std::shared_ptr<const FixtureStore> store) : store_(std::move(store)) {}

std::string FixtureTransport::post(const std::string& request_body) {
    if (auto hit = store_->find(request_body)) return *hit;
    throw TransportError("no recorded fixture for this request");
}

RecordingTransport::RecordingTransport(std::unique_ptr<ChatTransport> inner, std::shared_ptr<FixtureStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string RecordingTransport::post(const std::string& request_body) {
    std::string body = inner_->post(request_body);
    store_->record(request_body, body);
    return body;
}

} // namespace semac
