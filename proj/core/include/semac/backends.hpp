#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "semac/teacher.hpp"

namespace semac {

// Request/response plumbing for an OpenAI-style chat-completion endpoint.
//
// Request body:
//   {"model", "messages": [{"role":"system",...},{"role":"user",...}],
//    "temperature", "max_tokens", "logprobs", "top_logprobs"}
// Response fields read:
//   choices[0].message.content
//   choices[0].logprobs.content[i].{token, logprob, top_logprobs[j].{token, logprob}}
std::string build_chat_request(const RemoteConfig& cfg, const std::string& system, const std::string& user);

// Queries one per line, then the BS sentence.
std::string teacher_user_message(std::span<const std::string> ue_queries, const std::string& bs_query);

// Parses the answer lines and, when token log-probabilities are present,
// the candidate scores for '0', '1', '2' at each action-token position.
// Candidates missing from the reported top list get the smallest reported score.
TeacherResponse parse_teacher_completion(const std::string& body, int num_ues);
std::string parse_text_completion(const std::string& body);

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    // Returns the response body; throws TransportError.
    virtual std::string post(const std::string& request_body) = 0;
};

class HttpTransport final : public ChatTransport {
public:
    explicit HttpTransport(RemoteConfig cfg);
    std::string post(const std::string& request_body) override;

private:
    RemoteConfig cfg_;
};

// Directory of recorded exchanges, one JSON file each:
//   {"messages": [...], "response": <response body object or plain content string>}
// Lookup matches on the messages array only, so fixtures survive changes to
// model name or sampling parameters.
class FixtureStore {
public:
    explicit FixtureStore(std::filesystem::path dir);

    std::optional<std::string> find(const std::string& request_body) const;
    // Writes a new fixture file and indexes it.
    void record(const std::string& request_body, const std::string& response_body);
    std::size_t size() const { return index_.size(); }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> index_;  // messages dump -> response body
};

class FixtureTransport final : public ChatTransport {
public:
    explicit FixtureTransport(std::shared_ptr<const FixtureStore> store);
    std::string post(const std::string& request_body) override;

private:
    std::shared_ptr<const FixtureStore> store_;
};

class RecordingTransport final : public ChatTransport {
public:
    RecordingTransport(std::unique_ptr<ChatTransport> inner, std::shared_ptr<FixtureStore> store);
    std::string post(const std::string& request_body) override;

private:
    std::unique_ptr<ChatTransport> inner_;
    std::shared_ptr<FixtureStore> store_;
};

class RemoteTeacher final : public TeacherBackend {
public:
    RemoteTeacher(RemoteConfig cfg, std::unique_ptr<ChatTransport> transport);
    TeacherResponse complete(const std::string& instruction, std::span<const std::string> ue_queries,
                             const std::string& bs_query) override;

private:
    RemoteConfig cfg_;
    std::unique_ptr<ChatTransport> transport_;
};

class RemoteText final : public TextBackend {
public:
    RemoteText(RemoteConfig cfg, std::unique_ptr<ChatTransport> transport);
    std::string generate(const std::string& system, const std::string& user) override;

private:
    RemoteConfig cfg_;
    std::unique_ptr<ChatTransport> transport_;
};

} // namespace semac
