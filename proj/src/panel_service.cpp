#include "mr/console.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace mr::console {

std::string_view to_string(Role r)
{
    return r == Role::controller ? "controller" : "observer";
}

// ---------------------------------------------------------------------------
// ClientLink

Role ClientLink::role() const
{
    return role_;
}

void ClientLink::submit(std::string_view message)
{
    PanelService* service = nullptr;
    {
        std::lock_guard lk(mutex_);
        if (closed_)
            return;
        service = service_;
    }
    if (!service)
        return;

    Json j;
    try {
        j = Json::parse(message);
    } catch (const nlohmann::json::parse_error& e) {
        push(error_frame("malformed", std::string("not valid JSON: ") + e.what()).dump(), false, 0);
        return;
    }
    Json id = j.is_object() && j.contains("id") ? j["id"] : Json(nullptr);
    if (role_ != Role::controller) {
        push(error_frame("not_controller", "observers cannot send commands", id).dump(), false, 0);
        return;
    }
    try {
        PanelService::Pending p;
        p.client = id_;
        p.command = parse_command(j);
        p.id = std::move(id);
        service->enqueue(std::move(p));
    } catch (const CommandError& e) {
        push(error_frame(e.code(), e.what(), id).dump(), false, 0);
    }
}

std::optional<std::string> ClientLink::next_frame(std::chrono::milliseconds timeout)
{
    std::unique_lock lk(mutex_);
    cv_.wait_for(lk, timeout, [&] { return !outbox_.empty() || closed_; });
    if (outbox_.empty())
        return std::nullopt;
    std::string f = std::move(outbox_.front().first);
    outbox_.pop_front();
    return f;
}

void ClientLink::close()
{
    PanelService* service = nullptr;
    {
        std::lock_guard lk(mutex_);
        if (closed_)
            return;
        closed_ = true;
        service = service_;
        service_ = nullptr;
    }
    cv_.notify_all();
    if (service)
        service->detach(id_);
}

bool ClientLink::closed() const
{
    std::lock_guard lk(mutex_);
    return closed_;
}

std::uint64_t ClientLink::coalesced() const
{
    std::lock_guard lk(mutex_);
    return coalesced_;
}

void ClientLink::push(std::string frame, bool is_snapshot, std::size_t backlog_limit)
{
    {
        std::lock_guard lk(mutex_);
        if (closed_)
            return;
        if (is_snapshot && !outbox_.empty() && outbox_.size() >= backlog_limit && outbox_.back().second) {
            // Replace the newest unsent snapshot: the client sees fewer states,
            // never an older one after a newer one.
            outbox_.back().first = std::move(frame);
            ++coalesced_;
        } else {
            outbox_.emplace_back(std::move(frame), is_snapshot);
        }
    }
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// PanelService

PanelService::PanelService(Machine& machine, ServiceOptions options)
    : machine_(machine), options_(options), session_(machine)
{
    if (options_.slice_instructions == 0)
        throw ConfigError("slice_instructions must be positive");
    if (options_.backlog_limit == 0)
        throw ConfigError("backlog_limit must be positive");
    thread_ = std::thread([this] { executor(); });
}

PanelService::~PanelService()
{
    shutdown();
}

void PanelService::shutdown()
{
    {
        std::lock_guard lk(mutex_);
        if (stopping_ && !thread_.joinable())
            return;
        stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable())
        thread_.join();
    std::vector<std::shared_ptr<ClientLink>> clients;
    {
        std::lock_guard lk(mutex_);
        clients.swap(clients_);
        controller_.reset();
    }
    for (auto& c : clients) {
        {
            std::lock_guard lk(c->mutex_);
            c->closed_ = true;
            c->service_ = nullptr;
        }
        c->cv_.notify_all();
    }
}

std::shared_ptr<ClientLink> PanelService::connect()
{
    std::shared_ptr<ClientLink> link;
    {
        std::lock_guard lk(mutex_);
        if (stopping_)
            throw Error("panel service is shut down");
        const unsigned id = next_id_++;
        const Role role = controller_ ? Role::observer : Role::controller;
        if (role == Role::controller)
            controller_ = id;
        link = std::shared_ptr<ClientLink>(new ClientLink(this, id, role));
        clients_.push_back(link);
        Json hello;
        hello["event"] = "hello";
        hello["protocol"] = kProtocolVersion;
        hello["client"] = id;
        hello["role"] = std::string(to_string(role));
        link->push(hello.dump(), false, options_.backlog_limit);
        Pending greet;
        greet.kind = Pending::Kind::greet;
        greet.client = id;
        queue_.push_back(std::move(greet));
    }
    cv_.notify_all();
    return link;
}

std::uint64_t PanelService::snapshots_published() const
{
    std::lock_guard lk(mutex_);
    return published_;
}

void PanelService::enqueue(Pending p)
{
    {
        std::lock_guard lk(mutex_);
        if (stopping_)
            return;
        queue_.push_back(std::move(p));
    }
    cv_.notify_all();
}

void PanelService::detach(unsigned client)
{
    {
        std::lock_guard lk(mutex_);
        std::erase_if(clients_, [&](const auto& c) { return c->id() == client; });
        if (controller_ == client) {
            controller_.reset();
            Pending p;
            p.kind = Pending::Kind::departed;
            p.client = client;
            queue_.push_back(std::move(p));
        }
    }
    cv_.notify_all();
}

void PanelService::publish(const PanelSnapshot& s)
{
    const std::string frame = to_json(s).dump();
    std::vector<std::shared_ptr<ClientLink>> clients;
    {
        std::lock_guard lk(mutex_);
        clients = clients_;
        ++published_;
    }
    for (auto& c : clients)
        c->push(frame, true, options_.backlog_limit);
}

void PanelService::send_to(unsigned client, const Json& frame)
{
    std::shared_ptr<ClientLink> target;
    {
        std::lock_guard lk(mutex_);
        for (auto& c : clients_)
            if (c->id() == client)
                target = c;
    }
    if (target)
        target->push(frame.dump(), false, options_.backlog_limit);
}

void PanelService::executor()
{
    using clock = std::chrono::steady_clock;
    const auto period = options_.refresh_hz > 0
                            ? std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.refresh_hz))
                            : clock::duration::max();
    auto last_publish = clock::now();

    for (;;) {
        std::deque<Pending> batch;
        {
            std::unique_lock lk(mutex_);
            if (!session_.running())
                cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_)
                return;
            batch.swap(queue_);
        }

        for (auto& p : batch) {
            switch (p.kind) {
            case Pending::Kind::greet:
                send_to(p.client, to_json(session_.current()));
                break;
            case Pending::Kind::departed:
                if (session_.running()) {
                    machine_.pause();
                    publish(session_.snapshot());
                    last_publish = clock::now();
                }
                break;
            case Pending::Kind::command:
                try {
                    auto outcome = session_.apply(*p.command);
                    if (outcome.reply) {
                        (*outcome.reply)["id"] = p.id;
                        send_to(p.client, *outcome.reply);
                    }
                    if (outcome.state_changed) {
                        publish(session_.snapshot());
                        last_publish = clock::now();
                    }
                } catch (const CommandError& e) {
                    send_to(p.client, error_frame(e.code(), e.what(), p.id));
                }
                break;
            }
        }

        if (session_.running()) {
            try {
                session_.run_slice(options_.slice_instructions);
            } catch (const Error& e) {
                const Json fault = error_frame("fault", e.what());
                std::vector<std::shared_ptr<ClientLink>> clients;
                {
                    std::lock_guard lk(mutex_);
                    clients = clients_;
                }
                for (auto& c : clients)
                    c->push(fault.dump(), false, options_.backlog_limit);
            }
            const auto now = clock::now();
            if (!session_.running() || now - last_publish >= period) {
                publish(session_.snapshot());
                last_publish = now;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Transport

namespace {

constexpr std::string_view kWebSocketGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxMessage = 1 << 20;

bool send_all(int fd, const void* data, std::size_t len)
{
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR)
                continue;
            return false;
        }
        p += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

bool send_all(int fd, std::string_view s) { return send_all(fd, s.data(), s.size()); }

/// Blocking read of exactly `len` bytes, prefixed by whatever is in `buffered`.
bool recv_exact(int fd, std::string& buffered, char* out, std::size_t len)
{
    std::size_t got = std::min(len, buffered.size());
    std::memcpy(out, buffered.data(), got);
    buffered.erase(0, got);
    while (got < len) {
        const ssize_t n = ::recv(fd, out + got, len - got, 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR)
                continue;
            return false;
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

std::string lower(std::string s)
{
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim_copy(std::string s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
        ++i;
    return s.substr(i);
}

std::string ws_frame(std::uint8_t opcode, std::string_view payload)
{
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    const std::size_t n = payload.size();
    if (n < 126) {
        f.push_back(static_cast<char>(n));
    } else if (n <= 0xffff) {
        f.push_back(static_cast<char>(126));
        f.push_back(static_cast<char>((n >> 8) & 0xff));
        f.push_back(static_cast<char>(n & 0xff));
    } else {
        f.push_back(static_cast<char>(127));
        for (int i = 7; i >= 0; --i)
            f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
    }
    f.append(payload);
    return f;
}

std::string_view content_type(const std::filesystem::path& p)
{
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".wasm") return "application/wasm";
    return "application/octet-stream";
}

struct HttpRequest {
    std::string method;
    std::string target;
    std::map<std::string, std::string> headers;  // lower-case names
};

std::optional<HttpRequest> parse_http_head(const std::string& head)
{
    std::istringstream in(head);
    std::string line;
    if (!std::getline(in, line))
        return std::nullopt;
    HttpRequest r;
    std::istringstream rl(line);
    std::string version;
    rl >> r.method >> r.target >> version;
    if (r.method.empty() || r.target.empty() || version.rfind("HTTP/", 0) != 0)
        return std::nullopt;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            break;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            continue;
        r.headers[lower(trim_copy(line.substr(0, colon)))] = trim_copy(line.substr(colon + 1));
    }
    return r;
}

void http_respond(int fd, int status, std::string_view reason, std::string_view type, std::string_view body)
{
    std::ostringstream h;
    h << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
      << "Content-Type: " << type << "\r\n"
      << "Content-Length: " << body.size() << "\r\n"
      << "Connection: close\r\n\r\n";
    send_all(fd, h.str());
    send_all(fd, body);
}

// Pumps a link's outgoing frames onto the socket until the link closes.
template <typename Encode>
std::thread start_writer(int fd, std::shared_ptr<ClientLink> link, std::mutex& write_mutex, Encode encode)
{
    return std::thread([fd, link, &write_mutex, encode] {
        for (;;) {
            auto frame = link->next_frame(std::chrono::milliseconds(100));
            if (!frame) {
                if (link->closed())
                    return;
                continue;
            }
            std::lock_guard lk(write_mutex);
            if (!send_all(fd, encode(*frame))) {
                link->close();
                return;
            }
        }
    });
}

} // namespace

std::string websocket_accept_key(std::string_view client_key)
{
    const std::string input = std::string(client_key) + std::string(kWebSocketGuid);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(input.data(), input.size(), digest, &digest_len, EVP_sha1(), nullptr) != 1)
        throw Error("SHA-1 digest failed");
    std::array<unsigned char, 4 * ((EVP_MAX_MD_SIZE + 2) / 3) + 1> b64{};
    const int n = EVP_EncodeBlock(b64.data(), digest, static_cast<int>(digest_len));
    return std::string(reinterpret_cast<const char*>(b64.data()), static_cast<std::size_t>(n));
}

PanelServer::PanelServer(PanelService& service, ServerOptions options) : service_(service), options_(std::move(options))
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(options_.port);
    if (int rc = ::getaddrinfo(options_.host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw Error("cannot resolve " + options_.host + ": " + ::gai_strerror(rc));
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (listen_fd_ < 0) {
        ::freeaddrinfo(res);
        throw Error("socket: " + std::string(std::strerror(errno)));
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 16) != 0) {
        const std::string msg = std::strerror(errno);
        ::freeaddrinfo(res);
        ::close(listen_fd_);
        throw Error("cannot listen on " + options_.host + ":" + port + ": " + msg);
    }
    ::freeaddrinfo(res);
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

PanelServer::~PanelServer()
{
    stop();
}

void PanelServer::stop()
{
    if (stopping_.exchange(true))
        return;
    if (acceptor_.joinable())
        acceptor_.join();
    ::close(listen_fd_);
    std::vector<std::thread> conns;
    {
        std::lock_guard lk(conn_mutex_);
        for (int fd : open_fds_)
            ::shutdown(fd, SHUT_RDWR);
        conns.swap(connections_);
    }
    for (auto& t : conns)
        t.join();
}

void PanelServer::accept_loop()
{
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0)
            continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        std::lock_guard lk(conn_mutex_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        open_fds_.push_back(fd);
        connections_.emplace_back([this, fd] {
            serve_connection(fd);
            std::lock_guard lk2(conn_mutex_);
            std::erase(open_fds_, fd);
            ::close(fd);
        });
    }
}

void PanelServer::serve_connection(int fd)
{
    // A protocol client may connect and wait silently for frames; anything
    // that does not start speaking HTTP promptly is treated as NDJSON.
    std::string buffered;
    {
        pollfd p{fd, POLLIN, 0};
        if (::poll(&p, 1, 250) > 0) {
            char buf[4096];
            const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0)
                return;
            buffered.assign(buf, static_cast<std::size_t>(n));
        }
    }

    const bool http = buffered.rfind("GET ", 0) == 0 || buffered.rfind("HEAD ", 0) == 0 ||
                      (buffered.size() < 4 && std::string("GET ").rfind(buffered, 0) == 0 && !buffered.empty());
    std::mutex write_mutex;

    if (!http) {
        auto link = service_.connect();
        auto writer = start_writer(fd, link, write_mutex, [](const std::string& f) { return f + "\n"; });
        std::string pending = buffered;
        char buf[4096];
        bool open = true;
        while (open) {
            std::size_t nl;
            while ((nl = pending.find('\n')) != std::string::npos) {
                std::string line = pending.substr(0, nl);
                pending.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r')
                    line.pop_back();
                if (!trim_copy(line).empty())
                    link->submit(line);
            }
            if (pending.size() > kMaxMessage)
                break;
            const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0) {
                if (n < 0 && errno == EINTR)
                    continue;
                open = false;
            } else {
                pending.append(buf, static_cast<std::size_t>(n));
            }
        }
        link->close();
        writer.join();
        return;
    }

    // HTTP: read the head.
    while (buffered.find("\r\n\r\n") == std::string::npos) {
        if (buffered.size() > 16384)
            return;
        char buf[4096];
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0)
            return;
        buffered.append(buf, static_cast<std::size_t>(n));
    }
    const auto head_end = buffered.find("\r\n\r\n") + 4;
    const auto req = parse_http_head(buffered.substr(0, head_end));
    buffered.erase(0, head_end);
    if (!req) {
        http_respond(fd, 400, "Bad Request", "text/plain", "bad request\n");
        return;
    }

    const auto upgrade = req->headers.find("upgrade");
    if (upgrade != req->headers.end() && lower(upgrade->second) == "websocket") {
        const auto key = req->headers.find("sec-websocket-key");
        if (key == req->headers.end()) {
            http_respond(fd, 400, "Bad Request", "text/plain", "missing Sec-WebSocket-Key\n");
            return;
        }
        const std::string response = "HTTP/1.1 101 Switching Protocols\r\n"
                                     "Upgrade: websocket\r\n"
                                     "Connection: Upgrade\r\n"
                                     "Sec-WebSocket-Accept: " +
                                     websocket_accept_key(key->second) + "\r\n\r\n";
        if (!send_all(fd, response))
            return;

        auto link = service_.connect();
        auto writer = start_writer(fd, link, write_mutex, [](const std::string& f) { return ws_frame(0x1, f); });
        std::string message;
        for (;;) {
            unsigned char hdr[2];
            if (!recv_exact(fd, buffered, reinterpret_cast<char*>(hdr), 2))
                break;
            const bool fin = (hdr[0] & 0x80) != 0;
            const std::uint8_t opcode = hdr[0] & 0x0f;
            const bool masked = (hdr[1] & 0x80) != 0;
            std::uint64_t len = hdr[1] & 0x7f;
            if (len == 126 || len == 127) {
                unsigned char ext[8];
                const std::size_t n = len == 126 ? 2 : 8;
                if (!recv_exact(fd, buffered, reinterpret_cast<char*>(ext), n))
                    break;
                len = 0;
                for (std::size_t i = 0; i < n; ++i)
                    len = (len << 8) | ext[i];
            }
            if (!masked || len > kMaxMessage) {
                std::lock_guard lk(write_mutex);
                send_all(fd, ws_frame(0x8, std::string("\x03\xea", 2)));  // 1002 protocol error
                break;
            }
            unsigned char mask[4];
            if (!recv_exact(fd, buffered, reinterpret_cast<char*>(mask), 4))
                break;
            std::string payload(static_cast<std::size_t>(len), '\0');
            if (len > 0 && !recv_exact(fd, buffered, payload.data(), payload.size()))
                break;
            for (std::size_t i = 0; i < payload.size(); ++i)
                payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);

            if (opcode == 0x8) {
                std::lock_guard lk(write_mutex);
                send_all(fd, ws_frame(0x8, payload.substr(0, std::min<std::size_t>(2, payload.size()))));
                break;
            }
            if (opcode == 0x9) {
                std::lock_guard lk(write_mutex);
                send_all(fd, ws_frame(0xA, payload));
                continue;
            }
            if (opcode == 0xA)
                continue;
            if (opcode == 0x1 || opcode == 0x2 || opcode == 0x0) {
                message += payload;
                if (message.size() > kMaxMessage)
                    break;
                if (!fin)
                    continue;
                std::istringstream lines(message);
                for (std::string line; std::getline(lines, line);)
                    if (!trim_copy(line).empty())
                        link->submit(line);
                message.clear();
            }
        }
        link->close();
        writer.join();
        return;
    }

    // Plain HTTP: static files.
    if (!options_.static_dir) {
        http_respond(fd, 404, "Not Found", "text/plain", "no static directory configured\n");
        return;
    }
    std::string path = req->target.substr(0, req->target.find('?'));
    if (path.empty() || path.front() != '/' || path.find("..") != std::string::npos) {
        http_respond(fd, 400, "Bad Request", "text/plain", "bad path\n");
        return;
    }
    if (path.back() == '/')
        path += "index.html";
    const auto file = *options_.static_dir / path.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file)) {
        http_respond(fd, 404, "Not Found", "text/plain", "not found\n");
        return;
    }
    std::ostringstream body;
    body << in.rdbuf();
    http_respond(fd, 200, "OK", content_type(file), req->method == "HEAD" ? std::string() : body.str());
}

} // namespace mr::console
