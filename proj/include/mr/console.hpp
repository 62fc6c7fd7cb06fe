#pragma once

// Operator surface: panel protocol types, the panel service and the CLI.
//
// Protocol frames are single JSON objects. Over plain TCP they are newline
// delimited; over WebSocket each text frame carries one object. See
// docs/panel-protocol.md for the schema.

#include "mr/machine.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace mr::console {

using Json = nlohmann::ordered_json;

inline constexpr int kProtocolVersion = 1;

// ---------------------------------------------------------------------------
// Snapshots

struct LastStep {
    Address pc = 0;
    Word instruction;
    std::string disassembly;
    unsigned microwords = 0;
    std::uint64_t microcode_us = 0;
    std::uint64_t device_us = 0;
    std::optional<std::string> warning;
};

struct PanelSnapshot {
    std::uint64_t seq = 0;
    MachineState state;  // registers, memory and breakpoints at a microword boundary
    PlaneView plane;
    std::vector<dev::ChannelStatus> devices;
    std::optional<LastStep> last_step;
};

Json to_json(const PanelSnapshot& s);
std::string plane_row_bits(const PlaneView& v, unsigned y);

// ---------------------------------------------------------------------------
// Commands

namespace pc {
struct Start {};
struct Stop {};
struct StepInstruction {};
struct StepMicro {};
struct Reset {};
struct Deposit {
    Address addr;
    Word word;
};
struct Examine {
    Address addr;
};
struct SelectPlane {
    unsigned plane;
};
struct MountTape {
    unsigned channel;
    dev::TapeImage tape;
};
struct SetBreakpoint {
    Address addr;
};
struct ClearBreakpoint {
    Address addr;
};
struct Boot {
    unsigned channel = dev::kBootChannel;
};
} // namespace pc

using PanelCommand = std::variant<pc::Start, pc::Stop, pc::StepInstruction, pc::StepMicro, pc::Reset, pc::Deposit,
                                  pc::Examine, pc::SelectPlane, pc::MountTape, pc::SetBreakpoint,
                                  pc::ClearBreakpoint, pc::Boot>;

std::string_view command_name(const PanelCommand& c);

/// A refused or malformed command. `code` is one of: malformed, unknown_command,
/// bad_argument, not_controller, refused.
class CommandError : public Error {
public:
    CommandError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

/// Validates fully; throws CommandError.
PanelCommand parse_command(const Json& j);
PanelCommand parse_command(std::string_view text);
inline PanelCommand parse_command(const char* text) { return parse_command(std::string_view(text)); }
inline PanelCommand parse_command(const std::string& text) { return parse_command(std::string_view(text)); }
Json to_json(const PanelCommand& c);

Json error_frame(const std::string& code, const std::string& message, const Json& id = nullptr);

// ---------------------------------------------------------------------------
// Synchronous command application, shared by the service executor and by
// scripted sessions.

class PanelSession {
public:
    explicit PanelSession(Machine& machine);
    PanelSession(const PanelSession&) = delete;
    PanelSession& operator=(const PanelSession&) = delete;
    ~PanelSession();

    struct Outcome {
        bool state_changed = true;
        std::optional<Json> reply;  // sent to the issuing client only
    };

    /// Throws CommandError{"refused"} when the machine rejects the command.
    Outcome apply(const PanelCommand& c);

    /// Runs at most `instructions` while the machine is running. The machine
    /// stays running if the slice simply ran out.
    RunReport run_slice(std::uint64_t instructions);

    bool running() const { return machine_.state().status == Status::running; }
    unsigned selected_plane() const { return plane_; }
    Machine& machine() { return machine_; }

    /// Takes a snapshot and advances the sequence number.
    PanelSnapshot snapshot();

    /// The current state under the latest sequence number.
    PanelSnapshot current() const;

private:
    Machine& machine_;
    unsigned plane_ = 0;
    std::uint64_t seq_ = 0;
    std::optional<LastStep> last_step_;
};

/// Applies the commands in order, running the machine to a stop after each
/// one that leaves it running. Returns the snapshot taken after each command.
std::vector<PanelSnapshot> run_script(Machine& machine, const std::vector<PanelCommand>& script,
                                      RunLimits limits = {});

// ---------------------------------------------------------------------------
// Service

struct ServiceOptions {
    double refresh_hz = 30.0;                  // cap on snapshots while running
    std::uint64_t slice_instructions = 1000;   // instructions between command checks
    std::size_t backlog_limit = 64;            // queued frames before snapshots coalesce
};

enum class Role : std::uint8_t { controller, observer };
std::string_view to_string(Role r);

class PanelService;

/// One connected client. Transports feed incoming messages with submit()
/// and drain outgoing frames with next_frame().
class ClientLink {
public:
    Role role() const;
    unsigned id() const { return id_; }

    /// One protocol message (a JSON object, no framing).
    void submit(std::string_view message);

    /// Next outgoing frame, or nullopt on timeout or once closed and drained.
    std::optional<std::string> next_frame(std::chrono::milliseconds timeout);

    /// Detaches from the service. A departing controller pauses the machine.
    void close();
    bool closed() const;

    /// Snapshots dropped because a newer one replaced them in the backlog.
    std::uint64_t coalesced() const;

private:
    friend class PanelService;
    ClientLink(PanelService* service, unsigned id, Role role) : service_(service), id_(id), role_(role) {}
    void push(std::string frame, bool is_snapshot, std::size_t backlog_limit);

    PanelService* service_;
    unsigned id_;
    Role role_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::pair<std::string, bool>> outbox_;  // frame, is_snapshot
    bool closed_ = false;
    std::uint64_t coalesced_ = 0;
};

/// Owns the executor thread for one machine. The first client to connect
/// while no controller is attached becomes the controller; everyone else
/// observes.
class PanelService {
public:
    explicit PanelService(Machine& machine, ServiceOptions options = {});
    PanelService(const PanelService&) = delete;
    PanelService& operator=(const PanelService&) = delete;
    ~PanelService();

    std::shared_ptr<ClientLink> connect();
    void shutdown();

    std::uint64_t snapshots_published() const;

private:
    friend class ClientLink;
    struct Pending {
        enum class Kind { command, greet, departed } kind = Kind::command;
        unsigned client = 0;
        std::optional<PanelCommand> command;
        Json id;
    };

    void enqueue(Pending p);
    void detach(unsigned client);
    void executor();
    void publish(const PanelSnapshot& s);
    void send_to(unsigned client, const Json& frame);

    Machine& machine_;
    ServiceOptions options_;
    PanelSession session_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    std::vector<std::shared_ptr<ClientLink>> clients_;
    std::optional<unsigned> controller_;
    unsigned next_id_ = 1;
    bool stopping_ = false;
    std::uint64_t published_ = 0;
    std::thread thread_;
};

// ---------------------------------------------------------------------------
// Network transport: NDJSON over TCP and WebSocket on the same port, plus
// optional static files over HTTP GET.

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 7157;  // 0 picks a free port
    std::optional<std::filesystem::path> static_dir;
};

class PanelServer {
public:
    PanelServer(PanelService& service, ServerOptions options);
    PanelServer(const PanelServer&) = delete;
    PanelServer& operator=(const PanelServer&) = delete;
    ~PanelServer();

    unsigned short port() const { return port_; }
    void stop();

private:
    void accept_loop();
    void serve_connection(int fd);

    PanelService& service_;
    ServerOptions options_;
    int listen_fd_ = -1;
    unsigned short port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex conn_mutex_;
    std::vector<std::thread> connections_;
    std::vector<int> open_fds_;
};

/// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept_key(std::string_view client_key);

// ---------------------------------------------------------------------------
// CLI

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mr::console
