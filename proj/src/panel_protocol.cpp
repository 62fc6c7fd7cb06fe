#include "mr/console.hpp"

#include <limits>

namespace mr::console {

namespace {

std::string octal_address(Address a) { return address_to_string(a); }

Address parse_address_field(const Json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end())
        throw CommandError("bad_argument", std::string("missing '") + key + "'");
    if (!it->is_string())
        throw CommandError("bad_argument", std::string("'") + key + "' must be an octal string");
    const auto text = it->get<std::string>();
    auto v = parse_octal(text);
    if (!v || text.size() > 4 || *v > kAddressMask)
        throw CommandError("bad_argument", std::string("'") + key + "' must be an octal address 0000..1777, got '" +
                                               text + "'");
    return static_cast<Address>(*v);
}

Word parse_word_text(const std::string& text, const char* what)
{
    auto v = parse_octal(text);
    if (!v || text.size() > 6 || *v > kWordMask)
        throw CommandError("bad_argument", std::string(what) + " must be an octal word 000000..777777, got '" + text +
                                               "'");
    return Word(*v);
}

unsigned parse_small_int(const Json& j, const char* key, unsigned max, std::optional<unsigned> fallback = {})
{
    auto it = j.find(key);
    if (it == j.end()) {
        if (fallback)
            return *fallback;
        throw CommandError("bad_argument", std::string("missing '") + key + "'");
    }
    if (!it->is_number_integer())
        throw CommandError("bad_argument", std::string("'") + key + "' must be an integer");
    const auto v = it->get<std::int64_t>();
    if (v < 0 || v > static_cast<std::int64_t>(max))
        throw CommandError("bad_argument",
                           std::string("'") + key + "' must be in 0.." + std::to_string(max) + ", got " + std::to_string(v));
    return static_cast<unsigned>(v);
}

void allow_only(const Json& j, std::initializer_list<const char*> keys)
{
    for (const auto& [k, v] : j.items()) {
        if (k == "cmd" || k == "id")
            continue;
        bool ok = false;
        for (const char* allowed : keys)
            ok = ok || k == allowed;
        if (!ok)
            throw CommandError("bad_argument", "unexpected field '" + k + "'");
    }
}

LastStep to_last_step(const StepReport& r, const isa::IsaTable& table)
{
    LastStep s;
    s.pc = r.pc;
    s.instruction = r.instruction;
    s.disassembly = isa::disassemble(r.instruction, table);
    s.microwords = r.microwords;
    s.microcode_us = r.microcode_us;
    s.device_us = r.device_us;
    s.warning = r.warning;
    return s;
}

} // namespace

std::string plane_row_bits(const PlaneView& v, unsigned y)
{
    std::string bits(kPlaneSide, '0');
    for (unsigned x = 0; x < kPlaneSide; ++x)
        if (v.lit(x, y))
            bits[x] = '1';
    return bits;
}

Json to_json(const PanelSnapshot& s)
{
    const MachineState& m = s.state;
    Json j;
    j["event"] = "state";
    j["seq"] = s.seq;
    j["pc"] = octal_address(m.pc);
    j["acc"] = to_string(m.acc);
    j["ir"] = to_string(m.ir);
    j["mar"] = octal_address(m.mar);
    j["mdr"] = to_string(m.mdr);
    j["overflow"] = m.overflow;
    j["status"] = std::string(to_string(m.status));
    j["phase"] = m.phase == Phase::fetch ? "fetch" : "execute";
    j["sim_time_us"] = m.sim_time_us;
    j["instructions"] = m.instructions;
    Json rows = Json::array();
    for (unsigned y = 0; y < kPlaneSide; ++y)
        rows.push_back(plane_row_bits(s.plane, y));
    j["plane"] = Json{{"index", s.plane.plane}, {"rows", std::move(rows)}};
    Json devices = Json::array();
    for (const auto& d : s.devices) {
        devices.push_back(Json{
            {"channel", d.spec.id},
            {"model", d.spec.model},
            {"kind", std::string(dev::to_string(d.spec.kind))},
            {"function", std::string(dev::to_string(d.spec.function))},
            {"rate_cps", d.spec.rate_cps},
            {"mounted", d.mounted},
            {"frames_total", d.frames_total},
            {"frames_remaining", d.frames_remaining},
            {"frames_output", d.frames_output},
        });
    }
    j["devices"] = std::move(devices);
    Json bps = Json::array();
    for (Address a : m.breakpoint_list())
        bps.push_back(octal_address(a));
    j["breakpoints"] = std::move(bps);
    if (s.last_step) {
        const auto& l = *s.last_step;
        j["last_step"] = Json{
            {"pc", octal_address(l.pc)},
            {"instruction", to_string(l.instruction)},
            {"disassembly", l.disassembly},
            {"microwords", l.microwords},
            {"microcode_us", l.microcode_us},
            {"device_us", l.device_us},
            {"warning", l.warning ? Json(*l.warning) : Json(nullptr)},
        };
    } else {
        j["last_step"] = nullptr;
    }
    return j;
}

std::string_view command_name(const PanelCommand& c)
{
    return std::visit(
        [](const auto& x) -> std::string_view {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, pc::Start>) return "start";
            else if constexpr (std::is_same_v<T, pc::Stop>) return "stop";
            else if constexpr (std::is_same_v<T, pc::StepInstruction>) return "step";
            else if constexpr (std::is_same_v<T, pc::StepMicro>) return "step_micro";
            else if constexpr (std::is_same_v<T, pc::Reset>) return "reset";
            else if constexpr (std::is_same_v<T, pc::Deposit>) return "deposit";
            else if constexpr (std::is_same_v<T, pc::Examine>) return "examine";
            else if constexpr (std::is_same_v<T, pc::SelectPlane>) return "select_plane";
            else if constexpr (std::is_same_v<T, pc::MountTape>) return "mount_tape";
            else if constexpr (std::is_same_v<T, pc::SetBreakpoint>) return "set_breakpoint";
            else if constexpr (std::is_same_v<T, pc::ClearBreakpoint>) return "clear_breakpoint";
            else return "boot";
        },
        c);
}

PanelCommand parse_command(const Json& j)
{
    if (!j.is_object())
        throw CommandError("malformed", "a command must be a JSON object");
    auto it = j.find("cmd");
    if (it == j.end() || !it->is_string())
        throw CommandError("malformed", "missing string field 'cmd'");
    const auto name = it->get<std::string>();

    if (name == "start") {
        allow_only(j, {});
        return pc::Start{};
    }
    if (name == "stop") {
        allow_only(j, {});
        return pc::Stop{};
    }
    if (name == "step" || name == "step_instruction") {
        allow_only(j, {});
        return pc::StepInstruction{};
    }
    if (name == "step_micro") {
        allow_only(j, {});
        return pc::StepMicro{};
    }
    if (name == "reset") {
        allow_only(j, {});
        return pc::Reset{};
    }
    if (name == "deposit") {
        allow_only(j, {"addr", "word"});
        const Address a = parse_address_field(j, "addr");
        auto w = j.find("word");
        if (w == j.end() || !w->is_string())
            throw CommandError("bad_argument", "'word' must be an octal string");
        return pc::Deposit{a, parse_word_text(w->get<std::string>(), "'word'")};
    }
    if (name == "examine") {
        allow_only(j, {"addr"});
        return pc::Examine{parse_address_field(j, "addr")};
    }
    if (name == "select_plane") {
        allow_only(j, {"plane"});
        return pc::SelectPlane{parse_small_int(j, "plane", kPlaneCount - 1)};
    }
    if (name == "set_breakpoint") {
        allow_only(j, {"addr"});
        return pc::SetBreakpoint{parse_address_field(j, "addr")};
    }
    if (name == "clear_breakpoint") {
        allow_only(j, {"addr"});
        return pc::ClearBreakpoint{parse_address_field(j, "addr")};
    }
    if (name == "boot") {
        allow_only(j, {"channel"});
        return pc::Boot{parse_small_int(j, "channel", dev::kChannelCount - 1, dev::kBootChannel)};
    }
    if (name == "mount_tape") {
        allow_only(j, {"channel", "frames", "words"});
        const unsigned channel = parse_small_int(j, "channel", dev::kChannelCount - 1);
        const bool has_frames = j.contains("frames"), has_words = j.contains("words");
        if (has_frames == has_words)
            throw CommandError("bad_argument", "mount_tape needs exactly one of 'frames' or 'words'");
        pc::MountTape m{channel, {}};
        m.tape.provenance = dev::Provenance::imported;
        m.tape.note = "panel";
        if (has_frames) {
            const auto& f = j["frames"];
            if (!f.is_array())
                throw CommandError("bad_argument", "'frames' must be an array");
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (!f[i].is_number_integer() || f[i].get<std::int64_t>() < 0 || f[i].get<std::int64_t>() > dev::kFrameMask)
                    throw CommandError("bad_argument", "frame " + std::to_string(i) + " is not in 0..31");
                m.tape.frames.push_back(static_cast<dev::Frame>(f[i].get<int>()));
            }
        } else {
            const auto& w = j["words"];
            if (!w.is_array())
                throw CommandError("bad_argument", "'words' must be an array");
            std::vector<Word> words;
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (!w[i].is_string())
                    throw CommandError("bad_argument", "word " + std::to_string(i) + " must be an octal string");
                words.push_back(parse_word_text(w[i].get<std::string>(), "word"));
            }
            m.tape = dev::encode_tape(words, dev::Provenance::imported, "panel");
        }
        return m;
    }
    throw CommandError("unknown_command", "unknown command '" + name + "'");
}

PanelCommand parse_command(std::string_view text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CommandError("malformed", std::string("not valid JSON: ") + e.what());
    }
    return parse_command(j);
}

Json to_json(const PanelCommand& c)
{
    Json j;
    j["cmd"] = std::string(command_name(c));
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, pc::Deposit>) {
                j["addr"] = octal_address(x.addr);
                j["word"] = to_string(x.word);
            } else if constexpr (std::is_same_v<T, pc::Examine> || std::is_same_v<T, pc::SetBreakpoint> ||
                                 std::is_same_v<T, pc::ClearBreakpoint>) {
                j["addr"] = octal_address(x.addr);
            } else if constexpr (std::is_same_v<T, pc::SelectPlane>) {
                j["plane"] = x.plane;
            } else if constexpr (std::is_same_v<T, pc::Boot>) {
                j["channel"] = x.channel;
            } else if constexpr (std::is_same_v<T, pc::MountTape>) {
                j["channel"] = x.channel;
                Json frames = Json::array();
                for (auto f : x.tape.frames)
                    frames.push_back(f);
                j["frames"] = std::move(frames);
            }
        },
        c);
    return j;
}

Json error_frame(const std::string& code, const std::string& message, const Json& id)
{
    Json j;
    j["event"] = "error";
    j["code"] = code;
    j["message"] = message;
    j["id"] = id;
    return j;
}

// ---------------------------------------------------------------------------

PanelSession::PanelSession(Machine& machine) : machine_(machine)
{
    machine_.set_trace([this](const StepReport& r) { last_step_ = to_last_step(r, machine_.isa()); });
}

PanelSession::~PanelSession()
{
    machine_.set_trace({});
}

PanelSession::Outcome PanelSession::apply(const PanelCommand& c)
{
    Outcome out;
    const auto refuse = [](const std::string& msg) { return CommandError("refused", msg); };
    try {
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, pc::Start>) {
                    if (running())
                        out.state_changed = false;
                    else
                        machine_.start();
                } else if constexpr (std::is_same_v<T, pc::Stop>) {
                    out.state_changed = running();
                    machine_.pause();
                } else if constexpr (std::is_same_v<T, pc::StepInstruction> || std::is_same_v<T, pc::StepMicro>) {
                    if (running())
                        throw refuse("cannot single-step while running");
                    machine_.start();
                    try {
                        if constexpr (std::is_same_v<T, pc::StepInstruction>)
                            machine_.step_instruction();
                        else
                            machine_.step_micro();
                    } catch (...) {
                        machine_.pause();
                        throw;
                    }
                    machine_.pause();
                } else if constexpr (std::is_same_v<T, pc::Reset>) {
                    machine_.reset();
                    last_step_.reset();
                } else if constexpr (std::is_same_v<T, pc::Deposit>) {
                    if (running())
                        throw refuse("stop the machine before depositing");
                    machine_.deposit(x.addr, x.word);
                } else if constexpr (std::is_same_v<T, pc::Examine>) {
                    out.state_changed = false;
                    Json r;
                    r["event"] = "examine";
                    r["addr"] = octal_address(x.addr);
                    r["word"] = to_string(machine_.examine(x.addr));
                    r["disassembly"] = isa::disassemble(machine_.examine(x.addr), machine_.isa());
                    out.reply = std::move(r);
                } else if constexpr (std::is_same_v<T, pc::SelectPlane>) {
                    plane_ = x.plane;
                } else if constexpr (std::is_same_v<T, pc::MountTape>) {
                    const auto& spec = machine_.devices().spec(x.channel);
                    if (!spec || spec->function != dev::Function::read)
                        throw refuse("channel " + std::to_string(x.channel) + " is not a tape reader");
                    machine_.post(cmd::MountTape{x.channel, x.tape});
                    machine_.drain_commands();
                } else if constexpr (std::is_same_v<T, pc::SetBreakpoint>) {
                    machine_.post(cmd::SetBreakpoint{x.addr});
                    machine_.drain_commands();
                } else if constexpr (std::is_same_v<T, pc::ClearBreakpoint>) {
                    machine_.post(cmd::ClearBreakpoint{x.addr});
                    machine_.drain_commands();
                } else if constexpr (std::is_same_v<T, pc::Boot>) {
                    if (machine_.state().status != Status::halted)
                        throw refuse("boot requires a halted machine");
                    machine_.boot_from_reader(x.channel);
                }
            },
            c);
    } catch (const CommandError&) {
        throw;
    } catch (const Error& e) {
        throw refuse(e.what());
    }
    return out;
}

RunReport PanelSession::run_slice(std::uint64_t instructions)
{
    if (!running())
        return RunReport{StopReason::stop_requested, 0, 0};
    const auto report = machine_.run(RunLimits{instructions, std::numeric_limits<std::uint64_t>::max()});
    if (report.reason == StopReason::instruction_limit)
        machine_.start();
    return report;
}

PanelSnapshot PanelSession::snapshot()
{
    ++seq_;
    return current();
}

PanelSnapshot PanelSession::current() const
{
    PanelSnapshot s;
    s.seq = seq_;
    s.state = machine_.snapshot();
    s.plane = machine_.plane_view(plane_);
    s.devices = machine_.devices().status();
    s.last_step = last_step_;
    return s;
}

std::vector<PanelSnapshot> run_script(Machine& machine, const std::vector<PanelCommand>& script, RunLimits limits)
{
    PanelSession session(machine);
    std::vector<PanelSnapshot> out;
    for (const auto& c : script) {
        try {
            session.apply(c);
        } catch (const CommandError&) {
            // A refused command leaves the machine as it was; the snapshot shows that.
        }
        std::uint64_t executed = 0;
        const std::uint64_t t0 = machine.state().sim_time_us;
        while (session.running()) {
            if (executed >= limits.max_instructions || machine.state().sim_time_us - t0 >= limits.max_sim_us) {
                machine.pause();
                break;
            }
            try {
                executed += session.run_slice(std::min<std::uint64_t>(1000, limits.max_instructions - executed)).instructions;
            } catch (const MachineFault&) {
                break;
            }
        }
        out.push_back(session.snapshot());
    }
    return out;
}

} // namespace mr::console
