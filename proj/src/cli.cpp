#include "mr/console.hpp"
#include "mr/toolchain.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace mr::console {

namespace {

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view data)
{
    std::ofstream out(p, std::ios::binary);
    if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size())))
        throw Error("cannot write " + p.string());
}

Address parse_address_option(const std::string& text, const char* what)
{
    auto v = parse_octal(text);
    if (!v || *v > kAddressMask)
        throw Error(std::string(what) + " must be an octal address 0..1777, got '" + text + "'");
    return static_cast<Address>(*v);
}

struct CommonOptions {
    std::string rom_path;
    std::string isa_path;

    isa::IsaTable table() const
    {
        return isa_path.empty() ? isa::default_isa_table() : isa::load_isa_table(read_file(isa_path));
    }

    std::unique_ptr<Machine> machine() const
    {
        micro::MicroRom rom = rom_path.empty() ? micro::default_rom() : micro::load_rom(read_file(rom_path));
        return std::make_unique<Machine>(MachineConfig{}, table(), std::move(rom));
    }
};

struct Program {
    dev::TapeImage tape;
    std::optional<Address> start;
};

Program load_program(const std::filesystem::path& path, const isa::IsaTable& table)
{
    Program p;
    if (path.extension() == ".mra") {
        auto out = toolchain::assemble(read_file(path), table, path.filename().string());
        p.tape = std::move(out.tape);
        p.start = out.start;
    } else {
        p.tape = dev::read_tape_file(path);
    }
    return p;
}

struct RunOptions {
    std::string program;
    std::uint64_t max_instr = RunLimits{}.max_instructions;
    std::uint64_t max_us = RunLimits{}.max_sim_us;
    std::string start;
    std::vector<std::string> mounts;  // CH=FILE
    std::string state_out;
    std::string punch_out;
    bool print_state = false;
};

void add_run_options(CLI::App* sub, RunOptions& o)
{
    sub->add_option("program", o.program, "Program: .mra source or .mrt tape");
    sub->add_option("--tape", o.program, "Boot tape (.mrt) or source (.mra)");
    sub->add_option("--max-instr", o.max_instr, "Instruction limit")->check(CLI::PositiveNumber);
    sub->add_option("--max-us", o.max_us, "Simulated time limit in microseconds")->check(CLI::PositiveNumber);
    sub->add_option("--start", o.start, "Start address (octal); default: END operand or 0");
    sub->add_option("--mount", o.mounts, "Mount a tape on a reader channel: CH=FILE");
    sub->add_option("--state-out", o.state_out, "Write the final MR-STATE snapshot here");
    sub->add_option("--punch-out", o.punch_out, "Write punched output (channel 2) as .mrt");
    sub->add_flag("--print-state", o.print_state, "Print the final MR-STATE snapshot after the output");
}

// Boots and starts the machine for `run` and `trace`.
void prepare(Machine& m, const RunOptions& o)
{
    if (o.program.empty())
        throw Error("no program given");
    const Program p = load_program(o.program, m.isa());
    m.devices().mount(dev::kBootChannel, p.tape);
    m.boot_from_reader(dev::kBootChannel);
    for (const auto& spec : o.mounts) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw Error("--mount expects CH=FILE, got '" + spec + "'");
        const unsigned ch = static_cast<unsigned>(std::stoul(spec.substr(0, eq)));
        const std::filesystem::path file = spec.substr(eq + 1);
        m.devices().mount(ch, load_program(file, m.isa()).tape);
    }
    Address start = p.start.value_or(0);
    if (!o.start.empty())
        start = parse_address_option(o.start, "--start");
    m.set_pc(start);
    m.start();
}

int finish(Machine& m, const RunReport& r, const RunOptions& o, std::ostream& out, std::ostream& err)
{
    for (unsigned ch : {0u, 1u})
        out << m.devices().printed_text(ch);
    if (o.print_state)
        out << format_state(m.state());
    out.flush();
    if (!o.state_out.empty())
        write_file(o.state_out, format_state(m.state()));
    if (!o.punch_out.empty())
        dev::write_tape_file(o.punch_out, m.devices().punched_tape(2));
    err << to_string(r.reason) << " at pc " << address_to_string(m.state().pc) << " after " << r.instructions
        << " instructions, " << r.elapsed_us << " us simulated\n";
    return r.reason == StopReason::halted ? 0 : 3;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int)
{
    g_interrupted = true;
}

void dump_tape(const dev::TapeImage& tape, const isa::IsaTable& table, std::ostream& out)
{
    out << "tape: " << tape.frames.size() << " frames\n";
    std::vector<Word> words;
    try {
        words = dev::decode_tape(tape);
    } catch (const dev::TapeError& e) {
        out << "not a word tape (" << e.what() << "); frames:\n";
        for (std::size_t i = 0; i < tape.frames.size(); ++i)
            out << std::setw(2) << std::setfill('0') << std::oct << unsigned(tape.frames[i])
                << ((i + 1) % 16 == 0 || i + 1 == tape.frames.size() ? '\n' : ' ');
        out << std::dec << std::setfill(' ');
        out << "as text: " << dev::decode_text(tape.frames) << '\n';
        return;
    }
    out << "words: " << words.size() << '\n';
    for (std::size_t i = 0; i < words.size(); ++i) {
        out << address_to_string(static_cast<Address>(i)) << "  ";
        for (unsigned k = 0; k < dev::kFramesPerWord; ++k)
            out << to_octal(tape.frames[i * dev::kFramesPerWord + k], 2) << ' ';
        out << ' ' << to_string(words[i]) << "  " << isa::disassemble(words[i], table) << '\n';
    }
}

void dump_state(const MachineState& s, const isa::IsaTable& table, std::ostream& out)
{
    out << "PC " << address_to_string(s.pc) << "  ACC " << to_string(s.acc) << "  IR " << to_string(s.ir)
        << "  MAR " << address_to_string(s.mar) << "  MDR " << to_string(s.mdr) << "  OVF " << (s.overflow ? 1 : 0)
        << '\n';
    out << "status " << to_string(s.status) << ", " << s.instructions << " instructions, " << s.sim_time_us
        << " us simulated\n";
    const auto bps = s.breakpoint_list();
    if (!bps.empty()) {
        out << "breakpoints:";
        for (Address a : bps)
            out << ' ' << address_to_string(a);
        out << '\n';
    }
    std::size_t zero = 0;
    for (std::size_t a = 0; a < kMemoryWords; ++a) {
        if (s.memory[a].value() == 0) {
            ++zero;
            continue;
        }
        out << address_to_string(static_cast<Address>(a)) << "  " << to_string(s.memory[a]) << "  "
            << isa::disassemble(s.memory[a], table) << '\n';
    }
    out << zero << " zero words not shown\n";
}

struct BenchFixture {
    const char* name;
    const char* description;
    Word fill;
};

constexpr std::array<BenchFixture, 3> kBenchFixtures{{
    {"add-loop", "every word is ADD 0000; the PC wraps around memory", Word(020000)},
    {"jump-loop", "JMP 0000 in every word", Word(0220000)},
    {"nop-loop", "NOP in every word", Word(0540000)},
}};

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Macchina Ridotta emulator and toolchain", "mrsim"};
    app.require_subcommand(1);
    app.fallthrough();
    CommonOptions common;
    app.add_option("--rom", common.rom_path, "Microcode ROM file");
    app.add_option("--isa", common.isa_path, "Instruction table file");

    // asm
    auto* asm_cmd = app.add_subcommand("asm", "Assemble a .mra source to a tape and listing");
    std::string asm_src, asm_out, asm_listing;
    bool asm_quiet = false;
    asm_cmd->add_option("source", asm_src, "Source file")->required();
    asm_cmd->add_option("-o,--output", asm_out, "Tape file (default: source with .mrt)");
    asm_cmd->add_option("-l,--listing", asm_listing, "Write the listing to a file instead of stdout");
    asm_cmd->add_flag("-q,--quiet", asm_quiet, "No listing");

    // run / trace
    auto* run_cmd = app.add_subcommand("run", "Boot a program and run it");
    RunOptions run_opts;
    add_run_options(run_cmd, run_opts);
    auto* trace_cmd = app.add_subcommand("trace", "Run, printing one line per instruction");
    RunOptions trace_opts;
    add_run_options(trace_cmd, trace_opts);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Report simulated instructions per second for a fixture");
    std::string bench_name;
    std::uint64_t bench_n = 1'000'000;
    bench_cmd->add_option("fixture", bench_name, "add-loop, jump-loop or nop-loop")->required();
    bench_cmd->add_option("--max-instr", bench_n, "Instructions to run")->check(CLI::PositiveNumber);

    // dump
    auto* dump_cmd = app.add_subcommand("dump", "Show a tape or state file");
    std::string dump_path;
    dump_cmd->add_option("file", dump_path, "A .mrt tape or MR-STATE file")->required();

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the panel service");
    std::string listen = "127.0.0.1:7157";
    double refresh_hz = 30.0;
    std::string static_dir, serve_tape;
    std::uint64_t slice = 1000;
    serve_cmd->add_option("--listen", listen, "host:port");
    serve_cmd->add_option("--refresh-hz", refresh_hz, "Snapshot cap while running")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--static", static_dir, "Serve files from this directory over HTTP");
    serve_cmd->add_option("--tape", serve_tape, "Boot this tape or source before serving");
    serve_cmd->add_option("--slice", slice, "Instructions between command checks")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*asm_cmd) {
            const auto table = common.table();
            const auto result = toolchain::assemble(read_file(asm_src), table, std::filesystem::path(asm_src).filename().string());
            const std::filesystem::path tape_path =
                asm_out.empty() ? std::filesystem::path(asm_src).replace_extension(".mrt") : std::filesystem::path(asm_out);
            dev::write_tape_file(tape_path, result.tape);
            const std::string listing = result.listing_text() + "\nSYMBOLS\n" + result.symbol_table_text();
            if (!asm_listing.empty())
                write_file(asm_listing, listing);
            else if (!asm_quiet)
                out << listing;
            err << tape_path.string() << ": " << result.tape.frames.size() / dev::kFramesPerWord << " words\n";
            return 0;
        }

        if (*run_cmd) {
            auto m = common.machine();
            prepare(*m, run_opts);
            const auto r = m->run(RunLimits{run_opts.max_instr, run_opts.max_us});
            return finish(*m, r, run_opts, out, err);
        }

        if (*trace_cmd) {
            auto m = common.machine();
            prepare(*m, trace_opts);
            m->set_trace([&](const StepReport& s) {
                std::string dis = isa::disassemble(s.instruction, m->isa());
                dis.resize(std::max<std::size_t>(dis.size(), 12), ' ');
                out << address_to_string(s.pc) << "  " << to_string(s.instruction) << "  " << dis
                    << "  acc=" << to_string(m->state().acc) << "  " << s.elapsed_us() << " us";
                if (s.warning)
                    out << "  ; " << *s.warning;
                out << '\n';
            });
            const auto r = m->run(RunLimits{trace_opts.max_instr, trace_opts.max_us});
            m->set_trace({});
            return finish(*m, r, trace_opts, out, err);
        }

        if (*bench_cmd) {
            const BenchFixture* fx = nullptr;
            for (const auto& f : kBenchFixtures)
                if (bench_name == f.name)
                    fx = &f;
            if (!fx) {
                err << "unknown fixture '" << bench_name << "'; choose from:";
                for (const auto& f : kBenchFixtures)
                    err << ' ' << f.name;
                err << '\n';
                return 1;
            }
            auto m = common.machine();
            for (Address a = 0; a < kMemoryWords; ++a)
                m->deposit(a, fx->fill);
            m->start();
            const auto wall0 = std::chrono::steady_clock::now();
            const auto r = m->run(RunLimits{bench_n, std::numeric_limits<std::uint64_t>::max()});
            const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - wall0;
            if (r.elapsed_us == 0)
                throw Error("fixture consumed no simulated time");
            const auto rate = r.instructions * 1'000'000ull / r.elapsed_us;
            out << rate << " instructions/sec (simulated)\n";
            err << fx->name << ": " << r.instructions << " instructions, " << r.elapsed_us << " us simulated, "
                << std::fixed << std::setprecision(3) << wall.count() << " s wall\n";
            return 0;
        }

        if (*dump_cmd) {
            const auto table = common.table();
            const std::string bytes = read_file(dump_path);
            if (bytes.rfind(dev::kTapeMagic, 0) == 0) {
                dump_tape(dev::from_mrt_bytes(bytes), table, out);
            } else if (bytes.rfind("MR-STATE", 0) == 0) {
                dump_state(parse_state(bytes), table, out);
            } else {
                throw Error(dump_path + ": neither an MRT1 tape nor an MR-STATE file");
            }
            return 0;
        }

        if (*serve_cmd) {
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos)
                throw Error("--listen expects host:port");
            ServerOptions so;
            so.host = listen.substr(0, colon);
            const unsigned long port = std::stoul(listen.substr(colon + 1));
            if (port > 65535)
                throw Error("port out of range");
            so.port = static_cast<unsigned short>(port);
            if (!static_dir.empty())
                so.static_dir = static_dir;

            auto m = common.machine();
            if (!serve_tape.empty()) {
                const auto p = load_program(serve_tape, m->isa());
                m->devices().mount(dev::kBootChannel, p.tape);
                m->boot_from_reader(dev::kBootChannel);
                m->set_pc(p.start.value_or(0));
            }
            ServiceOptions svc;
            svc.refresh_hz = refresh_hz;
            svc.slice_instructions = slice;
            PanelService service(*m, svc);
            PanelServer server(service, so);
            out << "listening on " << so.host << ':' << server.port() << std::endl;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_interrupted)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            service.shutdown();
            return 0;
        }
    } catch (const toolchain::AsmError& e) {
        err << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace mr::console
