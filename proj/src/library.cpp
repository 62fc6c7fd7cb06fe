#include "mr/machine.hpp"
#include "mr/toolchain.hpp"

#include <cstdlib>

namespace mr::toolchain {

std::filesystem::path data_dir()
{
    if (const char* env = std::getenv("MR_DATA_DIR"); env && *env)
        return env;
    return MR_SOURCE_DIR;
}

AssemblyOutput load_arith_library()
{
    return assemble_file(data_dir() / "lib" / "arith.mra");
}

std::vector<ArithResult> run_subroutine_suite(Machine& machine, const AssemblyOutput& library,
                                              std::span<const std::pair<std::int32_t, std::int32_t>> operands)
{
    const auto cell = [&](const char* name) { return static_cast<Address>(library.symbol(name)); };
    const Address opa = cell("OPA"), opb = cell("OPB"), prod = cell("PROD"), quot = cell("QUOT"),
                  rem = cell("REM"), dvz = cell("DVZ"), entry = cell("MAIN");

    machine.reset();
    machine.boot_load(library.tape);

    std::vector<ArithResult> results;
    results.reserve(operands.size());
    for (const auto& [a, b] : operands) {
        machine.deposit(opa, Word::from_signed(a));
        machine.deposit(opb, Word::from_signed(b));
        machine.set_pc(entry);
        const auto t0 = machine.state().sim_time_us;
        const auto n0 = machine.state().instructions;
        machine.start();
        const auto report = machine.run(RunLimits{100'000, 3'600'000'000ull});
        if (report.reason != StopReason::halted)
            throw Error("library run for " + std::to_string(a) + ", " + std::to_string(b) +
                        " stopped: " + std::string(to_string(report.reason)));
        ArithResult r;
        r.a = a;
        r.b = b;
        r.product = machine.examine(prod).to_signed();
        r.quotient = machine.examine(quot).to_signed();
        r.remainder = machine.examine(rem).to_signed();
        r.divide_by_zero = machine.examine(dvz).value() != 0;
        r.instructions = machine.state().instructions - n0;
        r.sim_us = machine.state().sim_time_us - t0;
        results.push_back(r);
    }
    return results;
}

} // namespace mr::toolchain
