#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "formctrl/serialize.hpp"
#include "formctrl/version.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

#ifndef FORMCTRL_CLI_PATH
#error "FORMCTRL_CLI_PATH must point at the built binary"
#endif

const std::string kCli = FORMCTRL_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "formctrl_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run(const std::string& args) {
    const fs::path out = work_dir() / "stdout.txt";
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd =
        kCli + " " + args + " > " + out.string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
}

json load(const fs::path& p) { return formctrl::load_json_file(p.string()); }

void write_two_step(const fs::path& p) {
    std::ofstream f(p);
    f << R"({"T": 2.0, "channels": 1, "class": "piecewise_constant",
             "breakpoints": [0.0, 1.0, 2.0],
             "segments": [{"const": [0.2]}, {"const": [0.9]}]})";
}

json strip_timing(json j) {
    j.erase("timing");
    return j;
}

}  // namespace

TEST_CASE("version reports the frozen schema identifier", "[cli]") {
    const RunResult r = run("version");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("report schema 1") != std::string::npos);
    CHECK(formctrl::report_schema_version() == "1");
}

TEST_CASE("model then simulate round trip", "[cli]") {
    const fs::path sys = work_dir() / "sys.json";
    const fs::path sched = work_dir() / "sched.json";
    const fs::path rep = work_dir() / "sim.json";
    REQUIRE(run("model --kind oscillator --dim 8 --out " + sys.string()).exit_code == 0);
    write_two_step(sched);
    const RunResult r = run("simulate --system " + sys.string() + " --schedule " +
                            sched.string() + " --target 1 --out " + rep.string());
    REQUIRE(r.exit_code == 0);
    const json report = load(rep);
    CHECK(report.at("schema_version").get<std::string>() == "1");
    CHECK(report.at("t_grid").size() == 101);
    for (const json& n : report.at("state_norms"))
        CHECK(std::abs(n.get<double>() - 1.0) < 1e-9);
    CHECK(report.contains("fidelity_to_target"));

    // The system file itself round-trips structurally.
    const json sys_json = load(sys);
    const auto reparsed = formctrl::system_to_json(formctrl::system_from_json(sys_json),
                                                   sys_json.at("model"));
    CHECK(reparsed == sys_json);
}

TEST_CASE("malformed JSON exits with a configuration error and a line diagnostic",
          "[cli]") {
    const fs::path bad = work_dir() / "bad.json";
    {
        std::ofstream f(bad);
        f << "{\n  \"dim\": 4,\n  oops\n}\n";
    }
    const RunResult r = run("simulate --system " + bad.string() + " --schedule " + bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("bad.json:3") != std::string::npos);  // offending line is named

    const RunResult missing = run("certify --kind stability --system nope.json --trials 1");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("certify with identical schedules emits one passing trivial certificate",
          "[cli]") {
    const fs::path sys = work_dir() / "sys_cert.json";
    const fs::path sched = work_dir() / "sched_cert.json";
    const fs::path rep = work_dir() / "cert.json";
    REQUIRE(run("model --kind oscillator --dim 6 --out " + sys.string()).exit_code == 0);
    write_two_step(sched);
    const RunResult r = run("certify --kind stability --system " + sys.string() +
                            " --schedules " + sched.string() + " " + sched.string() + " --out " +
                            rep.string());
    REQUIRE(r.exit_code == 0);
    const json report = load(rep);
    REQUIRE(report.at("certificates").size() == 1);
    const json& cert = report.at("certificates")[0];
    CHECK(cert.at("pass").get<bool>());
    CHECK(cert.at("lhs").get<double>() < 1e-10);
    // rhs is recomputable from constants and provenance.
    const double L = cert.at("constants").at("L").get<double>();
    const double integral = cert.at("provenance").at("integral_h_diff").get<double>();
    CHECK(std::abs(cert.at("rhs").get<double>() - L * integral) < 1e-10);
}

TEST_CASE("randomized certify without a seed is a configuration error", "[cli]") {
    const fs::path sys = work_dir() / "sys_seed.json";
    REQUIRE(run("model --kind oscillator --dim 6 --out " + sys.string()).exit_code == 0);
    const RunResult r =
        run("certify --kind resolvent_lipschitz --system " + sys.string() + " --trials 3");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("seed") != std::string::npos);
}

TEST_CASE("mollify-study shows halving distances and a constant derivative budget",
          "[cli]") {
    const fs::path sched = work_dir() / "sched_mol.json";
    const fs::path rep = work_dir() / "mol.json";
    write_two_step(sched);
    const RunResult r = run("mollify-study --schedule " + sched.string() +
                            " --deltas 0.2,0.1,0.05 --out " + rep.string());
    REQUIRE(r.exit_code == 0);
    const json report = load(rep);
    const auto& rows = report.at("rows");
    REQUIRE(rows.size() == 3);
    const double tv = report.at("total_variation")[0].get<double>();
    CHECK(tv == Catch::Approx(0.7).margin(1e-12));
    for (int k = 0; k < 3; ++k)
        CHECK(rows[k].at("derivative_l1")[0].get<double>() ==
              Catch::Approx(tv).margin(1e-9));
    const double d0 = rows[0].at("l1_distance")[0].get<double>();
    const double d1 = rows[1].at("l1_distance")[0].get<double>();
    const double d2 = rows[2].at("l1_distance")[0].get<double>();
    CHECK(d0 == Catch::Approx(2.0 * d1).epsilon(1e-8));
    CHECK(d1 == Catch::Approx(2.0 * d2).epsilon(1e-8));
}

TEST_CASE("reports are reproducible up to timing fields", "[cli]") {
    const fs::path sys = work_dir() / "sys_rep.json";
    const fs::path rep1 = work_dir() / "r1.json";
    const fs::path rep2 = work_dir() / "r2.json";
    REQUIRE(run("model --kind oscillator --dim 6 --out " + sys.string()).exit_code == 0);
    const std::string base = "certify --kind resolvent_lipschitz --system " + sys.string() +
                             " --trials 8 --seed 12345 --out ";
    REQUIRE(run(base + rep1.string()).exit_code == 0);
    REQUIRE(run(base + rep2.string()).exit_code == 0);
    CHECK(strip_timing(load(rep1)) == strip_timing(load(rep2)));
}

TEST_CASE("report layout is pinned to schema version 1", "[cli]") {
    const fs::path sys = work_dir() / "sys_schema.json";
    const fs::path rep = work_dir() / "schema.json";
    REQUIRE(run("model --kind box --dim 4 --out " + sys.string()).exit_code == 0);
    REQUIRE(run("certify --kind resolvent_lipschitz --system " + sys.string() +
                " --trials 2 --seed 7 --out " + rep.string())
                .exit_code == 0);
    const json report = load(rep);
    // Contract: these keys exist under schema "1"; a layout change must bump it.
    for (const char* key :
         {"schema_version", "tool_version", "command", "config", "rng", "certificates",
          "all_pass", "timing"})
        CHECK(report.contains(key));
    CHECK(report.at("schema_version").get<std::string>() == "1");
    const json& cert = report.at("certificates")[0];
    for (const char* key : {"kind", "lhs", "rhs", "margin", "pass", "constants", "provenance"})
        CHECK(cert.contains(key));
}

TEST_CASE("constants refuse a stored L that contradicts c and M", "[cli]") {
    const formctrl::SystemConstants k = formctrl::SystemConstants::make(0.0, 1.2, 0.3);
    json j = formctrl::constants_to_json(k);
    CHECK(formctrl::constants_from_json(j).L == k.L);
    j["L"] = k.L * 1.001;
    REQUIRE_THROWS_AS(formctrl::constants_from_json(j), std::invalid_argument);
}

TEST_CASE("synthesize writes a replayable schedule", "[cli][slow]") {
    const fs::path sys = work_dir() / "sys_synth.json";
    const fs::path rep = work_dir() / "synth.json";
    const fs::path sched = work_dir() / "pulse.json";
    REQUIRE(run("model --kind oscillator --dim 8 --out " + sys.string()).exit_code == 0);
    const RunResult r = run("synthesize --system " + sys.string() +
                            " --rank 2 --phi 0 --psi 1 --epsilon 1e-3 --budget 10 --segments 6 "
                            "--tmax 8 --seed 42 --restarts 4 --sweeps 300 --out " +
                            rep.string() + " --schedule-out " + sched.string());
    REQUIRE(r.exit_code == 0);
    const json report = load(rep);
    CHECK(report.at("result").at("success").get<bool>());
    CHECK(report.at("result").at("infidelity").get<double>() <= 1e-6);
    // The written schedule file parses back into the same pulse.
    const json pulse = load(sched);
    CHECK(pulse == report.at("result").at("schedule"));
}
