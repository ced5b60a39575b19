#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pipl/cli.hpp"

using namespace pipl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "pipl_test_cli" / name;
    fs::remove_all(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

int run_config(const std::string& kind, const std::string& text, const fs::path& out, bool check = false,
               std::optional<std::uint64_t> seed = std::nullopt) {
    RunOptions o;
    o.kind = kind;
    o.out_dir = out.string();
    o.check = check;
    o.seed = seed;
    std::ostringstream log;
    return run_text(o, text, log);
}

const std::string kForward = R"ini(
[grid]
nodes = 33
time_steps = 32
horizon = 0.1
[solver]
scheme = crank-nicolson
[data]
initial = "sin(pi*x)"   # heat oracle
oracle = "exp(-pi^2*t)*sin(pi*x)"
)ini";

}  // namespace

TEST_CASE("config: sections, comments, quotes and typed getters") {
    auto c = Config::parse("; leading comment\n[a]\nx = 1.5\nlist = 1, 2 3\ns = \"has # inside\"  # trailing\n"
                           "b = yes\n[b]\nn = 4\n");
    CHECK(c.number("a", "x") == 1.5);
    CHECK(c.numbers("a", "list", {}) == std::vector<double>{1, 2, 3});
    CHECK(c.text("a", "s") == "has # inside");
    CHECK(c.flag("a", "b", false));
    CHECK(c.integer("b", "n", 0) == 4);
    CHECK(c.number("b", "missing", 2.5) == 2.5);
    auto r = c.resolved();
    CHECK(r["b"]["missing"] == 2.5);
    CHECK(r["a"]["list"].size() == 3);
    CHECK(c.raw()["a"]["x"] == "1.5");
    CHECK(c.has("b"));
    CHECK_FALSE(c.has("c", "x"));
}

TEST_CASE("config: malformed text reports the line") {
    auto line_of = [](const std::string& text) {
        try {
            Config::parse(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("x = 1\n") == 1);
    CHECK(line_of("[a]\nx = 1\nx = 2\n") == 3);
    CHECK(line_of("[a\n") == 1);
    CHECK(line_of("[a]\ny = \"open\n") == 2);
    CHECK(line_of("[a]\nno equals sign\n") == 2);
    auto c = Config::parse("[a]\nn = 1.5\nf = maybe\nv = 1, x\n");
    CHECK_THROWS_AS(c.integer("a", "n", 0), ConfigError);
    CHECK_THROWS_AS(c.flag("a", "f", false), ConfigError);
    CHECK_THROWS_AS(c.numbers("a", "v", {}), ConfigError);
    CHECK_THROWS_AS(c.number("a", "absent"), ConfigError);
}

TEST_CASE("config: expression errors carry the byte offset") {
    auto c = Config::parse("[data]\n\ninitial = \"2*sin(x\"\n");
    try {
        c.expr("data", "initial");
        FAIL("expected a parse failure");
    } catch (const ConfigExprError& e) {
        CHECK(e.offset() == 7);
        CHECK(e.line() == 3);
        CHECK(e.section() == "data");
        CHECK(e.key() == "initial");
    }
}

TEST_CASE("csv table and number formatting") {
    CsvTable t{{"a", "b"}, {}};
    std::ostringstream empty;
    t.write(empty);
    CHECK(empty.str() == "a,b\n");
    CHECK_THROWS_AS(t.add({"1"}), InvalidInput);
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02e23}) CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("run: minimal forward config writes the solution and the oracle error") {
    auto out = scratch("forward");
    CHECK(run_config("forward", kForward, out) == kExitOk);
    CHECK(fs::exists(out / "solution.csv"));
    auto m = read_json(out / "manifest.json");
    CHECK(m["kind"] == "forward");
    CHECK(m["version"] == kToolVersion);
    CHECK(m["results"]["oracle_l2q_error"].get<double>() < 1e-3);
    CHECK(m["config"]["grid"]["nodes"].size() == 1);
    CHECK(m["config"]["solver"]["tol"].is_number());
    CHECK(m["timing"]["wall_seconds"].get<double>() >= 0.0);
    CHECK(m.contains("seed"));
}

TEST_CASE("run: check mode exits 4 on an unresolved CGO sweep") {
    const std::string text = R"ini(
[grid]
nodes = 9
time_steps = 8
[cgo-verify]
q = "2*exp(-20*(x-0.5)^2)"
rhos = 64, 128, 256, 512
)ini";
    auto out = scratch("cgo");
    CHECK(run_config("cgo-verify", text, out) == kExitOk);
    CHECK(run_config("cgo-verify", text, out, true) == kExitCheck);
    auto m = read_json(out / "manifest.json");
    CHECK(m["checks_passed"] == false);
    CHECK(fs::exists(out / "remainder.csv"));
}

TEST_CASE("run: parse, configuration and solver failures map to exit codes") {
    auto out = scratch("errors");
    CHECK(run_config("forward", "[data]\ninitial = \"sin(pi*x\"\n", out) == kExitParse);
    auto e = read_json(out / "error.json");
    CHECK(e["category"] == "parse");
    CHECK(e["byte_offset"] == 8);
    CHECK(e["exit_code"] == 2);

    CHECK(run_config("forward", "[grid]\ndim = 3\n", out) == kExitParse);
    CHECK(run_config("no-such-kind", kForward, out) == kExitParse);
    CHECK(run_config("forward", "[experiment]\nkind = dnmap\n", out) == kExitParse);
    CHECK(run_config("forward", "[solver]\nscheme = leapfrog\n", out) == kExitParse);

    const std::string stuck = R"ini(
[grid]
nodes = 17
time_steps = 8
[model]
nonlinearity = "u^3"
class = A_T
[solver]
strategy = picard
max_iter = 1
tol = 1e-14
[data]
initial = "5*sin(pi*x)"
)ini";
    CHECK(run_config("forward", stuck, out) == kExitSolver);
    CHECK(read_json(out / "error.json")["category"] == "solver");
    CHECK(run_config("forward", kForward, out) == kExitOk);
    CHECK_FALSE(fs::exists(out / "error.json"));
}

TEST_CASE("run: same config and seed give identical manifests apart from timing") {
    const std::string text = R"ini(
[experiment]
seed = 3
[grid]
nodes = 33
time_steps = 32
horizon = 0.1
[data]
initial = "sin(pi*x)"
[dnmap]
noise = gaussian-relative
noise_level = 0.01
)ini";
    auto a = scratch("repro_a"), b = scratch("repro_b"), c = scratch("repro_c");
    REQUIRE(run_config("dnmap", text, a, false, 11) == kExitOk);
    REQUIRE(run_config("dnmap", text, b, false, 11) == kExitOk);
    REQUIRE(run_config("dnmap", text, c) == kExitOk);
    auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json"), mc = read_json(c / "manifest.json");
    CHECK(ma["seed"] == 11);
    CHECK(mc["seed"] == 3);
    ma.erase("timing");
    mb.erase("timing");
    CHECK(ma.dump() == mb.dump());
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(a / "dn.csv") == slurp(b / "dn.csv"));
    CHECK(slurp(a / "dn.csv") != slurp(c / "dn.csv"));
}

TEST_CASE("run: the manifest is enough to re-run the experiment") {
    auto out = scratch("rerun");
    REQUIRE(run_config("forward", kForward, out) == kExitOk);
    auto m = read_json(out / "manifest.json");
    std::ostringstream text;
    for (const auto& [section, keys] : m["source_config"].items()) {
        text << '[' << section << "]\n";
        for (const auto& [k, v] : keys.items()) text << k << " = \"" << v.get<std::string>() << "\"\n";
    }
    auto again = scratch("rerun2");
    REQUIRE(run_config("forward", text.str(), again) == kExitOk);
    auto m2 = read_json(again / "manifest.json");
    CHECK(m2["results"] == m["results"]);
}

TEST_CASE("shipped example configurations parse and name known sections") {
    const fs::path dir = fs::path(PIPL_SOURCE_DIR) / "tools" / "configs";
    int count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".ini") continue;
        std::ifstream in(entry.path());
        std::stringstream ss;
        ss << in.rdbuf();
        auto c = Config::parse(ss.str());
        CHECK(c.has("grid"));
        ++count;
    }
    CHECK(count >= static_cast<int>(experiment_kinds().size()));
}
