#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pipl/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Inverse boundary problems for semilinear parabolic equations"};
    app.set_version_flag("--version", pipl::kToolVersion);
    pipl::RunOptions opt;
    app.add_option("kind", opt.kind, "experiment kind")
        ->required()
        ->check(CLI::IsMember(pipl::experiment_kinds()));
    app.add_option("--config", opt.config_path, "configuration file")->required();
    app.add_flag("--check", opt.check, "exit 4 when an acceptance threshold fails");
    app.add_option("--jobs", opt.jobs, "worker cap")->check(CLI::PositiveNumber);
    app.add_option("--out", opt.out_dir, "output directory (overrides the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pipl::kExitParse;
    }
    if (const char* s = std::getenv("PIPL_SEED")) {
        try {
            std::size_t used = 0;
            unsigned long long v = std::stoull(s, &used);
            if (used != std::string(s).size()) throw std::invalid_argument("trailing characters");
            opt.seed = v;
        } catch (const std::exception&) {
            std::cerr << R"({"category":"config","message":"PIPL_SEED is not a nonnegative integer","exit_code":2})"
                      << '\n';
            return pipl::kExitParse;
        }
    }
    return pipl::run(opt, std::cerr);
}
