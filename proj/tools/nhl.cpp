#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "nhl/error.hpp"
#include "nhl/experiments.hpp"

namespace {

void print_error(const std::string& code, const std::string& message) {
    std::cerr << nhl::json{{"error", code}, {"message", message}}.dump() << std::endl;
}

nhl::json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) nhl::fail("io_error", "cannot open config '" + path + "'");
    try {
        return nhl::json::parse(in);
    } catch (const nhl::json::parse_error& e) {
        nhl::fail("invalid_argument", "config '" + path + "' is not valid JSON: " + e.what());
    }
}

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

struct Subcommand {
    CLI::App* app = nullptr;
    std::string config_path;
    std::string seed;
    std::string out;
    bool dry_run = false;
    std::map<std::string, std::string> values;  // key -> raw flag text
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-width and mean-field experiments on multi-layer networks"};
    app.require_subcommand(1);
    std::map<std::string, Subcommand> subs;

    for (const auto& name : nhl::experiment_names()) {
        Subcommand& sub = subs[name];
        sub.app = app.add_subcommand(name, "run the " + name + " experiment");
        sub.app->add_option("--config", sub.config_path, "flat JSON config file");
        sub.app->add_option("--seed", sub.seed, "master seed (u64)");
        sub.app->add_option("--out", sub.out, "output directory");
        sub.app->add_flag("--dry-run", sub.dry_run, "print the resolved config and exit");
        const nhl::json defaults = nhl::default_params(name);
        for (const auto& [key, value] : defaults.items()) {
            std::string names = "--" + flag_name(key);
            if (flag_name(key) != key) names += ",--" + key;
            sub.app->add_option(names, sub.values[key], "default " + value.dump());
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        for (auto& [name, sub] : subs) {
            if (!sub.app->parsed()) continue;
            const nhl::json file = sub.config_path.empty() ? nhl::json() : read_config_file(sub.config_path);
            nhl::json overrides = nhl::json::object();
            for (const auto& [key, text] : sub.values)
                if (sub.app->count("--" + flag_name(key)) > 0) overrides[key] = nhl::parse_flag_value(name, key, text);
            if (!sub.seed.empty()) {
                std::size_t used = 0;
                unsigned long long s = 0;
                try {
                    s = std::stoull(sub.seed, &used);
                } catch (const std::logic_error&) {
                    used = 0;
                }
                if (used == 0 || used != sub.seed.size() || sub.seed[0] == '-')
                    nhl::fail("invalid_argument", "--seed expects an unsigned 64-bit integer, got '" + sub.seed + "'");
                overrides["seed"] = static_cast<std::uint64_t>(s);
            }
            if (!sub.out.empty()) overrides["out"] = sub.out;

            const nhl::RunConfig cfg = nhl::resolve_config(name, file, overrides);
            if (sub.dry_run) {
                std::cout << nhl::json{{"experiment", cfg.experiment},
                                       {"seed", cfg.seed},
                                       {"out", cfg.out_dir.string()},
                                       {"config", cfg.params}}
                                 .dump(2)
                          << std::endl;
                return 0;
            }
            const nhl::RunOutput out = nhl::run_experiment(cfg);
            std::cout << nhl::json{{"experiment", name}, {"out", cfg.out_dir.string()}, {"results", out.results}}.dump()
                      << std::endl;
        }
    } catch (const nhl::Error& e) {
        print_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
