#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nsopen/errors.hpp"
#include "nsopen/experiments.hpp"

namespace {

void write_json(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& j) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw nsopen::IoError("cannot create output directory " + dir.string());
    std::ofstream out(dir / name);
    if (!out) throw nsopen::IoError("cannot write " + (dir / name).string());
    out << j.dump(2) << "\n";
}

int simulate(const nsopen::ExperimentConfig& cfg, const std::string& out, bool global) {
    auto result = global ? nsopen::run_global(cfg) : nsopen::run_local(cfg);
    nsopen::emit_report(result, out);
    for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
    if (result.fit)
        std::cout << "fit: C=" << result.fit->c_fit << " Lambda=" << result.fit->lambda_fit << " R2=" << result.fit->r2
                  << "\n";
    std::cout << (result.verdict.pass() ? "PASS" : "FAIL") << "\n";
    return result.exit_code();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical lab for nonstationary open dynamical systems"};
    app.require_subcommand(1);
    std::string config, out;
    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory")->required();
        return sub;
    };
    auto* local = add("simulate-local", "Memory-loss run near a base map");
    auto* global = add("simulate-global", "Quasi-static traversal of a curve of maps");
    auto* mixing = add("certify-mixing", "Mixing times and sampled stability of the partition family");
    auto* ly = add("certify-ly", "Empirical Lasota-Yorke constants");
    auto* select = add("select-params", "Cone parameters from LY and mixing certificates");
    auto* constants = add("constants", "Full certification and rate constants");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        auto cfg = nsopen::ExperimentConfig::load(config);
        if (local->parsed()) return simulate(cfg, out, false);
        if (global->parsed()) return simulate(cfg, out, true);

        nsopen::OperatorCache cache;
        const auto base = nsopen::config_base_map(cfg);
        const auto seq = nsopen::local_sequence(cfg, base, cfg.horizon);
        const auto holes = nsopen::config_holes(cfg, cfg.horizon);
        if (mixing->parsed()) {
            auto j = nsopen::certify_mixing(cfg, base, cache);
            write_json(out, "mixing.json", j);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (ly->parsed()) {
            auto cert = nsopen::certify_ly(cfg, seq, holes, cache);
            write_json(out, "lasota_yorke.json", cert.to_json());
            std::cout << "theta=" << cert.theta << " C=" << cert.C << "\n";
            return 0;
        }
        if (select->parsed()) {
            auto cert = nsopen::certify_ly(cfg, seq, holes, cache);
            auto cp = nsopen::select_for(cfg, base, cert, cache);
            write_json(out, "cone_params.json", cp.to_json());
            std::cout << "a=" << cp.a << " T=" << cp.T << " E=" << cp.E << " elements=" << cp.partition->size() << "\n";
            return 0;
        }
        if (constants->parsed()) {
            auto c = nsopen::certify(cfg, base, seq, holes, cache);
            write_json(out, "constants.json", c.to_json());
            std::cout << "C0=" << c.constants.c0 << " Lambda=" << c.constants.lambda << "\n";
            return c.certified() ? 0 : 2;
        }
    } catch (const nsopen::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const nsopen::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const nsopen::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const nsopen::TotalEscapeError& e) {
        std::cerr << "total escape at step " << e.step() << "\n";
        return 2;
    } catch (const nsopen::CertificationError& e) {
        std::cerr << "certification failed: " << e.what() << " [" << e.witness() << "]\n";
        return 2;
    } catch (const nsopen::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
