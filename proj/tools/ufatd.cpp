#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ufatd/commands.hpp"
#include "ufatd/config.hpp"
#include "ufatd/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Row-anchor track detection: anchors, synthetic data, training, evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "run config file (key = value lines)");
    app.add_option("-s,--set", overrides, "override a config key, e.g. --set model.h=12")->take_all();

    auto* gen = app.add_subcommand("gen-anchors", "write anchor groups from the training labels");
    auto* synth = app.add_subcommand("synth", "render the synthetic dataset");
    auto* enc = app.add_subcommand("encode", "write grid targets of a split for inspection");
    auto* trn = app.add_subcommand("train", "train and keep the best checkpoint");
    auto* inf = app.add_subcommand("infer", "write decoded predictions for a split");
    auto* ev = app.add_subcommand("eval", "score predictions of a split");
    std::string pred_dir;
    ev->add_option("--pred", pred_dir, "prediction label directory (default: <output>/predictions/<split>)");
    auto* bench = app.add_subcommand("bench", "single-image forward+decode latency");
    auto* viz = app.add_subcommand("viz", "PPM overlays and an F1-vs-threshold SVG");
    int limit = 20;
    viz->add_option("--limit", limit, "number of overlays")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ufatd::exit_code(ufatd::ErrorKind::Config);
    }

    try {
        const std::filesystem::path file(config_path);
        const ufatd::RunConfig cfg = ufatd::load_run_config(config_path.empty() ? nullptr : &file, overrides);
        std::cout << "# resolved config\n" << ufatd::echo_config(cfg) << std::flush;

        if (gen->parsed()) ufatd::run_gen_anchors(cfg, std::cout);
        else if (synth->parsed()) ufatd::run_synth(cfg, std::cout);
        else if (enc->parsed()) ufatd::run_encode(cfg, std::cout);
        else if (trn->parsed()) ufatd::run_train(cfg, std::cout);
        else if (inf->parsed()) ufatd::run_infer(cfg, std::cout);
        else if (ev->parsed())
            ufatd::run_eval(cfg, pred_dir.empty() ? ufatd::predictions_dir(cfg) : std::filesystem::path(pred_dir),
                                std::cout);
        else if (bench->parsed()) ufatd::run_bench(cfg, std::cout);
        else if (viz->parsed()) ufatd::run_viz(cfg, limit, std::cout);
        return 0;
    } catch (const ufatd::Error& e) {
        std::cerr << fmt::format("error [{}]: {}\n", ufatd::to_string(e.kind()), e.what());
        return ufatd::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << fmt::format("error: {}\n", e.what());
        return 1;
    }
}
