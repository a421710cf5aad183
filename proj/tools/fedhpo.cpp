// Command-line driver for the two-phase federated HPO experiment.
//
//   fedhpo phase1 --config cfg.json --out run/
//   fedhpo phase2 --config cfg.json --out run/     (reads run/optima.json)
//   fedhpo full   --config cfg.json --out run/
//   fedhpo report --out run/                        (renders run/report.csv)
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fedhpo/fedhpo.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

fedhpo::ExperimentConfig resolve_config(const CommonOptions& opts) {
    fedhpo::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = fedhpo::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    cfg.validate();
    return cfg;
}

void print_optima(const std::map<fedhpo::OptimumKey, fedhpo::ScoredOptimum>& optima) {
    for (const auto& [key, o] : optima)
        std::cout << key.first << " / " << key.second << ": " << fedhpo::to_string(o.config)
                  << " val_loss=" << fedhpo::format_exact(o.val_loss) << " val_f1=" << fedhpo::format_fixed(o.val_f1, 3)
                  << '\n';
}

void print_schemes(const fedhpo::Phase2Result& result) {
    for (const auto& [key, config] : result.scheme_configs)
        std::cout << key.first << " / " << key.second << ": " << fedhpo::to_string(config) << '\n';
    std::cout << '\n' << fedhpo::emit_report(result.report, fedhpo::ReportFormat::Markdown);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated hyperparameter optimization simulator"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        sub->add_option("--config", opts.config_path, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out_dir, "Output directory (overrides output_dir)");
        if (needs_config) sub->add_option("--seed", opts.seed, "Experiment seed (overrides seed)");
    };

    auto* phase1 = app.add_subcommand("phase1", "Centralized TPE per task and model");
    auto* phase2 = app.add_subcommand("phase2", "Federated runs under the three schemes (needs optima.json)");
    auto* full = app.add_subcommand("full", "phase1 followed by phase2");
    auto* report = app.add_subcommand("report", "Render report.csv from an output directory as markdown");
    auto* dump = app.add_subcommand("print-config", "Print the effective configuration as JSON");
    auto* export_data = app.add_subcommand("export-data", "Write each task's generated dataset as CSV");
    for (auto* sub : {phase1, phase2, full, dump, export_data}) add_common(sub, true);
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (report->parsed()) {
            const std::filesystem::path dir = opts.out_dir.empty() ? resolve_config(opts).output_dir : opts.out_dir;
            const auto parsed = fedhpo::parse_report_csv(fedhpo::read_text(dir / fedhpo::OutputFiles::report_csv));
            const auto md = fedhpo::emit_report(parsed, fedhpo::ReportFormat::Markdown);
            fedhpo::write_text(dir / fedhpo::OutputFiles::report_md, md);
            std::cout << md;
            return kExitOk;
        }

        const auto cfg = resolve_config(opts);
        const std::filesystem::path dir = cfg.output_dir;

        if (dump->parsed()) {
            std::cout << fedhpo::to_json(cfg).dump(2) << '\n';
            return kExitOk;
        }
        if (export_data->parsed()) {
            std::filesystem::create_directories(dir);
            for (const auto& t : fedhpo::prepare_tasks(cfg)) {
                std::ofstream out(dir / (t.spec.name + ".csv"));
                fedhpo::write_dataset_csv(t.full, out);
                std::cout << "wrote " << (dir / (t.spec.name + ".csv")).string() << '\n';
            }
            return kExitOk;
        }
        if (phase1->parsed() || full->parsed()) {
            const auto p1 = fedhpo::write_phase1(cfg, dir);
            print_optima(p1.optima);
            if (phase1->parsed()) return kExitOk;
            std::cout << '\n';
            print_schemes(fedhpo::write_phase2(cfg, p1.optima, dir));
            return kExitOk;
        }
        if (phase2->parsed()) {
            const auto optima = fedhpo::optima_from_json(
                nlohmann::json::parse(fedhpo::read_text(dir / fedhpo::OutputFiles::optima)));
            print_schemes(fedhpo::write_phase2(cfg, optima, dir));
            return kExitOk;
        }
    } catch (const fedhpo::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
