// oksim: simulate and analyse Kerr-shutter measurements of energy-time entangled photon pairs.
//
// Exit status: 0 success, 1 usage or I/O error, 2 invalid configuration, 3 a pipeline stage failed.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "oksim/oksim.hpp"

namespace fs = std::filesystem;
using namespace oksim;

namespace {

constexpr int exit_io = 1;
constexpr int exit_config = 2;
constexpr int exit_stage = 3;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 0;
    std::string scale_sweep;
};

void add_common(CLI::App* app, Common& c, bool with_out = true)
{
    app->add_option("--config", c.config_path, "experiment configuration (JSON); defaults to the built-in reference setup")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "RNG seed, overrides the config");
    if (with_out)
        app->add_option("--out", c.out, "output directory (default: $OKSIM_OUT_DIR, then config output_dir)");
    app->add_option("--threads", c.threads, "worker threads (default: hardware concurrency)");
    app->add_option("--scale-sweep", c.scale_sweep, "background scales for the sensitivity table, LO:HI:STEPS");
}

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig cfg = c.config_path.empty() ? default_config() : load_config(c.config_path);
    if (c.seed)
        cfg.seed = *c.seed;
    if (!c.scale_sweep.empty()) {
        const auto a = c.scale_sweep.find(':');
        const auto b = c.scale_sweep.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw ConfigError("--scale-sweep", "expected LO:HI:STEPS");
        try {
            cfg.analysis.sweep_lo = std::stod(c.scale_sweep.substr(0, a));
            cfg.analysis.sweep_hi = std::stod(c.scale_sweep.substr(a + 1, b - a - 1));
            cfg.analysis.sweep_steps = std::stoul(c.scale_sweep.substr(b + 1));
        } catch (const std::logic_error&) {
            throw ConfigError("--scale-sweep", "expected LO:HI:STEPS with numbers");
        }
    }
    cfg.scan.seed = cfg.seed;
    validate(cfg);
    return cfg;
}

fs::path output_dir(const Common& c, const ExperimentConfig& cfg)
{
    if (!c.out.empty())
        return c.out;
    if (const char* env = std::getenv("OKSIM_OUT_DIR"); env && *env)
        return env;
    return cfg.output_dir;
}

Parallelism threads(const Common& c)
{
    return {c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency())};
}

int run_simulate(const Common& c)
{
    const auto cfg = resolve(c);
    const auto dir = output_dir(c, cfg);
    const auto bundle = run_pipeline(cfg, threads(c));
    write_bundle(bundle, dir);
    std::cout << render_report(bundle);
    std::cerr << "bundle written to " << dir.string() << "\n";
    return bundle.ok() ? 0 : exit_stage;
}

int run_analyze(const Common& c, const std::string& scan_dir)
{
    const auto cfg = resolve(c);
    std::vector<std::string> warnings;
    const auto scan = load_scan(scan_dir, &warnings);
    for (const auto& w : warnings)
        std::cerr << "warning: " << w << "\n";
    const auto a = analyze(scan, measured_jsi(cfg), cfg.analysis, threads(c));
    Report r;
    r.line("oksim analysis of " + scan_dir);
    const auto text = render_analysis(scan, a, r);
    const auto dir = output_dir(c, cfg);
    fs::create_directories(dir);
    write_text(dir / "report.txt", text);
    save_matrix(dir / "subtracted.txt",
                map_file({scan.delay_s, scan.delay_i, a.subtracted}, "delay_s", "delay_i", "fs", "counts"));
    export_heatmap(a.subtracted, dir / "subtracted.ppm", Colormap::diverging);
    std::cout << text;
    return a.errors.empty() ? 0 : exit_stage;
}

int run_predict(const Common& c)
{
    std::cout << render_prediction(predict(resolve(c)));
    return 0;
}

int run_validate(const Common& c, bool print_default)
{
    if (print_default) {
        std::cout << dump_config(default_config());
        return 0;
    }
    resolve(c);
    std::cout << "config ok" << (c.config_path.empty() ? " (built-in defaults)" : ": " + c.config_path) << "\n";
    return 0;
}

int run_report(const std::string& path, const std::string& key)
{
    auto file = fs::path(path);
    if (fs::is_directory(file))
        file /= "report.txt";
    const auto text = read_text(file);
    if (key.empty()) {
        std::cout << text;
        return 0;
    }
    const auto record = parse_report(text);
    const auto it = record.find(key);
    if (it == record.end()) {
        std::cerr << "error: no key '" << key << "' in " << file.string() << "\n";
        return exit_io;
    }
    std::cout << format_number(it->second.value) << " " << it->second.unit << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kerr-shutter joint temporal intensity simulator and analysis chain"};
    app.require_subcommand(1);

    Common common;
    auto* simulate = app.add_subcommand("simulate", "simulate a scan and run the full analysis, writing a bundle");
    add_common(simulate, common);

    std::string scan_dir;
    auto* analyze_cmd = app.add_subcommand("analyze", "analyse a saved scan directory");
    analyze_cmd->add_option("scan", scan_dir, "directory written by simulate (its scan/ subdirectory)")
        ->required()
        ->check(CLI::ExistingDirectory);
    add_common(analyze_cmd, common);

    auto* predict_cmd = app.add_subcommand("predict", "JTI width from the quadrature model, both width conventions");
    add_common(predict_cmd, common, false);

    bool print_default = false;
    auto* validate_cmd = app.add_subcommand("validate", "check a configuration file");
    add_common(validate_cmd, common, false);
    validate_cmd->add_flag("--print-default", print_default, "print the default configuration and exit");

    std::string report_path, report_key;
    auto* report_cmd = app.add_subcommand("report", "print a bundle report, or one value from its record");
    report_cmd->add_option("path", report_path, "bundle directory or report file")->required();
    report_cmd->add_option("--key", report_key, "record key to print");

    auto* tags = app.add_subcommand("tags", "time-tag stream tools");
    tags->require_subcommand(1);

    std::string file_a, file_b, hist_out;
    Picoseconds window = 3000, offset = 0, rep_period = 12500, range = 40000, bin = 100;
    std::string mode = "gate";
    unsigned tag_threads = 1;
    auto add_pair = [&](CLI::App* cmd) {
        cmd->add_option("a", file_a, "first tag file")->required()->check(CLI::ExistingFile);
        cmd->add_option("b", file_b, "second tag file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--threads", tag_threads, "worker threads");
    };
    auto* count = tags->add_subcommand("count", "count coincidences within a window");
    add_pair(count);
    count->add_option("--window", window, "full coincidence window, ps")->capture_default_str();
    count->add_option("--offset", offset, "delay added to the first stream, ps")->capture_default_str();
    count->add_option("--mode", mode, "gate (a-tags with any partner) or pairs (all pairs)")
        ->check(CLI::IsMember({"gate", "pairs"}))
        ->capture_default_str();
    auto* acc = tags->add_subcommand("accidentals", "coincidences at one repetition period of delay");
    add_pair(acc);
    acc->add_option("--window", window, "full coincidence window, ps")->capture_default_str();
    acc->add_option("--rep-period", rep_period, "repetition period, ps")->capture_default_str();
    auto* hist = tags->add_subcommand("hist", "cross-correlation histogram b - a");
    add_pair(hist);
    hist->add_option("--range", range, "half range, ps")->capture_default_str();
    hist->add_option("--bin", bin, "bin width, ps")->capture_default_str();
    hist->add_option("--out", hist_out, "write the histogram as a matrix file instead of stdout");

    double rate_a = 3.6e6, rate_b = 2.6e6, pair_rate = 4e5, rep_rate = 80e6;
    TagGeneratorOptions gen;
    std::string out_a = "a.ttag", out_b = "b.ttag", model = "observed";
    auto* generate = tags->add_subcommand("generate", "synthesise pulsed-source tag streams");
    generate->add_option("--rate-a", rate_a, "detected rate, channel a, 1/s")->capture_default_str();
    generate->add_option("--rate-b", rate_b, "detected rate, channel b, 1/s")->capture_default_str();
    generate->add_option("--pair-rate", pair_rate, "coincidence rate, 1/s")->capture_default_str();
    generate->add_option("--rep-rate", rep_rate, "pulse repetition rate, Hz")->capture_default_str();
    generate->add_option("--model", model,
                         "observed: rates include the pairs; pairs: independent singles on top of pairs")
        ->check(CLI::IsMember({"observed", "pairs"}))
        ->capture_default_str();
    generate->add_option("--duration", gen.duration_s, "seconds")->capture_default_str();
    generate->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
    generate->add_option("--jitter-a", gen.jitter_a_ps, "Gaussian jitter sigma, ps");
    generate->add_option("--jitter-b", gen.jitter_b_ps, "Gaussian jitter sigma, ps");
    generate->add_option("--dead-time", gen.dead_time_ps, "detector dead time, ps");
    generate->add_option("--out-a", out_a, "output file, channel a")->capture_default_str();
    generate->add_option("--out-b", out_b, "output file, channel b")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate)
            return run_simulate(common);
        if (*analyze_cmd)
            return run_analyze(common, scan_dir);
        if (*predict_cmd)
            return run_predict(common);
        if (*validate_cmd)
            return run_validate(common, print_default);
        if (*report_cmd)
            return run_report(report_path, report_key);
        const Parallelism par{std::max(1u, tag_threads)};
        if (*count) {
            const auto m = mode == "pairs" ? CoincidenceMode::pairs : CoincidenceMode::gate;
            std::cout << count_coincidences(read_tags(file_a), read_tags(file_b), window, offset, m, par) << "\n";
        } else if (*acc) {
            std::cout << estimate_accidentals(read_tags(file_a), read_tags(file_b), window, rep_period,
                                              CoincidenceMode::gate, par)
                      << "\n";
        } else if (*hist) {
            const auto h = correlation_histogram(read_tags(file_a), read_tags(file_b), range, bin);
            std::vector<double> t, n;
            for (std::size_t k = 0; k < h.counts.size(); ++k) {
                t.push_back(static_cast<double>(h.center(k)));
                n.push_back(static_cast<double>(h.counts[k]));
            }
            const auto f = columns_file({"delay", "count"}, {"ps", "counts"}, {t, n});
            if (hist_out.empty())
                std::cout << to_string(f);
            else
                save_matrix(hist_out, f);
        } else if (*generate) {
            const auto src = model == "observed" ? PulsedSource::from_observed(rate_a, rate_b, pair_rate, rep_rate)
                                                 : PulsedSource::from_pairs(rate_a, rate_b, pair_rate, rep_rate);
            const auto [a, b] = generate_timetags(src, gen);
            write_tags(out_a, a);
            write_tags(out_b, b);
            std::cout << "channel a: " << a.size() << " tags -> " << out_a << "\nchannel b: " << b.size() << " tags -> "
                      << out_b << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_io;
    }
}
