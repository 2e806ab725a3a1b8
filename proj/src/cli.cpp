#include "rhbt/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rhbt/analysis.hpp"
#include "rhbt/config.hpp"
#include "rhbt/core_model.hpp"
#include "rhbt/event_io.hpp"
#include "rhbt/experiments.hpp"
#include "rhbt/simulator.hpp"

namespace rhbt::cli {

namespace {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Options shared by every subcommand that needs a spec.
struct SpecOptions {
    std::string config_path;
    std::map<std::string, std::string> overrides;
    unsigned threads = 1;

    void attach(CLI::App& sub)
    {
        sub.add_option("--config", config_path, "flat key = value spec file")->check(CLI::ExistingFile);
        for (const std::string_view key : kConfigKeys) {
            const std::string name(key);
            sub.add_option_function<std::string>(
                "--" + name, [this, name](const std::string& v) { overrides[name] = v; },
                "override " + name + " (units accepted, e.g. 5ns)");
        }
        sub.add_option("--threads", threads, "worker threads; output does not depend on it")
            ->check(CLI::PositiveNumber);
    }

    SpecParameters parameters() const
    {
        SpecParameters params;
        if (!config_path.empty()) {
            for (const auto& [key, value] : load_config_file(config_path)) {
                params.set(key, value);
            }
        }
        for (const auto& [key, value] : overrides) {
            params.set(key, value);
        }
        return params;
    }

    ExperimentSpec spec() const { return parameters().to_spec(); }
};

fs::path output_path(const std::string& given, const char* default_name)
{
    if (!given.empty()) {
        return given;
    }
    const char* dir = std::getenv(kOutputDirEnv);
    return fs::path(dir != nullptr && *dir != '\0' ? dir : ".") / default_name;
}

std::ofstream open_output(const fs::path& path, bool binary = false)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path)
{
    out.close();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return in;
}

Ticks duration_ticks(const std::string& text, const char* unit, const ExperimentSpec& spec)
{
    const double ps = parse_duration_ps(text, unit);
    const auto ticks = static_cast<Ticks>(std::llround(ps / static_cast<double>(spec.tick_resolution_ps)));
    if (ticks < 1) {
        throw ConfigError("duration '" + text + "' is shorter than one tick");
    }
    return ticks;
}

/// Reads every click of an EventStream, checking it against the configured timing.
std::vector<ClickEvent> load_clicks(const fs::path& path, const ExperimentSpec& spec,
                                    std::ostream& err)
{
    std::ifstream in = open_input(path);
    StreamReader reader(in);
    const StreamHeader& h = reader.header();
    if (h.sync_period_ticks != static_cast<std::uint64_t>(spec.period) ||
        h.tick_resolution_ps != spec.tick_resolution_ps) {
        throw SpecError("file timing (period " + std::to_string(h.sync_period_ticks) + " ticks of " +
                        std::to_string(h.tick_resolution_ps) + " ps) does not match the configured run");
    }
    if (h.spec_digest != SpecDigest{} && h.spec_digest != spec_digest(spec)) {
        err << "warning: file was generated from a different configuration (digest " << to_hex(h.spec_digest)
            << ")\n";
    }
    std::vector<ClickEvent> clicks;
    clicks.reserve(static_cast<std::size_t>(h.n_records));
    while (const auto t = reader.next()) {
        const auto ts = static_cast<Ticks>(*t);
        clicks.push_back({ts, static_cast<std::uint64_t>(ts / spec.period)});
    }
    return clicks;
}

void print_probability(std::ostream& out, const char* name, const ProbabilityEstimate& p)
{
    out << name << '=' << p.value << '\n'
        << name << "_std_error=" << p.std_error << '\n'
        << name << "_count=" << p.count << '\n';
}

void write_histogram_csv(const DelayHistogram& h, std::uint64_t tick_ps, std::ostream& out)
{
    out << "bin_start_ps,count\n";
    for (std::size_t i = 0; i < h.bins.size(); ++i) {
        out << h.bin_start(i) * static_cast<Ticks>(tick_ps) << ',' << h.bins[i] << '\n';
    }
}

int cmd_validate(const SpecOptions& opts, std::ostream& out)
{
    const ExperimentSpec spec = opts.spec();
    const Regime regime = classify_regime(spec);
    out << "status=valid\n"
        << "regime=" << to_string(regime.kind) << '\n'
        << "delay_ticks=" << regime.delay << '\n'
        << "dead_time_ticks=" << regime.dead_time << '\n'
        << "period_ticks=" << regime.period << '\n'
        << "tick_ps=" << spec.tick_resolution_ps << '\n';
    return ok;
}

int cmd_predict(const SpecOptions& opts, std::ostream& out)
{
    const ExperimentSpec spec = opts.spec();
    const Regime regime = classify_regime(spec);
    const MeasuredMeans independent = predicted_independent_means(spec.source_1, spec.source_2);
    const MeasuredMeans together = predicted_simultaneous_means(spec.source_1, spec.source_2, regime);
    out << "regime=" << to_string(regime.kind) << '\n'
        << "pulse_1_independent=" << independent.pulse_1 << '\n'
        << "pulse_2_independent=" << independent.pulse_2 << '\n'
        << "pulse_1_simultaneous=" << together.pulse_1 << '\n'
        << "pulse_2_simultaneous=" << together.pulse_2 << '\n'
        << "g2_click_zero=" << (regime.pseudo_antibunching() ? 0.0 : 1.0) << '\n';
    return ok;
}

int cmd_simulate(const SpecOptions& opts, const std::string& out_arg, const std::string& summary_csv,
                 const std::string& records_csv, std::ostream& out)
{
    const ExperimentSpec spec = opts.spec();
    const SimulationResult run = simulate_experiment(spec, {opts.threads});

    StreamHeader header;
    header.tick_resolution_ps = spec.tick_resolution_ps;
    header.sync_period_ticks = static_cast<std::uint64_t>(spec.period);
    header.n_records = run.clicks.size();
    header.spec_digest = spec_digest(spec);

    const fs::path path = output_path(out_arg, "events.ptes");
    std::ofstream file = open_output(path, true);
    const std::uint64_t bytes = write_stream(header, run.clicks, file);
    finish_output(file, path);

    const RunSummary& s = run.summary;
    out << "output=" << path.string() << '\n'
        << "bytes=" << bytes << '\n'
        << "regime=" << to_string(classify_regime(spec).kind) << '\n'
        << "spec_digest=" << to_hex(header.spec_digest) << '\n'
        << "n_periods=" << s.n_periods << '\n';
    for (int tag : {1, 2, 0}) {
        const std::string suffix = tag == 0 ? "dark" : "source_" + std::to_string(tag);
        const auto i = static_cast<std::size_t>(tag);
        out << "photons_" << suffix << '=' << s.photons[i] << '\n'
            << "clicks_" << suffix << '=' << s.clicks[i] << '\n'
            << "click_periods_" << suffix << '=' << s.click_periods[i] << '\n';
    }
    out << "p1=" << s.click_fraction(1) << '\n' << "p2=" << s.click_fraction(2) << '\n';

    if (!summary_csv.empty()) {
        std::ofstream csv = open_output(summary_csv);
        csv << "n_periods,photons_1,photons_2,photons_dark,clicks_1,clicks_2,clicks_dark,"
               "click_periods_1,click_periods_2,click_periods_dark,p1,p2\n"
            << std::setprecision(17) << s.n_periods << ',' << s.photons[1] << ',' << s.photons[2]
            << ',' << s.photons[0] << ',' << s.clicks[1] << ',' << s.clicks[2] << ','
            << s.clicks[0] << ',' << s.click_periods[1] << ',' << s.click_periods[2] << ','
            << s.click_periods[0] << ',' << s.click_fraction(1) << ',' << s.click_fraction(2)
            << '\n';
        finish_output(csv, summary_csv);
    }
    if (!records_csv.empty()) {
        std::ifstream in = open_input(path);
        StreamReader reader(in);
        std::ofstream csv = open_output(records_csv);
        export_csv(reader, csv);
        finish_output(csv, records_csv);
    }
    return ok;
}

int cmd_analyze(const SpecOptions& opts, const std::string& in_path, const std::string& bin_arg,
                const std::string& profile_out, std::ostream& out, std::ostream& err)
{
    const ExperimentSpec spec = opts.spec();
    const Ticks bin_width = duration_ticks(bin_arg, "ps", spec);
    const GateSpec gates = default_gates(spec, bin_width);

    const std::vector<ClickEvent> clicks = load_clicks(in_path, spec, err);
    const PulseClickMatrix matrix = classify_clicks(clicks, gates, spec.period, spec.n_periods);
    const ClickProbabilities probs = estimate_click_probs(matrix);

    out << "n_periods=" << matrix.n_periods << '\n'
        << "clicks=" << clicks.size() << '\n'
        << "unclassified=" << matrix.unclassified_count << '\n';
    print_probability(out, "p1", probs.pulse_1);
    print_probability(out, "p2", probs.pulse_2);

    if (!profile_out.empty()) {
        const DelayHistogram profile = micro_time_profile(clicks, spec.period, bin_width);
        std::ofstream csv = open_output(profile_out);
        write_histogram_csv(profile, spec.tick_resolution_ps, csv);
        finish_output(csv, profile_out);
        out << "profile=" << profile_out << '\n';
    }

    try {
        const G2Estimate g2 = g2_click_zero(matrix);
        out << "g2_click_zero=" << g2.value << '\n'
            << "g2_click_zero_std_error=" << g2.std_error << '\n'
            << "coincidences=" << g2.coincidences << '\n';
    } catch (const UndefinedEstimate& e) {
        err << "error: " << e.what() << '\n';
        return analysis_undefined;
    }
    return ok;
}

int cmd_g2(const SpecOptions& opts, const std::string& in_path, std::int64_t k_max,
           const std::string& out_arg, const std::string& hist_arg, const std::string& bin_arg,
           const std::string& max_delay_arg, const std::string& mode_arg, std::ostream& out,
           std::ostream& err)
{
    const ExperimentSpec spec = opts.spec();
    const std::vector<ClickEvent> clicks = load_clicks(in_path, spec, err);
    const PulseClickMatrix matrix =
        classify_clicks(clicks, default_gates(spec), spec.period, spec.n_periods);
    const auto n = static_cast<std::int64_t>(spec.n_periods);
    const std::int64_t k_limit = std::min(k_max, n - 1);
    const auto lags = g2_discrete(matrix, -k_limit, k_limit);

    const fs::path g2_path = output_path(out_arg, "g2.csv");
    std::ofstream csv = open_output(g2_path);
    csv << "k,g2,std_error,coincidences\n" << std::setprecision(10);
    std::size_t defined = 0;
    for (const auto& [k, estimate] : lags) {
        if (estimate) {
            ++defined;
            csv << k << ',' << estimate->value << ',' << estimate->std_error << ','
                << estimate->coincidences << '\n';
        } else {
            csv << k << ",undefined,undefined,0\n";
        }
    }
    finish_output(csv, g2_path);

    const HistogramMode mode =
        mode_arg == "start-stop" ? HistogramMode::start_stop : HistogramMode::all_pairs;
    const DelayHistogram hist = delay_histogram(clicks, duration_ticks(bin_arg, "ps", spec),
                                                duration_ticks(max_delay_arg, "ns", spec), mode);
    const fs::path hist_path = output_path(hist_arg, "delay_histogram.csv");
    std::ofstream hist_csv = open_output(hist_path);
    write_histogram_csv(hist, spec.tick_resolution_ps, hist_csv);
    finish_output(hist_csv, hist_path);

    out << "g2_csv=" << g2_path.string() << '\n'
        << "histogram_csv=" << hist_path.string() << '\n'
        << "histogram_pairs=" << hist.total() << '\n';
    if (const auto zero = lags.find(0); zero != lags.end() && zero->second) {
        out << "g2_0=" << zero->second->value << '\n';
    }
    if (defined == 0) {
        err << "error: g2 undefined at every lag (a gate has no clicks)\n";
        return analysis_undefined;
    }
    return ok;
}

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            parts.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad grid '" + text + "', expected start:stop:step");
        }
    }
    if (parts.size() != 3) {
        throw ConfigError("bad grid '" + text + "', expected start:stop:step");
    }
    try {
        return linear_grid(parts[0], parts[1], parts[2]);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

int cmd_sweep(const SpecOptions& opts, const std::string& experiment, const std::string& grid_arg,
              double ratio, double fixed_mu2, const std::string& out_arg, std::ostream& out)
{
    const ExperimentSpec base = opts.spec();
    const SweepOptions sweep_options{opts.threads, 1};
    const fs::path path = output_path(out_arg, (experiment + ".csv").c_str());
    nlohmann::json parameters;

    if (experiment == "table1") {
        const CountTableReport report = table1_reproduction(base, kReferenceCountTable, sweep_options);
        std::ofstream csv = open_output(path);
        write_table_csv(report, csv);
        finish_output(csv, path);
        for (const CountComparison& row : report.rows) {
            out << "row pulse_1_independent=" << row.reference.pulse_1_independent;
            if (!row.error.empty()) {
                out << " error=\"" << row.error << "\"\n";
                continue;
            }
            out << std::fixed << std::setprecision(0) << " predicted=" << row.predicted_2_simultaneous
                << " simulated=" << row.simulated_2_counts
                << " recorded=" << row.reference.pulse_2_simultaneous << std::setprecision(4)
                << " deviation=" << row.relative_deviation
                << " model_deviation=" << row.model_deviation
                << (row.flagged ? " flag=model-deviant" : "") << '\n';
            out.unsetf(std::ios::floatfield);
            out << std::setprecision(6);
        }
        parameters = {{"table_rows", report.rows.size()}};
        SweepResult meta_holder{"table1", base, classify_regime(base), {}};
        std::ofstream meta = open_output(path.string() + ".meta.json");
        write_sweep_metadata(meta_holder, parameters.dump(), meta);
        finish_output(meta, path.string() + ".meta.json");
        out << "output=" << path.string() << '\n';
        return ok;
    }

    const std::vector<double> grid = parse_grid(grid_arg);
    SweepResult result;
    if (experiment == "joint-intensity") {
        result = sweep_joint_intensity(base, grid, ratio, sweep_options);
        parameters = {{"ratio", ratio}, {"mu1_grid", grid_arg}};
    } else {
        result = sweep_anticorrelation(base, grid, fixed_mu2, sweep_options);
        parameters = {{"fixed_mu2", fixed_mu2}, {"mu1_grid", grid_arg}};
    }
    std::ofstream csv = open_output(path);
    write_sweep_csv(result, csv);
    finish_output(csv, path);
    std::ofstream meta = open_output(path.string() + ".meta.json");
    write_sweep_metadata(result, parameters.dump(), meta);
    finish_output(meta, path.string() + ".meta.json");
    out << "output=" << path.string() << '\n' << "points=" << result.rows.size() << '\n';
    return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reversed-HBT dead-time simulator and analyzer", "rhbt"};
    app.require_subcommand(1);

    SpecOptions spec_opts;
    std::string out_arg, in_path, summary_csv, records_csv, profile_out, hist_out;
    std::string bin_arg = "10ps", hist_bin_arg = "100ps", max_delay_arg = "3000ns";
    std::string mode_arg = "all-pairs", experiment, grid_arg = "0:5:0.1";
    std::int64_t k_max = 20;
    double ratio = 1.0, fixed_mu2 = 1.0;

    auto* validate = app.add_subcommand("validate", "check a spec and report its regime");
    auto* predict = app.add_subcommand("predict", "closed-form click probabilities");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run written as an EventStream file");
    auto* analyze = app.add_subcommand("analyze", "gate probabilities and g2[0] from an EventStream");
    auto* g2 = app.add_subcommand("g2", "g2[k] over a lag range and a delay histogram");
    auto* sweep = app.add_subcommand("sweep", "run a named experiment sweep");
    for (CLI::App* sub : {validate, predict, simulate, analyze, g2, sweep}) {
        spec_opts.attach(*sub);
    }

    simulate->add_option("-o,--out", out_arg, "EventStream output path");
    simulate->add_option("--summary-csv", summary_csv, "also write the run summary as CSV");
    simulate->add_option("--records-csv", records_csv, "also export records as period_index,micro_time_ps");

    analyze->add_option("-i,--in", in_path, "EventStream input")->required();
    analyze->add_option("--bin", bin_arg, "micro-time bin width (default 10ps)");
    analyze->add_option("--profile-out", profile_out, "write the micro-time profile CSV");

    g2->add_option("-i,--in", in_path, "EventStream input")->required();
    g2->add_option("--k-max", k_max, "largest |k|")->check(CLI::NonNegativeNumber);
    g2->add_option("-o,--out", out_arg, "g2[k] CSV output path");
    g2->add_option("--hist-out", hist_out, "delay histogram CSV output path");
    g2->add_option("--bin", hist_bin_arg, "delay histogram bin width (default 100ps)");
    g2->add_option("--max-delay", max_delay_arg, "delay histogram half range (default 3000ns)");
    g2->add_option("--mode", mode_arg, "all-pairs | start-stop")
        ->check(CLI::IsMember({"all-pairs", "start-stop"}));

    sweep->add_option("-e,--experiment", experiment, "joint-intensity | anticorrelation | table1")
        ->required()
        ->check(CLI::IsMember({"joint-intensity", "anticorrelation", "table1"}));
    sweep->add_option("--grid", grid_arg, "mu1 grid start:stop:step (default 0:5:0.1)");
    sweep->add_option("--ratio", ratio, "mu2 / mu1 for joint-intensity");
    sweep->add_option("--fixed-mu2", fixed_mu2, "mu2 for anticorrelation");
    sweep->add_option("-o,--out", out_arg, "CSV output path (metadata goes to <out>.meta.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    }

    const auto precision = out.precision(17);
    try {
        int status = ok;
        if (validate->parsed()) {
            status = cmd_validate(spec_opts, out);
        } else if (predict->parsed()) {
            status = cmd_predict(spec_opts, out);
        } else if (simulate->parsed()) {
            status = cmd_simulate(spec_opts, out_arg, summary_csv, records_csv, out);
        } else if (analyze->parsed()) {
            status = cmd_analyze(spec_opts, in_path, bin_arg, profile_out, out, err);
        } else if (g2->parsed()) {
            status = cmd_g2(spec_opts, in_path, k_max, out_arg, hist_out, hist_bin_arg,
                            max_delay_arg, mode_arg, out, err);
        } else if (sweep->parsed()) {
            status = cmd_sweep(spec_opts, experiment, grid_arg, ratio, fixed_mu2, out_arg, out);
        }
        out.precision(precision);
        return status;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const SpecError& e) {
        err << "invalid spec: " << e.what() << '\n';
        return spec_invalid;
    } catch (const StreamError& e) {
        err << "stream error: " << e.what() << '\n';
        return io_error;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return io_error;
    } catch (const UndefinedEstimate& e) {
        err << "error: " << e.what() << '\n';
        return analysis_undefined;
    } catch (const std::out_of_range& e) {
        // clicks outside the configured run length
        err << "invalid spec: " << e.what() << '\n';
        return spec_invalid;
    } catch (const std::runtime_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return io_error;
    }
}

}  // namespace rhbt::cli
