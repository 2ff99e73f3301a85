#include "hetdeconv/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hetdeconv/config.hpp"
#include "hetdeconv/csv.hpp"
#include "hetdeconv/errors.hpp"
#include "hetdeconv/grid.hpp"
#include "hetdeconv/simulation.hpp"

#ifndef HETDECONV_VERSION
#define HETDECONV_VERSION "0.0.0"
#endif

namespace hetdeconv::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using csv::format_double;

/// A failure that maps straight to an exit code.
struct Exit {
    int code;
};

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "results";
    int workers = 0;
    bool full_scale = false;
    std::optional<std::string> axis;
    std::optional<double> value;
    std::optional<std::string> estimator;
    std::optional<std::string> data;
    std::optional<std::string> errors;
};

struct Artifact {
    std::string path;
    std::vector<std::string> columns;
    std::string content;
};

/// Collects rows in memory; nothing touches disk until every artifact is ready.
class CsvBuffer {
public:
    explicit CsvBuffer(std::vector<std::string> columns) : columns_(std::move(columns)), writer_(body_) {
        writer_.row(columns_);
    }
    void row(const std::vector<std::string>& fields) { writer_.row(fields); }
    Artifact finish(std::string path) const { return {std::move(path), columns_, body_.str()}; }

private:
    std::vector<std::string> columns_;
    std::ostringstream body_;
    csv::Writer writer_;
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string describe(const ConfigError& e, const std::string& source) {
    std::string where = source.empty() ? "config" : source;
    if (e.line() > 0) where += ":" + std::to_string(e.line());
    std::string out = "error: " + where + ": ";
    if (!e.field().empty()) out += "field '" + e.field() + "': ";
    return out + e.what();
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("HETDECONV_SEED");
    if (raw == nullptr) return std::nullopt;
    const std::string_view s(raw);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("seed", 0, "HETDECONV_SEED must be an unsigned 64-bit integer, got '" + std::string(s) + "'");
    }
    return value;
}

RunConfig resolve_config(const Options& opt, std::ostream& err) {
    ConfigLayers layers;
    layers.full_scale = opt.full_scale;
    layers.overrides = opt.overrides;
    if (opt.axis) layers.overrides.push_back("cross_section.axis=" + json(*opt.axis).dump());
    if (opt.value) layers.overrides.push_back("cross_section.value=" + json(*opt.value).dump());
    if (opt.estimator) layers.overrides.push_back("cross_section.estimator=" + json(*opt.estimator).dump());
    if (opt.data) layers.overrides.push_back("data=" + json(*opt.data).dump());
    if (opt.errors) layers.overrides.push_back("errors=" + json(*opt.errors).dump());
    try {
        layers.seed = env_seed();
        return load_config(opt.config_path, layers);
    } catch (const ConfigError& e) {
        err << describe(e, opt.config_path) << '\n';
        throw Exit{kExitUsage};
    }
}

[[noreturn]] void usage_error(std::ostream& err, const std::string& field, const std::string& message) {
    err << "error: field '" << field << "': " << message << '\n';
    throw Exit{kExitUsage};
}

json manifest_json(const std::string& command, const RunConfig& cfg, const std::vector<Artifact>& files,
                   double seconds, const json& extra) {
    json m;
    m["tool"] = "hetdeconv";
    m["version"] = HETDECONV_VERSION;
    m["command"] = command;
    m["timestamp"] = utc_timestamp();
    m["seed"] = cfg.simulation.seed;
    m["workers"] = worker_count();
    m["duration_seconds"] = seconds;
    m["config"] = json::parse(emit_config(cfg));
    json list = json::array();
    for (const auto& f : files) list.push_back(json{{"path", f.path}, {"format", "csv"}, {"columns", f.columns}});
    list.push_back(json{{"path", "manifest.json"}, {"format", "json"}});
    m["files"] = list;
    m["notes"] = json::array(
        {"grids include both endpoints: spacing is (max - min) / (count - 1)",
         "numbers use 17 significant digits; NA marks a value that does not exist"});
    for (const auto& item : extra.items()) m[item.key()] = item.value();
    return m;
}

void write_artifacts(const fs::path& dir, std::vector<Artifact> files, const std::string& command,
                     const RunConfig& cfg, std::chrono::steady_clock::time_point started, const json& extra,
                     std::ostream& out) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const std::string manifest = manifest_json(command, cfg, files, seconds, extra).dump(2) + "\n";
    files.push_back({"manifest.json", {}, manifest});

    fs::create_directories(dir);
    for (const auto& f : files) {
        std::ofstream os(dir / f.path, std::ios::binary | std::ios::trunc);
        os << f.content;
        if (!os) throw std::runtime_error("failed to write " + (dir / f.path).string());
        out << "wrote " << (dir / f.path).string() << '\n';
    }
}

std::string bool_field(bool flag) { return flag ? "1" : "0"; }

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(opt, err);
    const auto started = std::chrono::steady_clock::now();
    const SimulationConfig& sim = cfg.simulation;

    AseReport report;
    try {
        report = run_replications(sim);
    } catch (const std::exception& e) {
        err << "error: simulation failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    if (!report.failures.empty()) {
        for (const auto& f : report.failures) err << "error: replication " << f.rep << " failed: " << f.message << '\n';
        return kExitRuntime;
    }

    const std::string model(to_string(sim.model));
    const std::string family(to_string(sim.family));
    const std::string n = std::to_string(sim.n);

    CsvBuffer summary({"model", "family", "n", "estimator", "h", "b", "mean_ase", "rep_count", "excluded_points"});
    CsvBuffer grid({"model", "family", "n", "estimator", "h", "b", "mean_ase", "valid_reps"});
    CsvBuffer reps({"rep", "estimator", "h", "b", "ase", "excluded_points", "theta_hat"});

    for (const auto& er : report.estimators) {
        const std::string name(to_string(er.estimator));
        summary.row({model, family, n, name, format_double(er.modal_pair.h), format_double(er.modal_pair.b),
                     format_double(er.rep_count > 0 ? er.mean_optimal_ase : std::nan("")),
                     std::to_string(er.rep_count), std::to_string(er.excluded_points)});
        for (std::size_t p = 0; p < er.pairs.size(); ++p) {
            grid.row({model, family, n, name, format_double(er.pairs[p].h), format_double(er.pairs[p].b),
                      format_double(er.mean_ase[p]), std::to_string(er.valid_reps[p])});
        }
    }
    for (std::size_t r = 0; r < sim.reps; ++r) {
        for (const auto& er : report.estimators) {
            const auto& opt_r = er.per_rep[r];
            const double theta = er.estimator == Estimator::RTilde && r < report.theta_hats.size()
                                     ? report.theta_hats[r]
                                     : std::nan("");
            reps.row({std::to_string(r), std::string(to_string(er.estimator)),
                      format_double(opt_r ? opt_r->pair.h : std::nan("")),
                      format_double(opt_r ? opt_r->pair.b : std::nan("")),
                      format_double(opt_r ? opt_r->ase : std::nan("")),
                      opt_r ? std::to_string(opt_r->excluded) : "NA", format_double(theta)});
        }
    }

    for (const auto& er : report.estimators) {
        out << to_string(er.estimator) << ": mean optimal ASE " << format_double(er.mean_optimal_ase) << " over "
            << er.rep_count << " reps, modal (h, b) = (" << format_double(er.modal_pair.h) << ", "
            << format_double(er.modal_pair.b) << ")\n";
    }

    json extra;
    extra["ase_report_notes"] =
        "h and b are the most frequently selected oracle bandwidths; mean_ase averages each replication's "
        "optimal ASE; r_tilde has no h";
    try {
        write_artifacts(opt.out_dir,
                        {summary.finish("ase_report.csv"), grid.finish("ase_grid.csv"), reps.finish("ase_reps.csv")},
                        "simulate", cfg, started, extra, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

// --- estimate ---------------------------------------------------------------

double parse_cell(const csv::Table& table, std::size_t row, std::size_t col, const std::string& path) {
    const std::string& s = table.rows[row][col];
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && *begin == ' ') ++begin;
    if (begin < end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (begin == end || ec != std::errc() || ptr != end) {
        throw ConfigError(table.header[col], table.lines[row],
                          path + ": expected a number in column '" + table.header[col] + "', got '" + s + "'");
    }
    return value;
}

csv::Table read_table(const std::string& path, const std::string& field) {
    try {
        return csv::read_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(field, 0, path + ": " + e.what());
    }
}

int cmd_estimate(const Options& opt, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(opt, err);
    const auto started = std::chrono::steady_clock::now();
    if (!cfg.data) usage_error(err, "data", "estimate needs an observation file (--data or data=)");
    if (!cfg.errors) usage_error(err, "errors", "estimate needs an error-spec file (--errors or errors=)");
    if (!cfg.h || !cfg.b) usage_error(err, cfg.h ? "b" : "h", "estimate needs fixed bandwidths h and b");

    std::optional<Sample> sample;
    try {
        sample.emplace(read_sample(*cfg.data, read_error_spec(*cfg.errors)));
    } catch (const ConfigError& e) {
        err << "error: " << (e.line() > 0 ? "line " + std::to_string(e.line()) + ": " : std::string()) << e.what()
            << '\n';
        return kExitUsage;
    }

    const Bandwidths bw{*cfg.h, *cfg.b};
    Surface surface;
    try {
        const auto quad = QuadratureGrid::gauss_legendre(cfg.simulation.quad_nodes);
        const DeconvEstimator est = fit(*sample, bw, quad);
        surface = r_hat_surface(est, cfg.query_grid.x.points(), cfg.query_grid.t.points());
    } catch (const EnsembleInvalid& e) {
        err << "error: error ensemble invalid at frequency " << format_double(e.frequency()) << ": " << e.what()
            << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: estimation failed: " << e.what() << '\n';
        return kExitRuntime;
    }

    CsvBuffer pred({"x", "t", "r_hat", "f_hat", "flagged"});
    for (std::size_t i = 0; i < surface.xs.size(); ++i) {
        for (std::size_t k = 0; k < surface.ts.size(); ++k) {
            const std::size_t idx = i * surface.ts.size() + k;
            pred.row({format_double(surface.xs[i]), format_double(surface.ts[k]), format_double(surface.value[idx]),
                      format_double(surface.density[idx]), bool_field(surface.flagged[idx] != 0)});
        }
    }
    out << "evaluated " << surface.value.size() << " points, " << surface.flagged_count() << " flagged\n";

    json extra;
    extra["bandwidths"] = json{{"h", bw.h}, {"b", bw.b}};
    extra["observations"] = sample->size();
    try {
        write_artifacts(opt.out_dir, {pred.finish("predictions.csv")}, "estimate", cfg, started, extra, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

// --- cross-section ----------------------------------------------------------

int cmd_cross_section(const Options& opt, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(opt, err);
    const auto started = std::chrono::steady_clock::now();
    const SimulationConfig& sim = cfg.simulation;
    const CrossSectionSpec& spec = cfg.cross_section;

    std::vector<CrossSectionPoint> points;
    Bandwidths bw;
    std::string selection = "fixed";
    double theta = std::nan("");
    try {
        const auto quad = QuadratureGrid::gauss_legendre(sim.quad_nodes);
        const ErrorEnsemble ensemble = build_ensemble(sim.family, sim.n);
        Rng rng(substream_seed(sim.seed, 0));
        const GeneratedData data = generate(sim.model, sim.n, ensemble, rng);
        const auto xs = sim.eval_grid.points();
        const auto& ts = xs;

        if (spec.estimator == Estimator::RTilde) {
            theta = theta_hat(data.sample);
            if (cfg.b) {
                bw = {cfg.h.value_or(std::nan("")), *cfg.b};
            } else {
                const auto found = partial_linear_search(data, theta, sim.b_grid.points(), xs, ts, quad);
                if (!found.best) throw std::runtime_error("no bandwidth in b_grid produced a usable fit");
                bw = found.best_pair();
                selection = "oracle";
            }
        } else if (cfg.h && cfg.b) {
            bw = {*cfg.h, *cfg.b};
        } else {
            const auto pairs = sim.bandwidth_pairs();
            const auto found = bandwidth_search(data, spec.estimator, pairs, xs, ts, quad);
            if (!found.best) throw std::runtime_error("no bandwidth pair produced a usable fit");
            bw = found.best_pair();
            selection = "oracle";
        }
        points = cross_section(data, spec.estimator, spec.axis, spec.value, bw, quad);
    } catch (const EnsembleInvalid& e) {
        err << "error: error ensemble invalid at frequency " << format_double(e.frequency()) << ": " << e.what()
            << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: cross-section failed: " << e.what() << '\n';
        return kExitRuntime;
    }

    CsvBuffer table({"coord", "estimate", "truth", "flagged"});
    for (const auto& p : points) {
        table.row({format_double(p.coord), format_double(p.estimate), format_double(p.truth), bool_field(p.flagged)});
    }
    out << to_string(spec.estimator) << " along " << to_string(spec.axis) << "=" << format_double(spec.value)
        << " with (h, b) = (" << format_double(bw.h) << ", " << format_double(bw.b) << ")\n";

    json extra;
    extra["bandwidths"] = json{{"h", std::isnan(bw.h) ? json(nullptr) : json(bw.h)}, {"b", bw.b}, {"selection", selection}};
    if (!std::isnan(theta)) extra["theta_hat"] = theta;
    extra["replication"] = 0;
    try {
        write_artifacts(opt.out_dir, {table.finish("cross_section.csv")}, "cross-section", cfg, started, extra, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

// --- validate ---------------------------------------------------------------

int cmd_validate(const Options& opt, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(opt, err);
    const SimulationConfig& sim = cfg.simulation;

    std::optional<ErrorEnsemble> ensemble;
    try {
        if (cfg.errors) {
            ensemble.emplace(read_error_spec(*cfg.errors));
        } else {
            ensemble.emplace(build_ensemble(sim.family, sim.n));
        }
    } catch (const ConfigError& e) {
        err << "error: " << (e.line() > 0 ? "line " + std::to_string(e.line()) + ": " : std::string()) << e.what()
            << '\n';
        return kExitUsage;
    }

    bool all_passed = true;
    try {
        const auto quad = QuadratureGrid::gauss_legendre(sim.quad_nodes);
        out << "ensemble: " << ensemble->size() << " observations, " << quad.size() << " quadrature nodes, c_sup "
            << format_double(cfg.c_sup) << '\n';
        for (const Bandwidths& bw : sim.bandwidth_pairs()) {
            const ValidationReport rep = validate_ensemble(*ensemble, bw.b, quad.nodes());
            std::string diag;
            try {
                diag = format_double(variance_bound_diagnostic(*ensemble, bw, quad, cfg.c_sup));
            } catch (const DegenerateDenominator&) {
                diag = "Inf";
            }
            all_passed = all_passed && rep.passed;
            out << "h=" << format_double(bw.h) << " b=" << format_double(bw.b) << ' '
                << (rep.passed ? "PASS" : "FAIL") << " min_log_S=" << format_double(rep.min_log_denominator)
                << " at v=" << format_double(rep.argmin_frequency) << " variance_bound=" << diag << '\n';
            if (!rep.passed) {
                out << "  failing nodes (" << rep.failing_nodes.size() << "):";
                for (std::size_t i = 0; i < rep.failing_nodes.size(); ++i) {
                    out << ' ' << rep.failing_nodes[i] << "@v=" << format_double(rep.failing_frequencies[i]);
                }
                out << '\n';
            }
        }
    } catch (const std::exception& e) {
        err << "error: validation failed to run: " << e.what() << '\n';
        return kExitRuntime;
    }
    out << (all_passed ? "all pairs pass\n" : "some pairs fail\n");
    return all_passed ? kExitOk : kExitValidationFailed;
}

}  // namespace

ErrorEnsemble read_error_spec(const std::string& path) {
    const csv::Table table = read_table(path, "errors");
    const std::size_t family_col = table.column("family");
    std::size_t param_col = table.column("parameter");
    if (param_col == std::string::npos) param_col = table.column("variance");
    if (family_col == std::string::npos) throw ConfigError("errors", 1, path + ": missing column 'family'");
    if (param_col == std::string::npos) {
        throw ConfigError("errors", 1, path + ": missing column 'parameter' (or 'variance')");
    }
    if (table.rows.empty()) throw ConfigError("errors", 0, path + ": no rows");

    std::vector<ErrorModel> models;
    models.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ErrorFamily family{};
        try {
            family = parse_error_family(table.rows[r][family_col]);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("family", table.lines[r], path + ": " + e.what());
        }
        if (family == ErrorFamily::Degenerate && table.rows[r][param_col].empty()) {
            models.push_back(ErrorModel::degenerate());
            continue;
        }
        const double param = parse_cell(table, r, param_col, path);
        try {
            models.push_back(ErrorModel::make(family, param));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(table.header[param_col], table.lines[r], path + ": " + e.what());
        }
    }
    return ErrorEnsemble(std::move(models));
}

Sample read_sample(const std::string& path, const ErrorEnsemble& ensemble) {
    const csv::Table table = read_table(path, "data");
    std::size_t cols[3];
    const char* names[3] = {"x", "w", "y"};
    for (int c = 0; c < 3; ++c) {
        cols[c] = table.column(names[c]);
        if (cols[c] == std::string::npos) {
            throw ConfigError("data", 1, path + ": missing column '" + std::string(names[c]) + "'");
        }
    }
    if (table.rows.size() != ensemble.size()) {
        throw ConfigError("data", 0, path + " has " + std::to_string(table.rows.size()) +
                                         " rows but the error spec has " + std::to_string(ensemble.size()));
    }
    std::vector<double> x, w, y;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        x.push_back(parse_cell(table, r, cols[0], path));
        w.push_back(parse_cell(table, r, cols[1], path));
        y.push_back(parse_cell(table, r, cols[2], path));
    }
    try {
        return Sample(std::move(x), std::move(w), std::move(y), ensemble);
    } catch (const std::exception& e) {
        throw ConfigError("data", 0, path + ": " + e.what());
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Partial deconvolution kernel regression with heteroscedastic measurement error", "hetdeconv"};
    app.set_version_flag("--version", HETDECONV_VERSION);
    app.require_subcommand(1);

    Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--set", opt.overrides, "Override a config key, e.g. --set n=500 --set h_grid.count=3")
            ->allow_extra_args(false);
        sub->add_option("--workers", opt.workers, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--full-scale", opt.full_scale, "Use the full protocol size");
    };
    auto with_out = [&](CLI::App* sub) {
        sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo ASE study; writes ase_report.csv");
    common(simulate);
    with_out(simulate);

    CLI::App* estimate = app.add_subcommand("estimate", "Fit r_hat to a data file; writes predictions.csv");
    common(estimate);
    with_out(estimate);
    estimate->add_option("--data", opt.data, "CSV with columns x, w, y");
    estimate->add_option("--errors", opt.errors, "CSV with columns family, parameter (one row per observation)");

    CLI::App* section = app.add_subcommand("cross-section", "Estimate along a line; writes cross_section.csv");
    common(section);
    with_out(section);
    section->add_option("--axis", opt.axis, "fix_x or fix_t");
    section->add_option("--value", opt.value, "Value of the fixed coordinate in [-2, 2]");
    section->add_option("--estimator", opt.estimator, "r_hat, naive or r_tilde");

    CLI::App* validate = app.add_subcommand("validate", "Check the error ensemble on the bandwidth grid");
    common(validate);
    validate->add_option("--errors", opt.errors, "CSV with columns family, parameter");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << HETDECONV_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << "run with --help for usage\n";
        return kExitUsage;
    }

    set_workers(opt.workers);
    try {
        if (simulate->parsed()) return cmd_simulate(opt, out, err);
        if (estimate->parsed()) return cmd_estimate(opt, out, err);
        if (section->parsed()) return cmd_cross_section(opt, out, err);
        return cmd_validate(opt, out, err);
    } catch (const Exit& e) {
        return e.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace hetdeconv::cli
