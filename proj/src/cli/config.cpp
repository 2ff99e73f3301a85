#include "hetdeconv/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace hetdeconv {

using json = nlohmann::ordered_json;

ConfigError::ConfigError(std::string field, std::size_t line, const std::string& message)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

namespace {

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw ConfigError(field, 0, message);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known) fail(join(path, item.key()), "unknown key");
    }
}

std::uint64_t read_uint(const json& j, const std::string& field) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        if (j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
        fail(field, "must be non-negative, got " + j.dump());
    }
    fail(field, "expected a non-negative integer, got " + j.dump());
}

double read_double(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "expected a number, got " + j.dump());
    return j.get<double>();
}

std::string read_string(const json& j, const std::string& field) {
    if (!j.is_string()) fail(field, "expected a string, got " + j.dump());
    return j.get<std::string>();
}

template <class Parse>
auto read_enum(const json& j, const std::string& field, Parse parse) {
    const std::string s = read_string(j, field);
    try {
        return parse(s);
    } catch (const std::invalid_argument& e) {
        fail(field, e.what());
    }
}

void read_grid(const json& j, const std::string& field, GridAxis& axis) {
    check_keys(j, field, {"min", "max", "count"});
    if (j.contains("min")) axis.min = read_double(j["min"], field + ".min");
    if (j.contains("max")) axis.max = read_double(j["max"], field + ".max");
    if (j.contains("count")) axis.count = read_uint(j["count"], field + ".count");
}

json grid_json(const GridAxis& axis) {
    return json{{"min", axis.min}, {"max", axis.max}, {"count", axis.count}};
}

RunConfig interpret(const json& doc) {
    check_keys(doc, "",
               {"schema_version", "model", "error_family", "n", "reps", "seed", "quad_nodes", "h_grid", "b_grid",
                "eval_grid", "c_sup", "h", "b", "data", "errors", "query_grid", "cross_section"});
    if (!doc.contains("schema_version")) fail("schema_version", "missing");
    if (const auto v = read_uint(doc["schema_version"], "schema_version"); v != kSchemaVersion) {
        fail("schema_version", "unsupported version " + std::to_string(v) + ", expected " +
                                   std::to_string(kSchemaVersion));
    }

    RunConfig cfg;
    SimulationConfig& sim = cfg.simulation;
    if (doc.contains("model")) sim.model = read_enum(doc["model"], "model", parse_model);
    if (doc.contains("error_family")) {
        sim.family = read_enum(doc["error_family"], "error_family", parse_error_family);
    }
    if (doc.contains("n")) sim.n = read_uint(doc["n"], "n");
    if (doc.contains("reps")) sim.reps = read_uint(doc["reps"], "reps");
    if (doc.contains("seed")) sim.seed = read_uint(doc["seed"], "seed");
    if (doc.contains("quad_nodes")) sim.quad_nodes = read_uint(doc["quad_nodes"], "quad_nodes");
    if (doc.contains("h_grid")) read_grid(doc["h_grid"], "h_grid", sim.h_grid);
    if (doc.contains("b_grid")) read_grid(doc["b_grid"], "b_grid", sim.b_grid);
    if (doc.contains("eval_grid")) read_grid(doc["eval_grid"], "eval_grid", sim.eval_grid);
    if (doc.contains("c_sup")) cfg.c_sup = read_double(doc["c_sup"], "c_sup");

    auto optional_double = [&](const char* key, std::optional<double>& out) {
        if (doc.contains(key) && !doc[key].is_null()) out = read_double(doc[key], key);
    };
    auto optional_string = [&](const char* key, std::optional<std::string>& out) {
        if (doc.contains(key) && !doc[key].is_null()) out = read_string(doc[key], key);
    };
    optional_double("h", cfg.h);
    optional_double("b", cfg.b);
    optional_string("data", cfg.data);
    optional_string("errors", cfg.errors);

    if (doc.contains("query_grid")) {
        const json& q = doc["query_grid"];
        check_keys(q, "query_grid", {"x", "t"});
        if (q.contains("x")) read_grid(q["x"], "query_grid.x", cfg.query_grid.x);
        if (q.contains("t")) read_grid(q["t"], "query_grid.t", cfg.query_grid.t);
    }
    if (doc.contains("cross_section")) {
        const json& c = doc["cross_section"];
        check_keys(c, "cross_section", {"axis", "value", "estimator"});
        if (c.contains("axis")) cfg.cross_section.axis = read_enum(c["axis"], "cross_section.axis", parse_axis);
        if (c.contains("value")) cfg.cross_section.value = read_double(c["value"], "cross_section.value");
        if (c.contains("estimator")) {
            cfg.cross_section.estimator = read_enum(c["estimator"], "cross_section.estimator", parse_estimator);
        }
    }
    return cfg;
}

json to_json(const RunConfig& cfg) {
    const SimulationConfig& sim = cfg.simulation;
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["model"] = std::string(to_string(sim.model));
    doc["error_family"] = std::string(to_string(sim.family));
    doc["n"] = sim.n;
    doc["reps"] = sim.reps;
    doc["seed"] = sim.seed;
    doc["quad_nodes"] = sim.quad_nodes;
    doc["h_grid"] = grid_json(sim.h_grid);
    doc["b_grid"] = grid_json(sim.b_grid);
    doc["eval_grid"] = grid_json(sim.eval_grid);
    doc["c_sup"] = cfg.c_sup;
    if (cfg.h) doc["h"] = *cfg.h;
    if (cfg.b) doc["b"] = *cfg.b;
    if (cfg.data) doc["data"] = *cfg.data;
    if (cfg.errors) doc["errors"] = *cfg.errors;
    doc["query_grid"] = json{{"x", grid_json(cfg.query_grid.x)}, {"t", grid_json(cfg.query_grid.t)}};
    doc["cross_section"] = json{{"axis", std::string(to_string(cfg.cross_section.axis))},
                                {"value", cfg.cross_section.value},
                                {"estimator", std::string(to_string(cfg.cross_section.estimator))}};
    return doc;
}

std::size_t line_at(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
    return line;
}

/// Line on which the dotted key path appears, or 0.
std::size_t line_of_key(std::string_view text, const std::string& path) {
    if (path.empty()) return 0;
    std::size_t pos = 0;
    std::size_t start = 0;
    while (start <= path.size()) {
        const std::size_t dot = path.find('.', start);
        const std::string key = "\"" + path.substr(start, dot - start) + "\"";
        for (;;) {
            pos = text.find(key, pos);
            if (pos == std::string_view::npos) return 0;
            std::size_t after = pos + key.size();
            while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
            if (after < text.size() && text[after] == ':') break;
            pos += key.size();
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return line_at(text, pos);
}

void apply_override(json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) fail("", "--set expects key=value, got '" + spec + "'");
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);

    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) fail(path, "empty component in --set key");
        if (!node->is_object()) fail(path, "--set path descends into a non-object");
        if (dot == std::string::npos) {
            json value = json::parse(raw, nullptr, false);
            if (value.is_discarded()) value = raw;
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

bool overridden(const std::vector<std::string>& overrides, const std::string& field) {
    for (const auto& spec : overrides) {
        const std::string key = spec.substr(0, spec.find('='));
        if (field == key || field.rfind(key + ".", 0) == 0 || key.rfind(field + ".", 0) == 0) return true;
    }
    return false;
}

}  // namespace

void RunConfig::validate() const {
    try {
        simulation.validate();
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        const auto colon = what.find(": ");
        if (colon == std::string::npos) fail("", what);
        fail(what.substr(0, colon), what.substr(colon + 2));
    }
    if (!(c_sup > 0.0) || !std::isfinite(c_sup)) fail("c_sup", "must be positive and finite");
    if (h && !(*h > 0.0 && std::isfinite(*h))) fail("h", "must be positive and finite");
    if (b && !(*b > 0.0 && std::isfinite(*b))) fail("b", "must be positive and finite");
    auto check_query = [](const GridAxis& axis, const std::string& name) {
        if (axis.count < 1) fail(name + ".count", "must be at least 1");
        if (!std::isfinite(axis.min) || !std::isfinite(axis.max) || !(axis.max >= axis.min)) {
            fail(name, "needs finite bounds with max >= min");
        }
    };
    check_query(query_grid.x, "query_grid.x");
    check_query(query_grid.t, "query_grid.t");
    if (!(cross_section.value >= -2.0 && cross_section.value <= 2.0)) {
        fail("cross_section.value", "must lie in [-2, 2]");
    }
}

RunConfig parse_config(std::string_view text, const ConfigLayers& layers) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", line_at(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }

    try {
        RunConfig cfg = interpret(doc);
        if (layers.full_scale) cfg.simulation.apply_full_scale();
        if (layers.seed) cfg.simulation.seed = *layers.seed;
        if (!layers.overrides.empty()) {
            json layered = to_json(cfg);
            for (const auto& spec : layers.overrides) apply_override(layered, spec);
            cfg = interpret(layered);
        }
        cfg.validate();
        return cfg;
    } catch (const ConfigError& e) {
        if (overridden(layers.overrides, e.field())) throw ConfigError(e.field(), 0, std::string(e.what()) + " (from the command line)");
        throw ConfigError(e.field(), line_of_key(text, e.field()), e.what());
    }
}

RunConfig load_config(const std::string& path, const ConfigLayers& layers) {
    if (path.empty()) return parse_config(emit_config(RunConfig{}), layers);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", 0, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), layers);
}

std::string emit_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace hetdeconv
