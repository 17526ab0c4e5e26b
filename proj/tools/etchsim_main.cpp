// Batch front end: wires layouts, process databases, the etch automaton,
// mesh export, mask optimization, and tolerance studies into subcommands.
// All configuration lives in JSON files; a handful of flags override the
// reproducibility-relevant knobs (seed, threads, output directory).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "etchsim/analysis.hpp"
#include "etchsim/engine.hpp"
#include "etchsim/error.hpp"
#include "etchsim/layout.hpp"
#include "etchsim/mesh.hpp"
#include "etchsim/optimizer.hpp"
#include "etchsim/procdb.hpp"
#include "etchsim/rules.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace etchsim;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "': invalid JSON: " + std::string(e.what()));
    }
}

// Paths inside a config file resolve relative to the config's directory.
std::string resolve_path(const fs::path& base, const std::string& rel) {
    return (base / fs::path(rel)).string();
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot open '" + tmp + "' for writing");
        out << text;
        if (!out) throw RuntimeError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw RuntimeError("cannot move '" + tmp + "' into place at '" + path + "'");
}

int require_positive_int(const json& obj, const char* key, const std::string& field) {
    if (!obj.contains(key) || !obj[key].is_number_integer())
        throw ConfigError("field '" + field + "' must be an integer");
    const int v = obj[key].get<int>();
    if (v <= 0) throw ConfigError("field '" + field + "' must be positive");
    return v;
}

double number_or(const json& obj, const char* key, double fallback, const std::string& field) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError("field '" + field + "' must be a number");
    return obj[key].get<double>();
}

FacePolicy parse_policy(const json& value, const std::string& field) {
    if (!value.is_string())
        throw ConfigError("field '" + field + "' must be a string");
    const std::string s = value.get<std::string>();
    if (s == "exposed") return FacePolicy::Exposed;
    if (s == "mirrored") return FacePolicy::Mirrored;
    if (s == "solid") return FacePolicy::Solid;
    throw ConfigError("field '" + field + "': unknown policy '" + s +
                      "' (expected exposed, mirrored or solid)");
}

// Flag values; count-checked so config values survive when a flag is unset.
struct FlagOverrides {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool threads_set = false;
    std::int64_t snapshot_stride = 0;
    bool stride_set = false;
    std::string out_dir;
    bool out_set = false;
};

std::uint64_t resolve_seed(const json& doc, const FlagOverrides& ov) {
    if (ov.seed_set) return ov.seed;
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() && !doc["seed"].is_number_unsigned())
            throw ConfigError("field 'seed' must be an integer");
        return doc["seed"].get<std::uint64_t>();
    }
    return 1;
}

int resolve_threads(const json& doc, const FlagOverrides& ov) {
    int threads = 1;
    if (ov.threads_set) {
        threads = ov.threads;
    } else if (doc.contains("threads")) {
        if (!doc["threads"].is_number_integer())
            throw ConfigError("field 'threads' must be an integer");
        threads = doc["threads"].get<int>();
    } else if (const char* env = std::getenv("ETCHSIM_THREADS")) {
        try {
            threads = std::stoi(env);
        } catch (const std::exception&) {
            throw ConfigError("ETCHSIM_THREADS must be an integer, got '" + std::string(env) +
                              "'");
        }
    }
    if (threads < 1) throw ConfigError("field 'threads' must be at least 1");
    return threads;
}

std::int64_t resolve_stride(const json& doc, const FlagOverrides& ov) {
    std::int64_t stride = 0;
    if (ov.stride_set) {
        stride = ov.snapshot_stride;
    } else if (doc.contains("snapshot_stride")) {
        if (!doc["snapshot_stride"].is_number_integer())
            throw ConfigError("field 'snapshot_stride' must be an integer");
        stride = doc["snapshot_stride"].get<std::int64_t>();
    }
    if (stride < 0) throw ConfigError("field 'snapshot_stride' must be non-negative");
    return stride;
}

struct OutputPlan {
    fs::path dir;
    std::string prefix;

    std::string file(const std::string& suffix) const {
        return (dir / (prefix + suffix)).string();
    }
};

OutputPlan resolve_output(const json& doc, const FlagOverrides& ov,
                          const std::string& default_prefix) {
    OutputPlan plan;
    plan.dir = ".";
    plan.prefix = default_prefix;
    if (doc.contains("output")) {
        const json& jo = doc["output"];
        if (!jo.is_object()) throw ConfigError("field 'output' must be an object");
        if (jo.contains("dir")) {
            if (!jo["dir"].is_string()) throw ConfigError("field 'output.dir' must be a string");
            plan.dir = jo["dir"].get<std::string>();
        }
        if (jo.contains("prefix")) {
            if (!jo["prefix"].is_string())
                throw ConfigError("field 'output.prefix' must be a string");
            plan.prefix = jo["prefix"].get<std::string>();
        }
    }
    if (ov.out_set) plan.dir = ov.out_dir;
    std::error_code ec;
    fs::create_directories(plan.dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + plan.dir.string() + "'");
    return plan;
}

// Builds the die: dimensions, boundaries, masks rasterized from the layout
// (with an optional extra rotation on top of the layout's own), etch stops.
SimDomain build_domain(const json& doc, const fs::path& base, double extra_rotation_deg,
                       Layout* layout_out) {
    if (!doc.contains("domain") || !doc["domain"].is_object())
        throw ConfigError("field 'domain' must be an object");
    const json& jd = doc["domain"];

    SimDomain dom;
    dom.nx = require_positive_int(jd, "nx", "domain.nx");
    dom.ny = require_positive_int(jd, "ny", "domain.ny");
    dom.nz = require_positive_int(jd, "nz", "domain.nz");
    dom.lattice_constant_um = number_or(jd, "lattice_constant_um", 0.5431,
                                        "domain.lattice_constant_um");
    if (!(dom.lattice_constant_um > 0.0))
        throw ConfigError("field 'domain.lattice_constant_um' must be positive");

    if (jd.contains("boundary")) {
        const json& jb = jd["boundary"];
        if (!jb.is_object()) throw ConfigError("field 'domain.boundary' must be an object");
        for (const auto& [key, value] : jb.items()) {
            const FacePolicy p = parse_policy(value, "domain.boundary." + key);
            if (key == "x") {
                dom.boundary.x_min = dom.boundary.x_max = p;
            } else if (key == "y") {
                dom.boundary.y_min = dom.boundary.y_max = p;
            } else if (key == "x_min") {
                dom.boundary.x_min = p;
            } else if (key == "x_max") {
                dom.boundary.x_max = p;
            } else if (key == "y_min") {
                dom.boundary.y_min = p;
            } else if (key == "y_max") {
                dom.boundary.y_max = p;
            } else if (key == "z_min") {
                dom.boundary.z_min = p;
            } else if (key == "z_max") {
                dom.boundary.z_max = p;
            } else {
                throw ConfigError("field 'domain.boundary." + key + "' is not a face");
            }
        }
    }

    if (doc.contains("layout")) {
        if (!doc["layout"].is_string())
            throw ConfigError("field 'layout' must be a path string");
        const std::string path = resolve_path(base, doc["layout"].get<std::string>());
        Layout layout;
        try {
            layout = parse_layout(read_text(path));
        } catch (const ConfigError& e) {
            throw ConfigError("layout '" + path + "': " + std::string(e.what()));
        }
        const int w = 4 * dom.nx, h = 4 * dom.ny;
        const double pixel = dom.lattice_constant_um / 4.0;
        const double rot = layout.rotation_deg + extra_rotation_deg;
        if (!layout.top.empty()) dom.top_mask = rasterize(layout.top, w, h, pixel, rot);
        if (!layout.bottom.empty())
            dom.bottom_mask = rasterize(layout.bottom, w, h, pixel, rot);
        dom.etch_stops = layout.etch_stops;
        if (layout_out) *layout_out = std::move(layout);
    }
    return dom;
}

std::vector<ProcessStepDef> parse_recipe_steps(const json& jp) {
    if (!jp.contains("steps") || !jp["steps"].is_array() || jp["steps"].empty())
        throw ConfigError("field 'process.steps' must be a non-empty array");
    std::vector<ProcessStepDef> defs;
    for (const json& js : jp["steps"]) {
        if (!js.is_object()) throw ConfigError("field 'process.steps' entries must be objects");
        ProcessStepDef def;
        if (!js.contains("etchant") || !js["etchant"].is_string())
            throw ConfigError("field 'process.steps[].etchant' must be a string");
        def.etchant = js["etchant"].get<std::string>();
        def.concentration_wt_pct =
            number_or(js, "concentration_wt_pct", -1.0, "process.steps[].concentration_wt_pct");
        def.temperature_C = number_or(js, "temperature_C", -1000.0,
                                      "process.steps[].temperature_C");
        def.duration_min = number_or(js, "duration_min", 0.0, "process.steps[].duration_min");
        if (!js.contains("concentration_wt_pct"))
            throw ConfigError("field 'process.steps[].concentration_wt_pct' is required");
        if (!js.contains("temperature_C"))
            throw ConfigError("field 'process.steps[].temperature_C' is required");
        if (!(def.duration_min > 0.0))
            throw ConfigError("field 'process.steps[].duration_min' must be positive");
        defs.push_back(std::move(def));
    }
    return defs;
}

struct ProcessPlan {
    ProcessDb db;
    std::vector<ProcessStepDef> defs;
    std::vector<ResolvedStep> stages;
    double kappa = kCalibratedKappa;
};

ProcessPlan build_process(const json& doc, const fs::path& base, double lattice_constant_um) {
    if (!doc.contains("process") || !doc["process"].is_object())
        throw ConfigError("field 'process' must be an object");
    const json& jp = doc["process"];
    if (!jp.contains("db") || !jp["db"].is_string())
        throw ConfigError("field 'process.db' must be a path string");

    ProcessPlan plan;
    plan.kappa = number_or(doc, "kappa", kCalibratedKappa, "kappa");
    if (!(plan.kappa > 0.0)) throw ConfigError("field 'kappa' must be positive");
    plan.db = load_db(resolve_path(base, jp["db"].get<std::string>()));
    plan.defs = parse_recipe_steps(jp);
    plan.stages = resolve_recipe(plan.db, plan.defs, lattice_constant_um, plan.kappa);
    return plan;
}

RuleTable build_rules(const json& doc, const fs::path& base) {
    if (!doc.contains("rules")) return RuleTable::builtin();
    if (!doc["rules"].is_string()) throw ConfigError("field 'rules' must be a path string");
    const std::string path = resolve_path(base, doc["rules"].get<std::string>());
    return load_custom_rules(read_text(path));
}

struct RecipeRun {
    std::int64_t steps = 0;
    std::int64_t removed = 0;
    bool fixed_point = false;
    double elapsed_min = 0.0;
};

// Runs every stage back to back on one simulation. Per-condition rates win
// over static custom-rule probabilities for the classes they both name.
RecipeRun run_recipe(Simulation& sim, const RuleTable& base_rules,
                     const std::vector<ResolvedStep>& stages, std::uint64_t seed, int threads,
                     std::int64_t stride,
                     const std::function<void(const Simulation&)>& on_snapshot) {
    RecipeRun out;
    for (const ResolvedStep& stage : stages) {
        EngineConfig cfg;
        cfg.rules = base_rules;
        for (const auto& [plane, p] : stage.probabilities) cfg.rules.set_probability(plane, p);
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.step_duration_min = stage.step_duration_min;
        const RunResult r = sim.run(cfg, stage.step_count, stride, on_snapshot);
        out.steps += r.steps;
        out.removed += r.removed;
        out.fixed_point = r.fixed_point;
        out.elapsed_min += r.elapsed_min;
    }
    return out;
}

json metrics_to_json(const Metrics& m, const RecipeRun& run) {
    json doc;
    doc["steps"] = m.step_count;
    doc["fixed_point"] = run.fixed_point;
    doc["elapsed_min"] = run.elapsed_min;
    doc["removed_sites"] = m.removed_sites;
    doc["surface_sites"] = m.surface_sites;
    doc["etch_stop_sites"] = m.etch_stop_sites;
    doc["removed_volume_um3"] = m.removed_volume_um3;
    doc["mean_depth_um"] = m.mean_depth_um;
    doc["max_depth_um"] = m.max_depth_um;
    doc["undercut_columns"] = m.undercut_columns;
    doc["max_undercut_um"] = m.max_undercut_um;
    return doc;
}

std::map<std::string, double> scalar_metrics(const Simulation& sim) {
    const Metrics m = sim.metrics();
    std::map<std::string, double> out;
    out["mean_depth_um"] = m.mean_depth_um;
    out["max_depth_um"] = m.max_depth_um;
    out["removed_volume_um3"] = m.removed_volume_um3;
    out["removed_sites"] = static_cast<double>(m.removed_sites);
    out["surface_sites"] = static_cast<double>(m.surface_sites);
    out["max_undercut_um"] = m.max_undercut_um;
    out["undercut_columns"] = static_cast<double>(m.undercut_columns);
    return out;
}

int cmd_simulate(const std::string& config_path, const FlagOverrides& ov) {
    const json doc = parse_json_file(config_path);
    const fs::path base = fs::path(config_path).parent_path();

    const SimDomain dom = build_domain(doc, base, 0.0, nullptr);
    const ProcessPlan plan = build_process(doc, base, dom.lattice_constant_um);
    const RuleTable base_rules = build_rules(doc, base);
    const std::uint64_t seed = resolve_seed(doc, ov);
    const int threads = resolve_threads(doc, ov);
    const std::int64_t stride = resolve_stride(doc, ov);
    const OutputPlan out = resolve_output(doc, ov, "etch");

    Simulation sim(dom);
    std::function<void(const Simulation&)> on_snapshot;
    if (stride > 0) {
        on_snapshot = [&](const Simulation& s) {
            char suffix[48];
            std::snprintf(suffix, sizeof suffix, "_step_%06lld.suzv",
                          static_cast<long long>(s.step_index()));
            write_suzv(out.file(suffix), voxelize(s.grid()));
        };
    }
    const RecipeRun run = run_recipe(sim, base_rules, plan.stages, seed, threads, stride,
                                     on_snapshot);

    const VoxelVolume vol = voxelize(sim.grid());
    write_suzv(out.file("_final.suzv"), vol);
    const SurfaceMesh mesh = extract_surface(vol);
    write_stl(out.file("_final.stl"), mesh);
    write_obj(out.file("_final.obj"), mesh);

    json report = metrics_to_json(sim.metrics(), run);
    report["seed"] = seed;
    report["threads"] = threads;
    json stages = json::array();
    for (size_t i = 0; i < plan.stages.size(); ++i) {
        const ResolvedStep& st = plan.stages[i];
        json js;
        js["etchant"] = plan.defs[i].etchant;
        js["concentration_wt_pct"] = plan.defs[i].concentration_wt_pct;
        js["temperature_C"] = plan.defs[i].temperature_C;
        js["duration_min"] = st.duration_min;
        js["step_count"] = st.step_count;
        js["step_duration_min"] = st.step_duration_min;
        stages.push_back(std::move(js));
    }
    report["stages"] = std::move(stages);
    write_text_atomic(out.file("_metrics.json"), report.dump(2) + "\n");

    std::cout << "simulate: " << run.steps << " steps, " << run.removed
              << " sites removed, mean depth "
              << sim.metrics().mean_depth_um << " um"
              << (run.fixed_point ? ", fixed point" : "") << "\n"
              << "  outputs: " << out.file("_final.suzv") << " (+ .stl, .obj) and "
              << out.file("_metrics.json") << "\n";
    return 0;
}

int cmd_optimize(const std::string& config_path, const FlagOverrides& ov) {
    const json doc = parse_json_file(config_path);
    const fs::path base = fs::path(config_path).parent_path();

    const SimDomain dom = build_domain(doc, base, 0.0, nullptr);
    const ProcessPlan plan = build_process(doc, base, dom.lattice_constant_um);
    const RuleTable base_rules = build_rules(doc, base);
    const std::uint64_t seed = resolve_seed(doc, ov);
    const int threads = resolve_threads(doc, ov);
    const OutputPlan out = resolve_output(doc, ov, "opt");

    if (!doc.contains("target") || !doc["target"].is_string())
        throw ConfigError("field 'target' must be a path to a voxel volume");
    const VoxelVolume target = read_suzv(resolve_path(base, doc["target"].get<std::string>()));
    if (target.nx != dom.nx || target.ny != dom.ny || target.nz != dom.nz)
        throw ConfigError("field 'target': volume is " + std::to_string(target.nx) + "x" +
                          std::to_string(target.ny) + "x" + std::to_string(target.nz) +
                          " but the domain is " + std::to_string(dom.nx) + "x" +
                          std::to_string(dom.ny) + "x" + std::to_string(dom.nz));

    std::vector<double> weights;
    if (doc.contains("weights")) {
        if (!doc["weights"].is_string())
            throw ConfigError("field 'weights' must be a path to a voxel volume");
        const VoxelVolume wv = read_suzv(resolve_path(base, doc["weights"].get<std::string>()));
        if (wv.nx != target.nx || wv.ny != target.ny || wv.nz != target.nz)
            throw ConfigError("field 'weights': dimensions differ from the target volume");
        weights.assign(wv.occ.begin(), wv.occ.end());
    }

    GaConfig ga;
    ga.seed = seed;
    if (doc.contains("ga")) {
        const json& jg = doc["ga"];
        if (!jg.is_object()) throw ConfigError("field 'ga' must be an object");
        if (jg.contains("population")) ga.population = jg["population"].get<int>();
        if (jg.contains("generations")) ga.generations = jg["generations"].get<int>();
        if (jg.contains("tournament")) ga.tournament = jg["tournament"].get<int>();
        if (jg.contains("elites")) ga.elites = jg["elites"].get<int>();
        if (jg.contains("crossover_rate")) ga.crossover_rate = jg["crossover_rate"].get<double>();
        if (jg.contains("mutation_rate")) ga.mutation_rate = jg["mutation_rate"].get<double>();
        if (jg.contains("stop_at")) ga.stop_at = jg["stop_at"].get<double>();
    }

    const SimulateFn simulate = [&](const MaskBitmap& genome) {
        SimDomain candidate = dom;
        candidate.top_mask = genome;
        Simulation sim(candidate);
        run_recipe(sim, base_rules, plan.stages, seed, threads, 0, {});
        return voxelize(sim.grid());
    };

    const GaResult result = optimize_mask(4 * dom.nx, 4 * dom.ny, simulate, target, weights, ga);

    write_pgm(out.file("_best_mask.pgm"), result.best);
    Layout winner;
    winner.top = bitmap_to_polygons(result.best, dom.lattice_constant_um / 4.0);
    write_text_atomic(out.file("_best_layout.json"), layout_to_json(winner));

    std::ostringstream trace;
    trace << "generation,best_fitness\n";
    trace.precision(12);
    for (size_t g = 0; g < result.history.size(); ++g)
        trace << g << "," << result.history[g] << "\n";
    write_text_atomic(out.file("_trace.csv"), trace.str());

    json report;
    report["best_fitness"] = result.best_fitness;
    report["generations_run"] = result.generations_run;
    report["evaluations"] = result.evaluations;
    report["population"] = ga.population;
    report["seed"] = seed;
    write_text_atomic(out.file("_report.json"), report.dump(2) + "\n");

    std::cout << "optimize: best fitness " << result.best_fitness << " after "
              << result.generations_run << " generations (" << result.evaluations
              << " simulations)\n"
              << "  outputs: " << out.file("_best_mask.pgm")
              << " (+ _best_layout.json, _trace.csv, _report.json)\n";
    return 0;
}

int cmd_tolerance(const std::string& config_path, const FlagOverrides& ov) {
    const json doc = parse_json_file(config_path);
    const fs::path base = fs::path(config_path).parent_path();

    Layout layout;
    const SimDomain dom = build_domain(doc, base, 0.0, &layout);
    const ProcessPlan plan = build_process(doc, base, dom.lattice_constant_um);
    const RuleTable base_rules = build_rules(doc, base);
    const std::uint64_t seed = resolve_seed(doc, ov);
    const int threads = resolve_threads(doc, ov);
    const OutputPlan out = resolve_output(doc, ov, "tol");

    if (!doc.contains("samples") || !doc["samples"].is_number_integer())
        throw ConfigError("field 'samples' must be an integer");
    const int samples = doc["samples"].get<int>();

    ToleranceSpec spec;
    if (doc.contains("tolerance")) {
        const json& jt = doc["tolerance"];
        if (!jt.is_object()) throw ConfigError("field 'tolerance' must be an object");
        if (jt.contains("rate_spread_rel")) {
            if (!jt["rate_spread_rel"].is_object())
                throw ConfigError("field 'tolerance.rate_spread_rel' must be an object");
            for (const auto& [key, value] : jt["rate_spread_rel"].items()) {
                if (!value.is_number())
                    throw ConfigError("field 'tolerance.rate_spread_rel." + key +
                                      "' must be a number");
                spec.rate_spread_rel[plane_class_from_name(key)] = value.get<double>();
            }
        }
        spec.duration_spread_rel =
            number_or(jt, "duration_spread_rel", 0.0, "tolerance.duration_spread_rel");
        spec.rotation_spread_deg =
            number_or(jt, "rotation_spread_deg", 0.0, "tolerance.rotation_spread_deg");
        if (jt.contains("normal")) spec.normal = jt["normal"].get<bool>();
        if (jt.contains("perturb_ca_seed"))
            spec.perturb_ca_seed = jt["perturb_ca_seed"].get<bool>();
    }

    const bool has_layout = doc.contains("layout");
    const SampleFn run_sample = [&](const SampleParams& params) {
        // Perturb the physical rates, then rebuild probabilities so the
        // normalization and the step duration stay mutually consistent.
        std::vector<ResolvedStep> stages;
        stages.reserve(plan.defs.size());
        for (const ProcessStepDef& def : plan.defs) {
            RateRecord rec = lookup(plan.db, def.etchant, def.concentration_wt_pct,
                                    def.temperature_C);
            for (const auto& [plane, mult] : params.rate_multiplier) {
                const auto it = rec.rates_um_per_min.find(plane);
                if (it != rec.rates_um_per_min.end()) it->second *= mult;
            }
            ResolvedStep st;
            const auto res = rates_to_probabilities(rec.rates_um_per_min,
                                                    dom.lattice_constant_um, plan.kappa);
            st.probabilities = res.probabilities;
            st.step_duration_min = res.step_duration_min;
            st.duration_min = def.duration_min * params.duration_multiplier;
            st.step_count = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(
                       std::ceil(st.duration_min / st.step_duration_min - 1e-9)));
            st.record = std::move(rec);
            stages.push_back(std::move(st));
        }

        SimDomain sample_dom = dom;
        if (has_layout && params.rotation_offset_deg != 0.0) {
            const int w = 4 * dom.nx, h = 4 * dom.ny;
            const double pixel = dom.lattice_constant_um / 4.0;
            const double rot = layout.rotation_deg + params.rotation_offset_deg;
            if (!layout.top.empty()) sample_dom.top_mask = rasterize(layout.top, w, h, pixel, rot);
            if (!layout.bottom.empty())
                sample_dom.bottom_mask = rasterize(layout.bottom, w, h, pixel, rot);
        }

        Simulation sim(sample_dom);
        run_recipe(sim, base_rules, stages, params.ca_seed, threads, 0, {});
        return scalar_metrics(sim);
    };

    const ToleranceReport report = tolerance_run(spec, samples, seed, seed, run_sample);
    write_text_atomic(out.file("_report.json"), report_to_json(report));
    write_text_atomic(out.file("_report.csv"), report_to_csv(report));

    const Stats& depth = report.metrics.at("mean_depth_um");
    std::cout << "tolerance: " << samples << " samples, mean depth " << depth.mean
              << " um (stddev " << depth.stddev << ")\n"
              << "  outputs: " << out.file("_report.json") << ", " << out.file("_report.csv")
              << "\n";
    return 0;
}

int cmd_export(const std::string& in_path, const std::string& out_path, std::string format,
               bool do_simplify) {
    if (format == "auto") {
        const std::string ext = fs::path(out_path).extension().string();
        if (ext == ".stl")
            format = "stl";
        else if (ext == ".obj")
            format = "obj";
        else
            throw ConfigError("cannot infer format from '" + out_path +
                              "'; pass --format stl|obj");
    }
    if (format != "stl" && format != "obj")
        throw ConfigError("unknown format '" + format + "' (expected stl or obj)");

    const VoxelVolume vol = read_suzv(in_path);
    SurfaceMesh mesh = extract_surface(vol);
    if (do_simplify) mesh = simplify(mesh);
    if (format == "stl")
        write_stl(out_path, mesh);
    else
        write_obj(out_path, mesh);
    std::cout << "export: " << mesh.triangles.size() << " triangles -> " << out_path << "\n";
    return 0;
}

int cmd_validate_db(const std::string& db_path) {
    const ProcessDb db = load_db(db_path);
    std::cout << "ok: " << db.records.size() << " record" << (db.records.size() == 1 ? "" : "s")
              << "\n";
    for (const RateRecord& rec : db.records) {
        std::cout << "  " << rec.etchant << " " << rec.concentration_wt_pct << " wt% @ "
                  << rec.temperature_C << " C:";
        for (const auto& [plane, rate] : rec.rates_um_per_min)
            std::cout << " " << plane.name() << "=" << rate;
        std::cout << " um/min\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anisotropic wet-etch process simulator"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, db_path;
    std::string format = "auto";
    bool do_simplify = false;
    FlagOverrides ov;

    auto add_common = [&](CLI::App* sub, bool with_stride) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--seed", ov.seed, "override the config seed");
        sub->add_option("--threads", ov.threads, "worker threads (or ETCHSIM_THREADS)");
        sub->add_option("--out", ov.out_dir, "override the output directory");
        if (with_stride)
            sub->add_option("--snapshot-stride", ov.snapshot_stride,
                            "write a voxel snapshot every N steps");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "etch a die and export the result");
    add_common(simulate, true);
    CLI::App* optimize = app.add_subcommand("optimize", "evolve a mask toward a target volume");
    add_common(optimize, false);
    CLI::App* tolerance =
        app.add_subcommand("tolerance", "Monte Carlo spread of process variations");
    add_common(tolerance, false);

    CLI::App* exporter = app.add_subcommand("export", "convert a voxel volume to STL or OBJ");
    exporter->add_option("--in", in_path, "input .suzv volume")->required();
    exporter->add_option("--out", out_path, "output mesh path")->required();
    exporter->add_option("--format", format, "stl, obj or auto (from extension)");
    exporter->add_flag("--simplify", do_simplify, "merge coplanar faces");

    CLI::App* validate = app.add_subcommand("validate-db", "check a process database file");
    validate->add_option("--db", db_path, "process database JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    for (CLI::App* sub : {simulate, optimize, tolerance}) {
        if (!app.got_subcommand(sub)) continue;
        ov.seed_set = sub->count("--seed") > 0;
        ov.threads_set = sub->count("--threads") > 0;
        ov.out_set = sub->count("--out") > 0;
        ov.stride_set = sub == simulate && sub->count("--snapshot-stride") > 0;
    }

    try {
        if (app.got_subcommand(simulate)) return cmd_simulate(config_path, ov);
        if (app.got_subcommand(optimize)) return cmd_optimize(config_path, ov);
        if (app.got_subcommand(tolerance)) return cmd_tolerance(config_path, ov);
        if (app.got_subcommand(exporter)) return cmd_export(in_path, out_path, format,
                                                            do_simplify);
        if (app.got_subcommand(validate)) return cmd_validate_db(db_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
