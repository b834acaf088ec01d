/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of qsca, a side-channel laboratory for quantized networks.
 */

#include "qsca/cli.hpp"
#include "qsca/errors.hpp"
#include "qsca/harness.hpp"
#include "qsca/model_io.hpp"
#include "qsca/report_io.hpp"
#include "qsca/rng.hpp"
#include "qsca/trace_archive.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>

namespace qsca {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

void add_common(CLI::App *cmd, CommonFlags &f, bool out_required) {
    cmd->add_option("--config", f.config, "JSON file with parameters")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    auto *o = cmd->add_option("--out", f.out, "output path");
    if (out_required)
        o->required();
}

/// Splits a config file into command keys and scenario keys. Keys that are
/// neither are rejected.
struct LoadedConfig {
    json command = json::object();
    json scenario = json::object();
};

LoadedConfig load_config(const std::optional<std::string> &path,
                         const std::set<std::string> &command_keys) {
    LoadedConfig c;
    if (!path)
        return c;
    const json doc = read_json_file(*path);
    if (!doc.is_object())
        throw ArgumentError("config " + *path + " must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (command_keys.count(it.key()))
            c.command[it.key()] = it.value();
        else if (config_keys().count(it.key()))
            c.scenario[it.key()] = it.value();
        else
            throw ArgumentError("unknown config key '" + it.key() + "' in " +
                                *path);
    }
    return c;
}

template <typename T>
T pick(const std::optional<T> &flag, const json &cfg, const std::string &key,
       T fallback) {
    if (flag)
        return *flag;
    if (cfg.contains(key))
        return cfg[key].get<T>();
    return fallback;
}

std::string require_path(const std::optional<std::string> &flag,
                         const json &cfg, const std::string &key,
                         const std::string &option) {
    const std::string p = pick<std::string>(flag, cfg, key, "");
    if (p.empty())
        throw ArgumentError(option + " is required");
    return p;
}

ScenarioConfig resolve(ScenarioConfig base, const LoadedConfig &c,
                       const CommonFlags &f) {
    ScenarioConfig cfg = config_from_json(c.scenario, std::move(base));
    if (f.seed)
        cfg.master_seed = *f.seed;
    if (f.threads)
        cfg.threads = *f.threads;
    cfg.validate();
    return cfg;
}

/// Writes a directory next to `dir`, then renames it into place.
template <typename Fn> void write_directory(const fs::path &dir, Fn &&fill) {
    if (fs::exists(dir))
        throw ArchiveError("output " + dir.string() + " already exists");
    fs::path tmp = dir;
    tmp += ".partial";
    fs::remove_all(tmp);
    try {
        fill(tmp);
        fs::rename(tmp, dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
}

fs::path default_model_out(const fs::path &report) {
    fs::path p = report;
    p.replace_extension(".model.json");
    return p;
}

json attack_only_report(const ScenarioConfig &cfg,
                        const NetworkRecovery &rec) {
    json attacks = json::array();
    for (const LayerRecovery &lr : rec.layers) {
        auto add = [&](OperationKind op, std::size_t coord, const CpaResult &r) {
            attacks.push_back(
                {{"operation", std::string(to_string(op))},
                 {"layer", lr.layer_index},
                 {"coordinate", coord},
                 {"guessed_value", r.guessed_value},
                 {"abs_correlation", r.guessed_abs_correlation()},
                 {"tie_break_used", r.tie_break_used}});
        };
        for (std::size_t w = 0; w < lr.weight_results.size(); w++)
            add(OperationKind::multiplication, w, lr.weight_results[w]);
        for (std::size_t b = 0; b < lr.bias_results.size(); b++)
            add(OperationKind::addition, b, lr.bias_results[b]);
    }
    return {{"format_version", REPORT_FORMAT_VERSION},
            {"kind", "attack"},
            {"target", "network"},
            {"config", config_to_json(cfg)},
            {"per_attack", std::move(attacks)},
            {"duration_seconds", nullptr}};
}

std::vector<double> coefficients_from_notes(const json &notes,
                                            const std::string &key) {
    if (!notes.is_object() || !notes.contains(key))
        throw ArchiveError("archive notes carry no '" + key +
                           "'; the profiled attack model needs the device's "
                           "leakage coefficients");
    return notes[key].get<std::vector<double>>();
}

// ---------------------------------------------------------------------------

struct GenModelArgs {
    CommonFlags f;
    std::optional<std::string> spec;
    std::optional<std::size_t> calibrate;
    bool desk_cnn = false;
};

void cmd_gen_model(const GenModelArgs &a, std::ostream &out) {
    const auto c = load_config(a.f.config, {"spec", "calibrate"});
    const ScenarioConfig cfg = resolve({}, c, a.f);
    QuantizedModel model = [&] {
        if (a.desk_cnn)
            return desk_cnn(a.f.seed.value_or(DESK_CNN_SEED));
        const std::string spec = require_path(a.spec, c.command, "spec", "--spec");
        const std::size_t calib =
            pick<std::size_t>(a.calibrate, c.command, "calibrate", 0);
        Rng model_rng = derive_stream(cfg.master_seed, 0, StreamPurpose::model);
        QuantizedModel m = random_model(parse_model_spec(spec), model_rng);
        if (calib > 0) {
            Rng input_rng =
                derive_stream(cfg.master_seed, 0, StreamPurpose::inputs);
            m = calibrate_requant_shifts(
                m, random_inputs(m.input_shape(), calib, input_rng));
        }
        std::vector<Layer> layers = m.layers();
        return QuantizedModel(m.input_shape(), std::move(layers),
                              {{"spec", spec},
                               {"seed", std::to_string(cfg.master_seed)},
                               {"calibration_inputs", std::to_string(calib)}});
    }();
    write_json_file(*a.f.out, model_to_json(model), -1);
    out << "wrote " << *a.f.out << ": " << model.parameter_count()
        << " parameters\n";
}

struct SimulateArgs {
    CommonFlags f;
    std::optional<std::string> model;
    std::optional<int> scenario;
    std::optional<std::size_t> inputs;
};

void cmd_simulate(const SimulateArgs &a, std::ostream &out) {
    const auto c = load_config(a.f.config, {"model"});
    const QuantizedModel victim =
        load_model(require_path(a.model, c.command, "model", "--model"));
    ScenarioConfig base;
    if (a.scenario)
        base = ScenarioConfig::builtin(*a.scenario, ExperimentTarget::network);
    ScenarioConfig cfg = resolve(base, c, a.f);
    if (a.inputs) {
        cfg.traces_per_attack = *a.inputs;
        cfg.validate();
    }
    NetworkSimulation sim = network_simulation(cfg, victim.input_shape());
    json notes = {{"scenario", config_to_json(cfg)},
                  {"product_coefficients", sim.leakage.product.coefficients},
                  {"sum_coefficients", sim.leakage.sum.coefficients},
                  {"noise_variance", cfg.noise_variance}};
    const SimulatedArchive archive(victim, std::move(sim.inputs), sim.leakage,
                                   std::move(notes));
    write_directory(*a.f.out, [&](const fs::path &dir) {
        write_archive(archive, dir);
    });
    out << "wrote " << *a.f.out << ": " << archive.targets().size()
        << " targets, " << cfg.traces_per_attack << " traces each\n";
}

struct AttackArgs {
    CommonFlags f;
    std::optional<std::string> archive;
    std::optional<std::string> victim;
    std::optional<std::string> attack_model;
    std::optional<int> scenario;
    std::optional<std::string> model_out;
};

void cmd_attack(const AttackArgs &a, std::ostream &out) {
    const auto c = load_config(a.f.config, {"archive", "victim", "model_out"});
    ScenarioConfig base;
    base.bias_min = -2048;
    base.bias_max = 2047;
    if (a.scenario) {
        const ScenarioConfig b =
            ScenarioConfig::builtin(*a.scenario, ExperimentTarget::network);
        base.attack_model = b.attack_model;
    }
    ScenarioConfig cfg = resolve(base, c, a.f);
    if (a.attack_model) {
        cfg.attack_model = attack_model_from_string(*a.attack_model);
        cfg.validate();
    }

    const DirectoryArchive archive(
        require_path(a.archive, c.command, "archive", "--archive"));
    NetworkLeakage leakage{LeakageModelSpec::hamming_weight(PRODUCT_WIDTH),
                           LeakageModelSpec::hamming_weight(SUM_WIDTH), 0};
    if (cfg.attack_model == AttackModelKind::profiled_stochastic) {
        leakage.product = LeakageModelSpec::stochastic(
            coefficients_from_notes(archive.notes(), "product_coefficients"));
        leakage.sum = LeakageModelSpec::stochastic(
            coefficients_from_notes(archive.notes(), "sum_coefficients"));
    }
    const AttackConfig attack = attack_config(cfg, leakage);
    const NetworkRecovery rec = recover_network(archive, attack);

    const fs::path report_path = *a.f.out;
    const fs::path model_path = pick<std::string>(
        a.model_out, c.command, "model_out", default_model_out(report_path));
    json report;
    const std::string victim_path = pick<std::string>(a.victim, c.command, "victim", "");
    if (!victim_path.empty()) {
        const QuantizedModel victim = load_model(victim_path);
        const auto eval = evaluation_inputs(cfg, victim.input_shape());
        const AgreementReport r =
            evaluate_recovery(cfg, victim, rec, attack, eval, std::nullopt, 0);
        report = report_to_json(r);
        out << "top-1 agreement " << r.top1 << "%, top-5 " << r.top5
            << "%, exact parameters " << 100.0 * r.accuracy << "%\n";
    } else {
        report = attack_only_report(cfg, rec);
    }
    write_json_file(model_path, model_to_json(rec.model), -1);
    try {
        write_json_file(report_path, report);
    } catch (...) {
        std::error_code ec;
        fs::remove(model_path, ec);
        throw;
    }
    out << "wrote " << report_path.string() << " and " << model_path.string()
        << "\n";
}

struct ScenarioArgs {
    CommonFlags f;
    int id = 0;
    std::string target;
    std::optional<std::string> victim;
};

void cmd_scenario(const ScenarioArgs &a, std::ostream &out) {
    const ExperimentTarget target = experiment_target_from_string(a.target);
    const auto c = load_config(a.f.config, {"victim"});
    const ScenarioConfig cfg =
        resolve(ScenarioConfig::builtin(a.id, target), c, a.f);
    json report;
    if (target == ExperimentTarget::weight) {
        const RecoveryReport r = run_weight_recovery_experiment(cfg);
        report = report_to_json(r);
        out << "weight recovery: accuracy " << 100.0 * r.accuracy
            << "%, average error " << r.average_error << "\n";
    } else if (target == ExperimentTarget::bias) {
        const RecoveryReport r = run_bias_recovery_experiment(cfg);
        report = report_to_json(r);
        out << "bias recovery: accuracy " << 100.0 * r.accuracy
            << "%, average error " << r.average_error << "\n";
    } else {
        const std::string victim_path =
            pick<std::string>(a.victim, c.command, "victim", "");
        const QuantizedModel victim =
            victim_path.empty() ? desk_cnn() : load_model(victim_path);
        const auto eval = evaluation_inputs(cfg, victim.input_shape());
        std::vector<json> repeats;
        for (std::size_t r = 0; r < cfg.repeats; r++) {
            const AgreementReport rep =
                run_network_recovery(cfg, victim, eval, std::nullopt, r);
            out << "repeat " << r << ": top-1 agreement " << rep.top1
                << "%, top-5 " << rep.top5 << "%\n";
            repeats.push_back(report_to_json(rep));
        }
        report = merge_reports(repeats);
    }
    write_json_file(*a.f.out, report);
    out << "wrote " << *a.f.out << "\n";
}

struct MergeArgs {
    std::vector<std::string> inputs;
    std::string out;
};

void cmd_report_merge(const MergeArgs &a, std::ostream &out) {
    std::vector<json> docs;
    for (const auto &p : a.inputs)
        docs.push_back(read_json_file(p));
    const json merged = merge_reports(docs);
    write_json_file(a.out, merged);
    out << "wrote " << a.out << ": " << merged["count"] << " reports\n";
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err) {
    CLI::App app{"Side-channel extraction of quantized neural network "
                 "parameters",
                 "qsca"};
    app.require_subcommand(1);

    GenModelArgs gen;
    auto *gen_cmd = app.add_subcommand("gen-model", "write a random quantized model");
    add_common(gen_cmd, gen.f, true);
    gen_cmd->add_option("--spec", gen.spec,
                        "layers, e.g. input:1x8x8,conv2d:1x8x3,relu,avgpool2d:2,"
                        "flatten,dense:72x10");
    gen_cmd->add_option("--calibrate", gen.calibrate,
                        "calibrate requantization shifts on N random inputs");
    gen_cmd->add_flag("--desk-cnn", gen.desk_cnn,
                      "write the bundled desk CNN (seed defaults to its own)");

    SimulateArgs sim;
    auto *sim_cmd = app.add_subcommand("simulate", "simulate a trace archive");
    add_common(sim_cmd, sim.f, true);
    sim_cmd->add_option("--model", sim.model, "victim model JSON");
    sim_cmd->add_option("--scenario", sim.scenario, "built-in scenario 1, 2 or 3");
    sim_cmd->add_option("--inputs", sim.inputs, "number of network inputs M");

    AttackArgs att;
    auto *att_cmd = app.add_subcommand("attack", "recover a model from a trace archive");
    add_common(att_cmd, att.f, true);
    att_cmd->add_option("--archive", att.archive, "archive directory");
    att_cmd->add_option("--victim", att.victim,
                        "victim model JSON, for agreement metrics");
    att_cmd->add_option("--attack-model", att.attack_model, "hw or profiled");
    att_cmd->add_option("--scenario", att.scenario,
                        "take the attack model of built-in scenario 1, 2 or 3");
    att_cmd->add_option("--model-out", att.model_out,
                        "recovered model path (default: <out>.model.json)");

    ScenarioArgs scn;
    auto *scn_cmd = app.add_subcommand("scenario", "run a built-in experiment");
    add_common(scn_cmd, scn.f, true);
    scn_cmd->add_option("id", scn.id, "1, 2 or 3")->required();
    scn_cmd->add_option("target", scn.target, "weight, bias or network")
        ->required()
        ->check(CLI::IsMember({"weight", "bias", "network"}));
    scn_cmd->add_option("--victim", scn.victim,
                        "victim model for network (default: desk CNN)");

    MergeArgs merge;
    auto *merge_cmd =
        app.add_subcommand("report-merge", "concatenate report files");
    merge_cmd->add_option("inputs", merge.inputs, "report files")
        ->required()
        ->check(CLI::ExistingFile);
    merge_cmd->add_option("--out", merge.out, "output path")->required();

    std::vector<std::string> argv_store{"qsca"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char *> argv;
    for (auto &s : argv_store)
        argv.push_back(s.data());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    }

    try {
        if (*gen_cmd) {
            cmd_gen_model(gen, out);
        } else if (*sim_cmd) {
            cmd_simulate(sim, out);
        } else if (*att_cmd) {
            cmd_attack(att, out);
        } else if (*scn_cmd) {
            if (scn.id < 1 || scn.id > 3) {
                err << "error: unknown scenario id " << scn.id << "\n"
                    << scn_cmd->help();
                return 2;
            }
            cmd_scenario(scn, out);
        } else if (*merge_cmd) {
            cmd_report_merge(merge, out);
        }
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace qsca
