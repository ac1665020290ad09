// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

// quard: collection, import, statistics, evaluation, rendering and
// inspection from one entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "quard/quard.hpp"

namespace {

using namespace quard;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Missing inputs and bad arguments are usage errors.
struct UsageError : Error {
    using Error::Error;
};

int verbosity = 0;

void log(const std::string& msg) { std::cerr << msg << "\n"; }
void debug(const std::string& msg) {
    if (verbosity > 0) std::cerr << msg << "\n";
}

CollectionConfig load_config(const std::string& flag) {
    std::string path = flag;
    if (path.empty()) {
        if (const char* env = std::getenv("QUARD_CONFIG")) path = env;
    }
    if (path.empty()) return {};
    debug("config: " + path);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    try {
        return collection_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + p.string());
    out << s;
    if (!out) throw StoreError("write failed: " + p.string());
}

// Generates `plan` into a fresh store with one shard per worker. Episode i
// goes to worker i % workers, so the store is independent of scheduling.
void collect_into(const std::vector<PlannedEpisode>& plan, const fs::path& out, const CollectionConfig& cfg,
                  std::size_t workers) {
    DatasetWriter writer(out, cfg.action_space, cfg.rates, workers);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < plan.size(); i += workers) {
                Episode e = generate_planned(plan[i], cfg);
                debug(e.id + ": " + std::string(name(e.outcome.status)) + ", " + std::to_string(e.length()) +
                      " steps");
                if (e.unplannable) log(e.id + ": unplannable (" + e.outcome.violation + ")");
                writer.write_episode(std::move(e), w);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    writer.close();
}

std::unique_ptr<Policy> make_policy(const std::string& spec, const CollectionConfig& cfg, std::size_t k) {
    if (spec == "oracle") return std::make_unique<OraclePolicy>(cfg);
    if (spec == "random") return std::make_unique<RandomPolicy>(cfg.action_space);
    if (spec.rfind("knn:", 0) == 0) {
        const fs::path store = spec.substr(4);
        if (!fs::exists(manifest_path(store))) throw UsageError("knn store not found: " + store.string());
        return knn_bc_policy(store, k);
    }
    throw UsageError("unknown policy '" + spec + "' (expected oracle, random or knn:<store>)");
}

// Top-down view: entities, the recorded path and the success circle around
// the target.
std::string trajectory_svg(const Episode& e, double success_radius) {
    const double s = 60.0, minx = -1.0, maxx = 5.0, miny = -3.0, maxy = 3.0;
    const int w = static_cast<int>((maxx - minx) * s), h = static_cast<int>((maxy - miny) * s);
    auto X = [&](double x) { return (x - minx) * s; };
    auto Y = [&](double y) { return (maxy - y) * s; };
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n", w,
                  h, w, h);
    os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"#f4f1ea\"/>\n";
    auto hex = [](Rgb c) {
        char b[8];
        std::snprintf(b, sizeof b, "#%02x%02x%02x", c.r, c.g, c.b);
        return std::string(b);
    };
    for (const auto& ent : e.scene.entities) {
        const std::string fill = hex(palette(ent.color));
        const double deg = -ent.pose.yaw * 180.0 / M_PI;
        if (ent.kind == EntityKind::Tunnel) {
            for (const auto& part : solid_parts(ent)) {
                const auto& r = std::get<OrientedRect>(part);
                std::snprintf(buf, sizeof buf,
                              "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" "
                              "transform=\"rotate(%.3f %.2f %.2f)\"/>\n",
                              X(r.pose.x) - r.half_length * s, Y(r.pose.y) - r.half_width * s, 2 * r.half_length * s,
                              2 * r.half_width * s, fill.c_str(), deg, X(r.pose.x), Y(r.pose.y));
                os << buf;
            }
            continue;
        }
        const double hl = 0.5 * ent.length, hw = 0.5 * ent.width;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" "
                      "transform=\"rotate(%.3f %.2f %.2f)\"/>\n",
                      X(ent.pose.x) - hl * s, Y(ent.pose.y) - hw * s, 2 * hl * s, 2 * hw * s, fill.c_str(), deg,
                      X(ent.pose.x), Y(ent.pose.y));
        os << buf;
        if (ent.target) {
            std::snprintf(buf, sizeof buf,
                          "<circle id=\"target\" cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"none\" stroke=\"#333\" "
                          "stroke-dasharray=\"6 4\"/>\n",
                          X(ent.pose.x), Y(ent.pose.y), success_radius * s);
            os << buf;
        }
    }
    os << "<polyline id=\"path\" fill=\"none\" stroke=\"#1d4ed8\" stroke-width=\"2\" points=\"";
    for (const auto& st : e.steps) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(st.pose.x), Y(st.pose.y));
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", X(e.final_pose.x), Y(e.final_pose.y));
    os << buf << "\"/>\n";
    std::snprintf(buf, sizeof buf, "<circle id=\"end\" cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#1d4ed8\"/>\n",
                  X(e.final_pose.x), Y(e.final_pose.y));
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"12\">%s (%s, %zu steps)</text>\n",
                  e.instruction.text.c_str(), std::string(name(e.outcome.status)).c_str(), e.length());
    os << buf << "</svg>\n";
    return os.str();
}

DatasetReader open_store(const fs::path& p) {
    if (!fs::exists(manifest_path(p))) throw UsageError("no store at " + p.string());
    return DatasetReader(p);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quard: quadruped command-level dataset and evaluation toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "config file (JSON); default $QUARD_CONFIG");
    app.add_flag("-v,--verbose", verbosity, "log progress to stderr");

    // collect
    auto* collect = app.add_subcommand("collect", "generate expert episodes into a new store");
    std::vector<std::string> c_tasks;
    std::optional<std::size_t> c_count;
    std::uint64_t c_seed = 0;
    std::string c_out = "quard-store", c_source = "sim";
    std::size_t c_workers = 1;
    collect->add_option("--task", c_tasks, "task(s) to generate; default: the desk-scale plan");
    collect->add_option("--count", c_count, "episodes per selected task");
    collect->add_option("--seed", c_seed, "base seed")->required();
    collect->add_option("--out", c_out, "output store directory");
    collect->add_option("--source", c_source, "sim or real (teleop surrogate)")->check(CLI::IsMember({"sim", "real"}));
    collect->add_option("--workers", c_workers, "worker threads (one shard each)")->check(CLI::Range(1, 256));

    // teleop
    auto* teleop = app.add_subcommand("teleop", "write teleop-surrogate episodes in the import layout");
    std::size_t t_count = 30;
    std::uint64_t t_seed = 0;
    std::string t_out;
    teleop->add_option("--count", t_count, "episodes");
    teleop->add_option("--seed", t_seed, "base seed")->required();
    teleop->add_option("--out", t_out, "import-layout directory")->required();

    // import
    auto* import = app.add_subcommand("import", "import real episodes from the import layout");
    std::string i_dir, i_out;
    import->add_option("--dir", i_dir, "import-layout directory")->required();
    import->add_option("--out", i_out, "store to append to (created if missing)")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "dataset statistics");
    std::string s_store, s_svg;
    stats->add_option("--store", s_store, "store directory")->required();
    stats->add_option("--svg", s_svg, "write an SVG chart here");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a policy on a suite");
    std::string e_policy, e_suite, e_suite_file, e_out;
    std::uint64_t e_seed = 0;
    std::size_t e_workers = 1, e_k = 1;
    eval->add_option("--policy", e_policy, "oracle, random or knn:<store>")->required();
    eval->add_option("--suite", e_suite, "seen, unseen_object, unseen_verbal or <task>_<N>");
    eval->add_option("--suite-file", e_suite_file, "suite definition (JSON)");
    eval->add_option("--seed", e_seed, "suite seed")->required();
    eval->add_option("--out", e_out, "directory for report.txt, report.csv, episodes.csv");
    eval->add_option("--workers", e_workers, "worker threads")->check(CLI::Range(1, 256));
    eval->add_option("--k", e_k, "neighbors for knn policies")->check(CLI::Range(1, 1000000));

    // render
    auto* render = app.add_subcommand("render", "top-down SVG and per-step PPM frames of one episode");
    std::string r_store, r_episode, r_out;
    render->add_option("--store", r_store, "store directory")->required();
    render->add_option("--episode", r_episode, "episode id; default: first episode");
    render->add_option("--out", r_out, "output directory")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "print a store manifest or one episode");
    std::string n_store, n_episode;
    inspect->add_option("--store", n_store, "store directory")->required();
    inspect->add_option("--episode", n_episode, "episode id");

    // plan
    auto* plan = app.add_subcommand("plan", "sample a scene and dump the expert path as CSV");
    std::string p_task = "go_avoid", p_out, p_planner = "astar";
    std::uint64_t p_seed = 0;
    plan->add_option("--task", p_task, "task name");
    plan->add_option("--seed", p_seed, "scene seed")->required();
    plan->add_option("--out", p_out, "CSV path; default stdout");
    plan->add_option("--planner", p_planner, "astar or dstar_lite")->check(CLI::IsMember({"astar", "dstar_lite"}));

    // scaling
    auto* scaling = app.add_subcommand("scaling", "knn success rate across sim:real mixing regimes");
    std::string x_sim, x_real, x_out;
    std::uint64_t x_seed = 0;
    std::size_t x_reps = 5, x_k = 1, x_eval = 20;
    scaling->add_option("--sim", x_sim, "sim store")->required();
    scaling->add_option("--real", x_real, "real store")->required();
    scaling->add_option("--seed", x_seed, "seed")->required();
    scaling->add_option("--reps", x_reps, "replications")->check(CLI::Range(1, 1000));
    scaling->add_option("--k", x_k, "neighbors")->check(CLI::Range(1, 1000000));
    scaling->add_option("--episodes", x_eval, "GoTo evaluation episodes per replication");
    scaling->add_option("--out", x_out, "CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        const CollectionConfig cfg = load_config(config_path);

        if (*collect) {
            std::vector<PlanEntry> entries;
            const Source src = source_from_name(c_source);
            if (c_tasks.empty() && !c_count) {
                entries = desk_plan();
            } else {
                if (c_tasks.empty()) c_tasks.assign(kSkillNames.begin(), kSkillNames.end());
                if (!c_count) throw UsageError("--task needs --count");
                for (const auto& t : c_tasks) entries.push_back({skill_from_name(t), src, *c_count});
            }
            const auto planned = expand_plan(entries, c_seed, cfg.expert);
            log("collect: " + std::to_string(planned.size()) + " episodes -> " + c_out);
            collect_into(planned, c_out, cfg, c_workers);
            std::cout << compute_stats(fs::path(c_out)).table();
            return kExitOk;
        }

        if (*teleop) {
            const auto planned = expand_plan({{Skill::GoTo, Source::Real, t_count}}, t_seed, cfg.expert);
            for (const auto& p : planned) {
                Episode e = generate_planned(p, cfg);
                export_import_layout(e, e.frames, t_out);
            }
            log("teleop: wrote " + std::to_string(planned.size()) + " episodes to " + t_out);
            return kExitOk;
        }

        if (*import) {
            if (!fs::is_directory(i_dir)) throw UsageError("import directory not found: " + i_dir);
            const auto n = import_real(i_dir, i_out, cfg.action_space, cfg.rates,
                                       [](const ImportSkip& s) { log("skipped " + s.episode + ": " + s.reason); });
            std::cout << "imported " << n << "\n";
            return kExitOk;
        }

        if (*stats) {
            if (!fs::exists(manifest_path(s_store))) throw UsageError("no store at " + s_store);
            const auto report = compute_stats(fs::path(s_store));
            std::cout << report.table();
            if (!s_svg.empty()) write_text(s_svg, report.svg());
            return kExitOk;
        }

        if (*eval) {
            EvalSuite suite;
            if (!e_suite_file.empty()) {
                std::ifstream in(e_suite_file);
                if (!in) throw UsageError("cannot read suite file " + e_suite_file);
                suite = suite_from_json(nlohmann::json::parse(in));
            } else if (!e_suite.empty()) {
                suite = suite_by_name(e_suite, e_seed);
            } else {
                throw UsageError("eval needs --suite or --suite-file");
            }
            const auto policy = make_policy(e_policy, cfg, e_k);
            EvalConfig ec;
            ec.world = cfg;
            ec.workers = e_workers;
            const auto report = run_suite(*policy, suite, ec);
            std::cout << report.table();
            if (!e_out.empty()) {
                write_text(fs::path(e_out) / "report.txt", report.table());
                write_text(fs::path(e_out) / "report.csv", report.csv());
                write_text(fs::path(e_out) / "episodes.csv", report.episodes_csv());
            }
            return kExitOk;
        }

        if (*render) {
            const auto reader = open_store(r_store);
            if (reader.episodes().empty()) throw UsageError("store is empty");
            const Episode* e = r_episode.empty() ? &reader.episodes().front() : reader.find(r_episode);
            if (!e) throw UsageError("no episode '" + r_episode + "'");
            const fs::path out = r_out;
            write_text(out / "trajectory.svg", trajectory_svg(*e, cfg.sim.success_radius));
            fs::create_directories(out / "frames");
            const auto frames = reader.frames(*e);
            for (std::size_t i = 0; i < frames.size(); ++i) {
                char fname[32];
                std::snprintf(fname, sizeof fname, "%06zu.ppm", i);
                write_ppm(out / "frames" / fname, frames[i]);
            }
            log("render: " + e->id + " -> " + out.string());
            return kExitOk;
        }

        if (*inspect) {
            const auto reader = open_store(n_store);
            if (n_episode.empty()) {
                std::cout << reader.manifest().to_json().dump(2) << "\n";
                for (const auto& e : reader.episodes()) {
                    std::cout << e.id << "  " << name(e.outcome.status) << "  " << e.length() << "  "
                              << e.instruction.text << "\n";
                }
                return kExitOk;
            }
            const Episode* e = reader.find(n_episode);
            if (!e) throw UsageError("no episode '" + n_episode + "'");
            std::cout << e->id << "\n" << e->instruction.text << "\n" << to_json(e->scene).dump(2) << "\n";
            std::cout << "step";
            for (auto d : kDimNames) std::cout << "," << d;
            std::cout << ",x,y,yaw\n";
            for (std::size_t i = 0; i < e->steps.size(); ++i) {
                const auto& st = e->steps[i];
                std::cout << i;
                for (int t : st.tokens.tokens) std::cout << "," << t;
                std::cout << "," << st.pose.x << "," << st.pose.y << "," << st.pose.yaw << "\n";
            }
            std::cout << "outcome " << name(e->outcome.status) << " " << e->outcome.violation << "\n";
            return kExitOk;
        }

        if (*plan) {
            Rng rng(p_seed);
            TaskSpec task = sample_task(skill_from_name(p_task), SpeedLevel::Normal, rng, cfg.expert.gait_weights);
            const Scene scene = sample_scene(task, p_seed, cfg.scene);
            ExpertConfig ex = cfg.expert;
            ex.planner = p_planner == "dstar_lite" ? PlannerKind::DStarLite : PlannerKind::AStar;
            ExpertController expert(task, ex, cfg.sim, cfg.rates);
            expert.act(initial_state(scene, cfg.sim));
            const auto& path = expert.tracker()->path();
            if (p_out.empty()) {
                write_path_csv(std::cout, path);
            } else {
                std::ofstream out(p_out);
                if (!out) throw StoreError("cannot write " + p_out);
                write_path_csv(out, path);
            }
            log("plan: " + render_instruction(task).text + ", " + std::to_string(path.waypoints.size()) +
                " waypoints");
            return kExitOk;
        }

        if (*scaling) {
            const auto sim = open_store(x_sim);
            const auto real = open_store(x_real);
            std::vector<Episode> sim_eps, real_eps;
            for (const auto& e : sim.episodes()) {
                sim_eps.push_back(e);
                sim_eps.back().frames = sim.frames(e);
            }
            for (const auto& e : real.episodes()) {
                real_eps.push_back(e);
                real_eps.back().frames = real.frames(e);
            }
            std::vector<MixPolicy> regimes;
            for (const auto& r : desk_regimes()) {
                if (r.sim_count <= sim_eps.size() && r.real_count <= real_eps.size()) regimes.push_back(r);
                else log("scaling: skipping regime " + r.label() + " (not enough episodes)");
            }
            EvalConfig ec;
            ec.world = cfg;
            const auto rows = scaling_experiment(
                [&](const std::vector<Episode>& train) -> std::unique_ptr<Policy> { return knn_bc_policy(train, x_k); },
                regimes, task_suite(Skill::GoTo, x_eval, x_seed), sim_eps, real_eps, x_seed, x_reps, ec);
            std::cout << scaling_table(rows);
            if (!x_out.empty()) {
                std::ostringstream csv;
                csv << "sim,real,median";
                for (std::size_t r = 0; r < x_reps; ++r) csv << ",rep" << r;
                csv << "\n";
                for (const auto& row : rows) {
                    csv << row.regime.sim_count << "," << row.regime.real_count << "," << row.median;
                    for (double v : row.success_rates) csv << "," << v;
                    csv << "\n";
                }
                write_text(x_out, csv.str());
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        log(std::string("error: ") + e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return kExitUsage;
    } catch (const ParseError& e) {
        log(std::string("error: ") + e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
