// Command-line front end: train / evaluate / sweep / verify.

#include "odrpo/env.hpp"
#include "odrpo/oracle.hpp"
#include "odrpo/policy_io.hpp"
#include "odrpo/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef ODRPO_BUILD_ID
#define ODRPO_BUILD_ID "dev"
#endif

// Shortest round-tripping decimal form; locale-independent by construction.
std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec, std::uint64_t single_seed,
                                       bool seeds_given) {
    if (!seeds_given) {
        return {single_seed};
    }
    const auto dots = spec.find("..");
    if (dots == std::string::npos) {
        throw CLI::ValidationError("--seeds", "expected a range like 1..5");
    }
    const std::uint64_t lo = std::stoull(spec.substr(0, dots));
    const std::uint64_t hi = std::stoull(spec.substr(dots + 2));
    if (hi < lo) {
        throw CLI::ValidationError("--seeds", "range end before start");
    }
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = lo; s <= hi; ++s) {
        seeds.push_back(s);
    }
    return seeds;
}

void write_curve_csv(const fs::path& path, const std::vector<odrpo::IterationRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    out << "iteration,reward_mean,reward_std,beta_star,dual_value,constraint,primal_gain,wall_ms\n";
    for (const auto& r : records) {
        out << r.iteration << ',' << fmt(r.episode_reward_mean) << ',' << fmt(r.episode_reward_std)
            << ',' << fmt(r.beta_star) << ',' << fmt(r.dual_value) << ',' << fmt(r.constraint_value)
            << ',' << fmt(r.primal_gain) << ',' << r.wall_ms << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

void write_aggregate_csv(const fs::path& path,
                         const std::vector<std::vector<odrpo::IterationRecord>>& per_seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    out << "iteration,reward_mean,reward_std\n";
    const std::size_t iterations = per_seed.front().size();
    const double n = static_cast<double>(per_seed.size());
    for (std::size_t i = 0; i < iterations; ++i) {
        double mean = 0.0;
        for (const auto& records : per_seed) {
            mean += records[i].episode_reward_mean;
        }
        mean /= n;
        double var = 0.0;
        for (const auto& records : per_seed) {
            const double d = records[i].episode_reward_mean - mean;
            var += d * d;
        }
        out << i << ',' << fmt(mean) << ',' << fmt(std::sqrt(var / n)) << '\n';
    }
}

struct TrainFlags {
    std::string env;
    std::string method = "kl";
    double delta = -1.0;
    double gamma = -1.0;
    int iterations = -1;
    int batch = -1;
    std::string value_kind = "tabular";
    double lr = -1.0;
    std::uint64_t seed = 0;
    std::string seeds_range;
    bool seeds_given = false;
    bool warm_start = false;
    std::string out_dir = "out";
};

odrpo::TrainConfig make_config(const TrainFlags& flags) {
    odrpo::TrainConfig config =
        odrpo::default_config(flags.env, odrpo::method_from_name(flags.method));
    if (flags.delta > 0.0) {
        config.delta = flags.delta;
    }
    if (flags.gamma >= 0.0) {
        config.gamma = flags.gamma;
    }
    if (flags.iterations > 0) {
        config.iterations = flags.iterations;
    }
    if (flags.batch > 0) {
        config.batch = flags.batch;
    }
    if (flags.lr > 0.0) {
        config.value_lr = flags.lr;
    }
    config.value_kind =
        flags.value_kind == "mlp" ? odrpo::ValueKind::kMlp : odrpo::ValueKind::kTabular;
    config.beta_warm_start = flags.warm_start;
    return config;
}

json config_json(const odrpo::TrainConfig& config, const std::vector<std::uint64_t>& seeds) {
    json j;
    j["env"] = config.env_id;
    j["method"] = odrpo::method_name(config.method);
    j["gamma"] = config.gamma;
    j["delta"] = config.delta;
    j["iterations"] = config.iterations;
    j["batch"] = config.batch;
    j["value_lr"] = config.value_lr;
    j["value"] = config.value_kind == odrpo::ValueKind::kMlp ? "mlp" : "tabular";
    j["seeds"] = seeds;
    j["beta_warm_start"] = config.beta_warm_start;
    j["warm_start_after"] = config.warm_start_after;
    j["eval_episodes"] = config.eval_episodes;
    return j;
}

void write_manifest(const fs::path& path, const json& config, const std::vector<fs::path>& outputs) {
    json j;
    j["config"] = config;
    j["start_time"] = iso_timestamp();
    j["build"] = ODRPO_BUILD_ID;
    std::vector<std::string> names;
    names.reserve(outputs.size());
    for (const auto& p : outputs) {
        names.push_back(p.string());
    }
    j["outputs"] = names;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

int cmd_train(const TrainFlags& flags) {
    const auto seeds = parse_seeds(flags.seeds_range, flags.seed, flags.seeds_given);
    odrpo::TrainConfig config = make_config(flags);
    const fs::path out_dir(flags.out_dir);
    fs::create_directories(out_dir);

    const bool multi = seeds.size() > 1;
    std::vector<fs::path> curve_paths;
    std::vector<fs::path> policy_paths;
    for (const auto s : seeds) {
        const std::string suffix = multi ? "_seed" + std::to_string(s) : "";
        curve_paths.push_back(out_dir / ("curve" + suffix + ".csv"));
        policy_paths.push_back(out_dir / ("policy" + suffix + ".txt"));
    }
    std::vector<fs::path> all_outputs = curve_paths;
    all_outputs.insert(all_outputs.end(), policy_paths.begin(), policy_paths.end());
    if (multi) {
        all_outputs.push_back(out_dir / "curve_aggregate.csv");
    }
    write_manifest(out_dir / "manifest.json", config_json(config, seeds), all_outputs);

    std::vector<std::future<odrpo::TrainResult>> futures;
    futures.reserve(seeds.size());
    for (const auto s : seeds) {
        odrpo::TrainConfig run_config = config;
        run_config.seed = s;
        futures.push_back(
            std::async(std::launch::async, [run_config] { return odrpo::train(run_config); }));
    }
    std::vector<std::vector<odrpo::IterationRecord>> per_seed;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        odrpo::TrainResult result = futures[i].get();
        write_curve_csv(curve_paths[i], result.records);
        odrpo::save_policy_text(result.policy, policy_paths[i].string());
        std::cout << "seed " << seeds[i]
                  << ": last-10% reward = " << odrpo::last_decile_reward(result.records) << '\n';
        per_seed.push_back(std::move(result.records));
    }
    if (multi) {
        write_aggregate_csv(out_dir / "curve_aggregate.csv", per_seed);
    }
    return 0;
}

int cmd_evaluate(const std::string& env, const std::string& policy_path, int episodes,
                 std::uint64_t seed, const std::string& out_dir) {
    odrpo::TabularPolicy policy;
    odrpo::EvalSummary summary;
    try {
        policy = odrpo::load_policy_text(policy_path);
        summary = odrpo::evaluate(policy, env, episodes, seed);
    } catch (const std::exception& e) {
        // Bad policy files and dimension mismatches are usage errors.
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / "eval.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    if (summary.has_taxi_stats) {
        out << "dropoff_rate,illegal_rate,mean_timesteps,mean_return\n"
            << fmt(summary.dropoff_rate) << ',' << fmt(summary.illegal_rate) << ','
            << fmt(summary.mean_timesteps) << ',' << fmt(summary.mean_return) << '\n';
        std::cout << "dropoff_rate=" << summary.dropoff_rate
                  << " illegal_rate=" << summary.illegal_rate
                  << " mean_timesteps=" << summary.mean_timesteps
                  << " mean_return=" << summary.mean_return << '\n';
    } else {
        out << "mean_return,std_return,mean_timesteps\n"
            << fmt(summary.mean_return) << ',' << fmt(summary.std_return) << ','
            << fmt(summary.mean_timesteps) << '\n';
        std::cout << "mean_return=" << summary.mean_return << " std_return=" << summary.std_return
                  << " mean_timesteps=" << summary.mean_timesteps << '\n';
    }
    return 0;
}

int cmd_sweep(const TrainFlags& flags, const std::vector<double>& deltas) {
    const auto seeds = parse_seeds(flags.seeds_range, flags.seed, flags.seeds_given);
    const fs::path out_dir(flags.out_dir);
    fs::create_directories(out_dir);

    struct Cell {
        double delta;
        std::uint64_t seed;
        std::future<odrpo::TrainResult> result;
    };
    std::vector<Cell> cells;
    for (const double delta : deltas) {
        for (const auto s : seeds) {
            TrainFlags cell_flags = flags;
            cell_flags.delta = delta;
            odrpo::TrainConfig config = make_config(cell_flags);
            config.seed = s;
            cells.push_back({delta, s,
                             std::async(std::launch::async,
                                        [config] { return odrpo::train(config); })});
        }
    }
    const fs::path path = out_dir / "sweep.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    out << "delta,seed,last10_reward_mean\n";
    for (auto& cell : cells) {
        const odrpo::TrainResult result = cell.result.get();
        out << fmt(cell.delta) << ',' << cell.seed << ','
            << fmt(odrpo::last_decile_reward(result.records)) << '\n';
    }
    std::cout << "wrote " << path.string() << " (" << cells.size() << " cells)\n";
    return 0;
}

int cmd_verify(int instances, std::uint64_t seed, const std::string& out_dir, bool inject_bug) {
    if (instances == 0) {
        std::cout << "no instances requested; nothing to verify\n";
        return 0;
    }
    odrpo::InstanceGenerator generator;
    generator.seed = seed;
    odrpo::VerifyOptions options;
    options.inject_bug = inject_bug;
    const odrpo::VerifyReport report = odrpo::run_verification(generator, instances, options);

    std::cout << "instances checked:          " << report.instances << " (kl + wass each)\n";
    std::cout << "max duality gap (relative): " << report.max_gap_rel << '\n';
    std::cout << "max constraint violation:   " << std::max(0.0, report.max_constraint_excess)
              << '\n';
    std::cout << "min primal gain:            " << report.min_primal_gain << '\n';
    std::cout << "max dual excess over grid:  " << report.max_grid_excess << '\n';
    std::cout << "prop7 consistency:          " << (report.prop7_checked - report.prop7_failures)
              << "/" << report.prop7_checked << " passed\n";
    std::cout << "wass boundary ties flagged: " << report.boundary_ties << '\n';
    if (report.ok) {
        std::cout << "verification PASSED\n";
        return 0;
    }
    fs::create_directories(out_dir);
    const fs::path failure_path = fs::path(out_dir) / "verify_failure.txt";
    std::ofstream out(failure_path, std::ios::binary);
    out << report.failure_description << '\n';
    std::cout << "verification FAILED: " << report.failure_description.substr(0, 200) << "\n"
              << "failing instance written to " << failure_path.string() << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trust-region policy optimization with exact KL and Wasserstein updates"};
    app.require_subcommand(1);

    const std::vector<std::string> env_ids{"taxi", "nchain", "cliffwalking"};
    const std::vector<std::string> methods{"kl", "wass"};
    const std::vector<std::string> value_kinds{"tabular", "mlp"};

    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "Run the training loop and write learning curves");
    train_cmd->set_config("--config", "", "Flat key = value file with the same option names");
    train_cmd->add_option("--env", train_flags.env, "Environment id")
        ->required()
        ->check(CLI::IsMember(env_ids));
    train_cmd->add_option("--method", train_flags.method, "Trust-region metric")
        ->check(CLI::IsMember(methods));
    train_cmd->add_option("--delta", train_flags.delta, "Trust-region radius");
    train_cmd->add_option("--gamma", train_flags.gamma, "Discount factor");
    train_cmd->add_option("--iterations", train_flags.iterations, "Training iterations");
    train_cmd->add_option("--batch", train_flags.batch, "Episodes per iteration");
    train_cmd->add_option("--value", train_flags.value_kind, "Value estimator kind")
        ->check(CLI::IsMember(value_kinds));
    train_cmd->add_option("--lr", train_flags.lr, "Value learning rate");
    auto* seed_opt = train_cmd->add_option("--seed", train_flags.seed, "Run seed");
    train_cmd->add_option("--seeds", train_flags.seeds_range, "Seed range a..b")
        ->excludes(seed_opt)
        ->each([&](const std::string&) { train_flags.seeds_given = true; });
    train_cmd->add_flag("--warm-start-beta", train_flags.warm_start,
                        "Reuse the running beta* with jitter after the first iterations");
    train_cmd->add_option("--out", train_flags.out_dir, "Output directory");

    std::string eval_env;
    std::string eval_policy;
    int eval_episodes = 1000;
    std::uint64_t eval_seed = 0;
    std::string eval_out = "out";
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a saved policy");
    eval_cmd->set_config("--config", "", "Flat key = value file with the same option names");
    eval_cmd->add_option("--env", eval_env, "Environment id")
        ->required()
        ->check(CLI::IsMember(env_ids));
    eval_cmd->add_option("--policy", eval_policy, "Policy file")->required();
    eval_cmd->add_option("--episodes", eval_episodes, "Evaluation episodes");
    eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
    eval_cmd->add_option("--out", eval_out, "Output directory");

    TrainFlags sweep_flags;
    std::vector<double> sweep_deltas;
    auto* sweep_cmd = app.add_subcommand("sweep", "Train over a list of trust-region radii");
    sweep_cmd->set_config("--config", "", "Flat key = value file with the same option names");
    sweep_cmd->add_option("--env", sweep_flags.env, "Environment id")
        ->required()
        ->check(CLI::IsMember(env_ids));
    sweep_cmd->add_option("--method", sweep_flags.method, "Trust-region metric")
        ->check(CLI::IsMember(methods));
    sweep_cmd->add_option("--deltas", sweep_deltas, "Trust-region radii")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--gamma", sweep_flags.gamma, "Discount factor");
    sweep_cmd->add_option("--iterations", sweep_flags.iterations, "Training iterations");
    sweep_cmd->add_option("--batch", sweep_flags.batch, "Episodes per iteration");
    sweep_cmd->add_option("--lr", sweep_flags.lr, "Value learning rate");
    auto* sweep_seed_opt = sweep_cmd->add_option("--seed", sweep_flags.seed, "Run seed");
    sweep_cmd->add_option("--seeds", sweep_flags.seeds_range, "Seed range a..b")
        ->excludes(sweep_seed_opt)
        ->each([&](const std::string&) { sweep_flags.seeds_given = true; });
    sweep_cmd->add_option("--out", sweep_flags.out_dir, "Output directory");

    int verify_instances = 200;
    std::uint64_t verify_seed = 0;
    std::string verify_out = "out";
    bool inject_bug = false;
    auto* verify_cmd = app.add_subcommand("verify", "Certify both solvers against the oracles");
    verify_cmd->set_config("--config", "", "Flat key = value file with the same option names");
    verify_cmd->add_option("--instances", verify_instances, "Number of random instances");
    verify_cmd->add_option("--seed", verify_seed, "Instance generator seed");
    verify_cmd->add_option("--out", verify_out, "Output directory for failure dumps");
    verify_cmd->add_flag("--inject-bug", inject_bug, "Negative control: perturb beta* by 10%")
        ->group(""); // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(train_flags);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(eval_env, eval_policy, eval_episodes, eval_seed, eval_out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(sweep_flags, sweep_deltas);
        }
        if (verify_cmd->parsed()) {
            return cmd_verify(verify_instances, verify_seed, verify_out, inject_bug);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
