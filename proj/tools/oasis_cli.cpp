#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oasis/checkpoint.hpp"
#include "oasis/config.hpp"
#include "oasis/error.hpp"
#include "oasis/experiment.hpp"
#include "oasis/gradcheck.hpp"

namespace {

using namespace oasis;

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int report_error(std::string_view kind, const std::string& message)
{
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
    return 1;
}

struct RunOptions {
    std::string config;
    std::string arms;
    std::string schedules;
    int seeds = 0;
    std::string out;
    std::string format;
    bool save_checkpoints = false;
};

int cmd_run(const RunOptions& o)
{
    ExperimentConfig config = o.config.empty() ? default_config() : load_config(o.config);
    if (!o.arms.empty()) {
        config.arms.clear();
        for (const auto& a : split_list(o.arms))
            config.arms.push_back(parse_arm(a));
    }
    if (!o.schedules.empty()) {
        config.schedules.clear();
        for (const auto& s : split_list(o.schedules))
            config.schedules.push_back(parse_shift_kind(s));
    }
    if (o.seeds > 0) {
        config.seeds.clear();
        for (int s = 0; s < o.seeds; ++s)
            config.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (!o.out.empty())
        config.output_dir = o.out;
    if (o.format == "json")
        config.format = ResultFormat::Json;
    else if (o.format == "csv")
        config.format = ResultFormat::Csv;
    else if (!o.format.empty())
        fail(ErrorKind::Configuration, "format must be csv or json");
    validate(config);

    bool need_refined = false, need_plain = false;
    for (Arm a : config.arms)
        (a == Arm::OursNoRefine ? need_plain : need_refined) = true;

    const auto start = std::chrono::steady_clock::now();
    std::vector<MetricsRecord> records;
    for (std::uint64_t seed : config.seeds) {
        const SeedContext ctx = prepare_seed(config, seed, need_refined, need_plain);
        if (o.save_checkpoints) {
            std::filesystem::create_directories(config.output_dir);
            const std::string stem = config.output_dir + "/pretrained_";
            if (ctx.refined)
                save_checkpoint(stem + "refined_seed" + std::to_string(seed) + ".ckpt", ctx.refined->model,
                                &ctx.refined->stats);
            if (ctx.plain)
                save_checkpoint(stem + "plain_seed" + std::to_string(seed) + ".ckpt", ctx.plain->model,
                                &ctx.plain->stats);
        }
        for (Arm arm : config.arms)
            for (ShiftKind kind : config.schedules)
                records.push_back(run_arm(config, ctx, arm, kind));
        std::cerr << "seed " << seed << " done\n";
    }
    emit_results(records, config.output_dir, config.format);
    {
        std::ofstream cfg(std::filesystem::path(config.output_dir) / "config.json");
        cfg << to_json(config).dump(2) << '\n';
    }

    for (const auto& row : summarize(records)) {
        std::cout << to_string(row.arm) << '\t' << to_string(row.schedule) << "\tacc " << row.mean_acc << " +- "
                  << row.std_acc << "\tf1 ";
        if (row.unseen_f1)
            std::cout << *row.unseen_f1;
        else
            std::cout << "n/a";
        std::cout << "\tadapt " << row.adapt_rate << '\n';
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wrote " << config.output_dir << " in " << secs << " s\n";
    return 0;
}

int cmd_inspect(const std::string& path, int t, const std::string& schedule, std::uint64_t seed,
                const std::string& out)
{
    const ExperimentConfig config = path.empty() ? default_config() : load_config(path);
    const WorldSpec world = build_world(config.world);
    const ShiftKind kind = parse_shift_kind(schedule);
    const ShiftSchedule sched(kind, world.horizon, schedule_seed(seed, kind), config.shift.ber_flip_prob_is_inv_sqrt_T);
    Rng rng = batch_rng(seed, kind, t);
    const LabeledBatch batch = emit_batch(world, sched, t, rng, config.shift);
    if (out.empty()) {
        write_batch_csv(std::cout, batch);
    } else {
        std::ofstream os(out);
        if (!os)
            fail(ErrorKind::Io, "cannot write '" + out + "'");
        write_batch_csv(os, batch);
    }
    std::cerr << "t=" << t << " alpha=" << batch.alpha << " noise_std=" << batch.noise_std << '\n';
    return 0;
}

int cmd_gradcheck(int networks, std::uint64_t seed)
{
    const GradCheckReport r = run_gradcheck(networks, seed);
    std::cout << nlohmann::json{{"cases", r.cases.size()},
                                {"max_relative_error", r.max_relative_error},
                                {"tolerance", r.tolerance},
                                {"seconds", r.seconds},
                                {"passed", r.passed()}}
                     .dump()
              << '\n';
    return r.passed() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Open-world adaptation experiment harness"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Pre-train, run the post-training stream and write metrics");
    run_cmd->add_option("--config", run.config, "JSON config file");
    run_cmd->add_option("--arms", run.arms, "Comma list of ours,base,ours_no_refine");
    run_cmd->add_option("--schedules", run.schedules, "Comma list of lin,squ,sin,ber");
    run_cmd->add_option("--seeds", run.seeds, "Use seeds 0..N-1")->check(CLI::PositiveNumber);
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--format", run.format, "csv or json");
    run_cmd->add_flag("--save-checkpoints", run.save_checkpoints, "Write pre-trained checkpoints per seed");

    std::string inspect_config, inspect_schedule = "lin", inspect_out;
    int inspect_t = 1;
    std::uint64_t inspect_seed = 0;
    auto* inspect_cmd = app.add_subcommand("inspect-stream", "Dump the batch emitted at timestep t as CSV");
    inspect_cmd->add_option("--config", inspect_config, "JSON config file");
    inspect_cmd->add_option("--t", inspect_t, "Timestep")->required();
    inspect_cmd->add_option("--schedule", inspect_schedule, "lin, squ, sin or ber");
    inspect_cmd->add_option("--seed", inspect_seed, "Experiment seed");
    inspect_cmd->add_option("--out", inspect_out, "Write to file instead of stdout");

    int gc_networks = 20;
    std::uint64_t gc_seed = 7;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
    gc_cmd->add_option("--networks", gc_networks, "Number of random networks")->check(CLI::PositiveNumber);
    gc_cmd->add_option("--seed", gc_seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage_error", e.what());
    }

    try {
        if (*run_cmd)
            return cmd_run(run);
        if (*inspect_cmd)
            return cmd_inspect(inspect_config, inspect_t, inspect_schedule, inspect_seed, inspect_out);
        if (*gc_cmd)
            return cmd_gradcheck(gc_networks, gc_seed);
    } catch (const Error& e) {
        return report_error(to_string(e.kind()), e.what());
    } catch (const nlohmann::json::exception& e) {
        return report_error("configuration_error", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return report_error("io_error", e.what());
    } catch (const std::exception& e) {
        return report_error("internal_error", e.what());
    }
    return 1;
}
