#include "oasis/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "oasis/error.hpp"

namespace oasis {

namespace {

using nlohmann::json;

std::optional<double> ratio(int num, int den)
{
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

json optional_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from(const json& j)
{
    if (j.is_null())
        return std::nullopt;
    return j.get<double>();
}

void write_optional(std::ostream& os, const std::optional<double>& v)
{
    if (v)
        os << *v;
}

std::optional<double> parse_optional(const std::string& cell)
{
    if (cell.empty())
        return std::nullopt;
    return std::stod(cell);
}

constexpr const char* kTimestepHeader =
    "t,alpha,sim,n_gated,n_model_labels,n_rep_labels,n_abstain,n_unseen_flagged,seen_accuracy,unseen_precision,"
    "unseen_recall,wall_ms,n_updates,n_seen,n_seen_correct,n_unseen,n_true_flags,n_false_flags,n_contaminated";

void write_timestep_csv(std::ostream& os, const std::vector<TimestepLog>& logs)
{
    os << std::setprecision(17);
    os << kTimestepHeader << '\n';
    for (const auto& l : logs) {
        const auto& c = l.counters;
        const auto& s = l.score;
        os << l.t << ',' << l.alpha << ',' << l.sim << ',' << c.n_gated << ',' << c.n_model_labels << ','
           << c.n_rep_labels << ',' << c.n_abstain << ',' << c.n_unseen_flagged << ',';
        write_optional(os, s.seen_accuracy);
        os << ',';
        write_optional(os, s.unseen_precision);
        os << ',';
        write_optional(os, s.unseen_recall);
        os << ',' << l.wall_ms << ',' << c.n_updates << ',' << s.n_seen << ',' << s.n_seen_correct << ',' << s.n_unseen
           << ',' << s.n_true_flags << ',' << s.n_false_flags << ',' << l.n_contaminated << '\n';
    }
}

json timestep_json(const TimestepLog& l)
{
    const auto& c = l.counters;
    const auto& s = l.score;
    return {{"t", l.t},
            {"alpha", l.alpha},
            {"sim", l.sim},
            {"n_gated", c.n_gated},
            {"n_model_labels", c.n_model_labels},
            {"n_rep_labels", c.n_rep_labels},
            {"n_abstain", c.n_abstain},
            {"n_unseen_flagged", c.n_unseen_flagged},
            {"seen_accuracy", optional_json(s.seen_accuracy)},
            {"unseen_precision", optional_json(s.unseen_precision)},
            {"unseen_recall", optional_json(s.unseen_recall)},
            {"wall_ms", l.wall_ms},
            {"n_updates", c.n_updates},
            {"n_seen", s.n_seen},
            {"n_seen_correct", s.n_seen_correct},
            {"n_unseen", s.n_unseen},
            {"n_true_flags", s.n_true_flags},
            {"n_false_flags", s.n_false_flags},
            {"n_contaminated", l.n_contaminated}};
}

TimestepLog timestep_from_json(const json& j)
{
    TimestepLog l;
    l.t = j.at("t").get<int>();
    l.alpha = j.at("alpha").get<double>();
    l.sim = j.at("sim").get<double>();
    l.counters.n_gated = j.at("n_gated").get<int>();
    l.counters.n_model_labels = j.at("n_model_labels").get<int>();
    l.counters.n_rep_labels = j.at("n_rep_labels").get<int>();
    l.counters.n_abstain = j.at("n_abstain").get<int>();
    l.counters.n_unseen_flagged = j.at("n_unseen_flagged").get<int>();
    l.counters.n_updates = j.at("n_updates").get<int>();
    l.score.seen_accuracy = optional_from(j.at("seen_accuracy"));
    l.score.unseen_precision = optional_from(j.at("unseen_precision"));
    l.score.unseen_recall = optional_from(j.at("unseen_recall"));
    l.score.n_seen = j.at("n_seen").get<int>();
    l.score.n_seen_correct = j.at("n_seen_correct").get<int>();
    l.score.n_unseen = j.at("n_unseen").get<int>();
    l.score.n_true_flags = j.at("n_true_flags").get<int>();
    l.score.n_false_flags = j.at("n_false_flags").get<int>();
    l.n_contaminated = j.at("n_contaminated").get<int>();
    l.wall_ms = j.at("wall_ms").get<double>();
    return l;
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
    return out;
}

} // namespace

BatchScore score_batch(std::span<const Prediction> predictions, const BatchTruth& truth)
{
    if (predictions.size() != truth.labels.size() || truth.labels.size() != truth.unseen.size())
        fail(ErrorKind::Validation, "predictions and truth differ in length");
    BatchScore s;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool flagged = is_unseen(predictions[i]);
        if (truth.unseen[i]) {
            ++s.n_unseen;
            if (flagged)
                ++s.n_true_flags;
        } else {
            ++s.n_seen;
            if (flagged)
                ++s.n_false_flags;
            else if (std::get<Seen>(predictions[i]).label == truth.labels[i])
                ++s.n_seen_correct;
        }
    }
    s.seen_accuracy = ratio(s.n_seen_correct, s.n_seen);
    s.unseen_precision = ratio(s.n_true_flags, s.n_true_flags + s.n_false_flags);
    s.unseen_recall = ratio(s.n_true_flags, s.n_unseen);
    return s;
}

bool TimestepLog::operator==(const TimestepLog& o) const
{
    const auto& a = counters;
    const auto& b = o.counters;
    return t == o.t && alpha == o.alpha && sim == o.sim && a.n_gated == b.n_gated &&
           a.n_model_labels == b.n_model_labels && a.n_rep_labels == b.n_rep_labels && a.n_abstain == b.n_abstain &&
           a.n_unseen_flagged == b.n_unseen_flagged && a.n_updates == b.n_updates &&
           score.seen_accuracy == o.score.seen_accuracy && score.unseen_precision == o.score.unseen_precision &&
           score.unseen_recall == o.score.unseen_recall && score.n_seen == o.score.n_seen &&
           score.n_seen_correct == o.score.n_seen_correct && score.n_unseen == o.score.n_unseen &&
           score.n_true_flags == o.score.n_true_flags && score.n_false_flags == o.score.n_false_flags &&
           n_contaminated == o.n_contaminated && wall_ms == o.wall_ms;
}

bool MetricsRecord::operator==(const MetricsRecord& o) const
{
    return arm == o.arm && schedule == o.schedule && seed == o.seed && logs == o.logs &&
           mean_seen_accuracy == o.mean_seen_accuracy && unseen_f1 == o.unseen_f1 &&
           adaptation_rate == o.adaptation_rate && pseudo_label_contamination == o.pseudo_label_contamination &&
           pretrain_intra_class_distance == o.pretrain_intra_class_distance && runtime_ms == o.runtime_ms;
}

void aggregate(MetricsRecord& r)
{
    double acc_sum = 0.0;
    int acc_n = 0;
    int tp = 0, fp = 0, fn = 0, gated = 0, total = 0, labelled = 0, contaminated = 0;
    for (const auto& l : r.logs) {
        if (l.score.seen_accuracy) {
            acc_sum += *l.score.seen_accuracy;
            ++acc_n;
        }
        tp += l.score.n_true_flags;
        fp += l.score.n_false_flags;
        fn += l.score.n_unseen - l.score.n_true_flags;
        gated += l.counters.n_gated;
        total += l.score.n_seen + l.score.n_unseen;
        labelled += l.counters.n_model_labels + l.counters.n_rep_labels;
        contaminated += l.n_contaminated;
    }
    r.mean_seen_accuracy = acc_n ? std::optional<double>(acc_sum / acc_n) : std::nullopt;
    r.unseen_f1 = ratio(2 * tp, 2 * tp + fp + fn);
    r.adaptation_rate = total ? static_cast<double>(gated) / total : 0.0;
    r.pseudo_label_contamination = labelled ? static_cast<double>(contaminated) / labelled : 0.0;
}

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed, bool need_refined, bool need_plain)
{
    SeedContext ctx;
    ctx.seed = seed;
    ctx.world = build_world(config.world);
    if (config.world.pretrain_csv.empty()) {
        Rng rng(derive_seed(seed, {stream_key::world}));
        ctx.d0 = make_pretrain_set(ctx.world, rng);
    } else {
        ctx.d0 = read_dataset_csv(config.world.pretrain_csv);
        for (std::size_t i = 0; i < ctx.d0.size(); ++i) {
            if (ctx.d0.features[i].size() != ctx.world.dim)
                fail(ErrorKind::Validation, "pretrain CSV feature count does not match world.dim");
            if (ctx.d0.labels[i] >= ctx.world.num_seen)
                fail(ErrorKind::InvalidLabel, "pretrain CSV label outside the seen classes");
        }
    }
    PretrainConfig pc = config.pretrain;
    if (need_refined) {
        pc.refine = true;
        ctx.refined = run_pretraining(ctx.d0, ctx.world.num_seen, config.model, pc, seed);
    }
    if (need_plain) {
        pc.refine = false;
        ctx.plain = run_pretraining(ctx.d0, ctx.world.num_seen, config.model, pc, seed);
    }
    return ctx;
}

std::vector<TimestepLog> run_post_training(const ExperimentConfig& config, const SeedContext& ctx, Arm arm,
                                           ShiftKind kind, PostState& state, int t_begin, int t_end)
{
    const WorldSpec& world = ctx.world;
    if (t_begin < 1 || t_end > world.horizon || t_begin > t_end + 1)
        fail(ErrorKind::Range, "post-training range must lie within [1, T]");
    const ShiftSchedule schedule(kind, world.horizon, schedule_seed(ctx.seed, kind),
                                 config.shift.ber_flip_prob_is_inv_sqrt_T);
    PostConfig post = config.post;
    post.adapt = arm != Arm::Base;

    std::vector<Vector> previous;
    if (t_begin == 1) {
        previous = ctx.d0.features;
    } else {
        Rng rng = batch_rng(ctx.seed, kind, t_begin - 1);
        const LabeledBatch prior = emit_batch(world, schedule, t_begin - 1, rng, config.shift);
        const auto s = prior.batch.samples();
        previous.assign(s.begin(), s.end());
    }

    const std::vector<Vector> d0_latents = config.refresh_stats ? latents_of(state.model, ctx.d0.features)
                                                                : std::vector<Vector>{};
    std::vector<TimestepLog> logs;
    for (int t = t_begin; t <= t_end; ++t) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng = batch_rng(ctx.seed, kind, t);
        const LabeledBatch lb = emit_batch(world, schedule, t, rng, config.shift);

        const std::uint64_t frozen_before = frozen_checksum(state.model);
        const std::uint64_t all_before = parameter_checksum(state.model);
        const TimestepOutcome outcome =
            run_timestep(state.model, state.stats, lb.batch, previous, config.gates, config.detect, post);
        if (frozen_checksum(state.model) != frozen_before)
            fail(ErrorKind::Contract, "frozen parameters changed during post-training");
        if (arm == Arm::Base && parameter_checksum(state.model) != all_before)
            fail(ErrorKind::Contract, "base arm mutated parameters");

        TimestepLog log;
        log.t = t;
        log.alpha = lb.alpha;
        log.sim = outcome.similarity;
        log.counters = outcome.counters;
        log.score = score_batch(outcome.predictions, lb.truth);
        for (std::size_t i = 0; i < outcome.pseudo_labels.size(); ++i)
            if (outcome.pseudo_labels[i] && lb.truth.unseen[i])
                ++log.n_contaminated;

        if (config.refresh_stats && post.adapt) {
            std::vector<Vector> latents = d0_latents;
            std::vector<int> labels = ctx.d0.labels;
            const auto samples = lb.batch.samples();
            for (std::size_t i = 0; i < samples.size(); ++i)
                if (outcome.pseudo_labels[i]) {
                    latents.push_back(state.model.latent(samples[i]));
                    labels.push_back(*outcome.pseudo_labels[i]);
                }
            state.stats = fit_stats(latents, labels, world.num_seen, config.pretrain.shrinkage);
        }

        const auto samples = lb.batch.samples();
        previous.assign(samples.begin(), samples.end());
        if (config.record_wall_time)
            log.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        logs.push_back(log);
    }
    return logs;
}

MetricsRecord run_arm(const ExperimentConfig& config, const SeedContext& ctx, Arm arm, ShiftKind schedule)
{
    const auto start = std::chrono::steady_clock::now();
    const auto& source = arm == Arm::OursNoRefine ? ctx.plain : ctx.refined;
    if (!source)
        fail(ErrorKind::Contract, "seed context lacks the pre-trained model for arm " + std::string(to_string(arm)));
    PostState state{source->model, source->stats};

    MetricsRecord record;
    record.arm = arm;
    record.schedule = schedule;
    record.seed = ctx.seed;
    record.pretrain_intra_class_distance =
        mean_intra_class_distance(source->stats, latents_of(source->model, ctx.d0.features), ctx.d0.labels);
    record.logs = run_post_training(config, ctx, arm, schedule, state, 1, ctx.world.horizon);
    aggregate(record);
    if (config.record_wall_time)
        record.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return record;
}

std::vector<MetricsRecord> run_experiment(const ExperimentConfig& config)
{
    validate(config);
    bool need_refined = false, need_plain = false;
    for (Arm a : config.arms)
        (a == Arm::OursNoRefine ? need_plain : need_refined) = true;

    std::vector<MetricsRecord> records;
    for (std::uint64_t seed : config.seeds) {
        const SeedContext ctx = prepare_seed(config, seed, need_refined, need_plain);
        for (Arm arm : config.arms)
            for (ShiftKind kind : config.schedules)
                records.push_back(run_arm(config, ctx, arm, kind));
    }
    return records;
}

std::vector<SummaryRow> summarize(std::span<const MetricsRecord> records)
{
    std::vector<std::pair<Arm, ShiftKind>> order;
    std::map<std::pair<Arm, ShiftKind>, std::vector<const MetricsRecord*>> groups;
    for (const auto& r : records) {
        const auto key = std::pair{r.arm, r.schedule};
        if (!groups.contains(key))
            order.push_back(key);
        groups[key].push_back(&r);
    }
    std::vector<SummaryRow> rows;
    for (const auto& key : order) {
        const auto& g = groups[key];
        SummaryRow row{key.first, key.second};
        std::vector<double> accs;
        double f1_sum = 0.0;
        int f1_n = 0;
        for (const auto* r : g) {
            if (r->mean_seen_accuracy)
                accs.push_back(*r->mean_seen_accuracy);
            if (r->unseen_f1) {
                f1_sum += *r->unseen_f1;
                ++f1_n;
            }
            row.adapt_rate += r->adaptation_rate;
        }
        row.adapt_rate /= static_cast<double>(g.size());
        for (double a : accs)
            row.mean_acc += a;
        if (!accs.empty())
            row.mean_acc /= static_cast<double>(accs.size());
        if (accs.size() > 1) {
            double ss = 0.0;
            for (double a : accs)
                ss += (a - row.mean_acc) * (a - row.mean_acc);
            row.std_acc = std::sqrt(ss / static_cast<double>(accs.size() - 1));
        }
        if (f1_n)
            row.unseen_f1 = f1_sum / f1_n;
        rows.push_back(row);
    }
    return rows;
}

std::string record_stem(const MetricsRecord& r)
{
    return "timesteps_" + std::string(to_string(r.arm)) + "_" + std::string(to_string(r.schedule)) + "_seed" +
           std::to_string(r.seed);
}

json to_json(const MetricsRecord& r)
{
    json steps = json::array();
    for (const auto& l : r.logs)
        steps.push_back(timestep_json(l));
    return {{"arm", std::string(to_string(r.arm))},
            {"schedule", std::string(to_string(r.schedule))},
            {"seed", r.seed},
            {"mean_seen_accuracy", optional_json(r.mean_seen_accuracy)},
            {"unseen_f1", optional_json(r.unseen_f1)},
            {"adaptation_rate", r.adaptation_rate},
            {"pseudo_label_contamination", r.pseudo_label_contamination},
            {"pretrain_intra_class_distance", r.pretrain_intra_class_distance},
            {"runtime_ms", r.runtime_ms},
            {"timesteps", steps}};
}

MetricsRecord record_from_json(const json& j)
{
    try {
        MetricsRecord r;
        r.arm = parse_arm(j.at("arm").get<std::string>());
        r.schedule = parse_shift_kind(j.at("schedule").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.mean_seen_accuracy = optional_from(j.at("mean_seen_accuracy"));
        r.unseen_f1 = optional_from(j.at("unseen_f1"));
        r.adaptation_rate = j.at("adaptation_rate").get<double>();
        r.pseudo_label_contamination = j.at("pseudo_label_contamination").get<double>();
        r.pretrain_intra_class_distance = j.at("pretrain_intra_class_distance").get<double>();
        r.runtime_ms = j.at("runtime_ms").get<double>();
        for (const auto& s : j.at("timesteps"))
            r.logs.push_back(timestep_from_json(s));
        return r;
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("malformed metrics record: ") + e.what());
    }
}

MetricsRecord read_record_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path + "'");
    try {
        return record_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Validation, "'" + path + "' is not valid JSON: " + e.what());
    }
}

std::vector<TimestepLog> read_timestep_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kTimestepHeader)
        fail(ErrorKind::Validation, "'" + path + "' lacks the per-timestep header");
    std::vector<TimestepLog> logs;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        if (cells.size() != 19)
            fail(ErrorKind::Validation, "'" + path + "' has a malformed row");
        TimestepLog l;
        l.t = std::stoi(cells[0]);
        l.alpha = std::stod(cells[1]);
        l.sim = std::stod(cells[2]);
        l.counters.n_gated = std::stoi(cells[3]);
        l.counters.n_model_labels = std::stoi(cells[4]);
        l.counters.n_rep_labels = std::stoi(cells[5]);
        l.counters.n_abstain = std::stoi(cells[6]);
        l.counters.n_unseen_flagged = std::stoi(cells[7]);
        l.score.seen_accuracy = parse_optional(cells[8]);
        l.score.unseen_precision = parse_optional(cells[9]);
        l.score.unseen_recall = parse_optional(cells[10]);
        l.wall_ms = std::stod(cells[11]);
        l.counters.n_updates = std::stoi(cells[12]);
        l.score.n_seen = std::stoi(cells[13]);
        l.score.n_seen_correct = std::stoi(cells[14]);
        l.score.n_unseen = std::stoi(cells[15]);
        l.score.n_true_flags = std::stoi(cells[16]);
        l.score.n_false_flags = std::stoi(cells[17]);
        l.n_contaminated = std::stoi(cells[18]);
        logs.push_back(l);
    }
    return logs;
}

std::vector<std::string> emit_results(std::span<const MetricsRecord> records, const std::string& dir,
                                      ResultFormat format)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());

    std::vector<std::string> written;
    for (const auto& r : records) {
        const fs::path path = fs::path(dir) / (record_stem(r) + (format == ResultFormat::Csv ? ".csv" : ".json"));
        auto out = open_output(path);
        if (format == ResultFormat::Csv)
            write_timestep_csv(out, r.logs);
        else
            out << to_json(r).dump(2) << '\n';
        if (!out)
            fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
        written.push_back(path.string());
    }

    const auto rows = summarize(records);
    const fs::path summary = fs::path(dir) / (format == ResultFormat::Csv ? "summary.csv" : "summary.json");
    auto out = open_output(summary);
    if (format == ResultFormat::Csv) {
        out << std::setprecision(17);
        out << "arm,schedule,mean_acc,std_acc,unseen_f1,adapt_rate\n";
        for (const auto& row : rows) {
            out << to_string(row.arm) << ',' << to_string(row.schedule) << ',' << row.mean_acc << ',' << row.std_acc
                << ',';
            write_optional(out, row.unseen_f1);
            out << ',' << row.adapt_rate << '\n';
        }
    } else {
        json arr = json::array();
        for (const auto& row : rows)
            arr.push_back({{"arm", std::string(to_string(row.arm))},
                           {"schedule", std::string(to_string(row.schedule))},
                           {"mean_acc", row.mean_acc},
                           {"std_acc", row.std_acc},
                           {"unseen_f1", optional_json(row.unseen_f1)},
                           {"adapt_rate", row.adapt_rate}});
        out << arr.dump(2) << '\n';
    }
    if (!out)
        fail(ErrorKind::Io, "failed writing '" + summary.string() + "'");
    written.push_back(summary.string());
    return written;
}

} // namespace oasis
