// Acceptance run: one PASS/FAIL line per primary criterion. Exit code is the
// number of failed criteria. Pinned values live both here and in
// acceptance_manifest.json; the run refuses to start if the two disagree.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oasis/checkpoint.hpp"
#include "oasis/experiment.hpp"
#include "oasis/gradcheck.hpp"
#include "support.hpp"

using namespace oasis;
using nlohmann::json;

namespace {

namespace pin {
constexpr int gradcheck_networks = 20;
constexpr double gradcheck_tolerance = 1e-4;
constexpr double gradcheck_seconds = 30.0;
constexpr double affine_tolerance = 1e-4;
constexpr int affine_points = 1000;
constexpr int ber_steps = 100000;
constexpr double ber_se_multiple = 3.0;
constexpr int chi_draws = 100000;
constexpr double chi_min_p = 0.01;
constexpr int fuzz_instances = 10000;
constexpr std::uint64_t directional_first_seed = 100;
constexpr std::uint64_t directional_last_seed = 119;
constexpr double sign_alpha = 0.05;
constexpr double sweep_seconds = 600.0;
constexpr int refine_schedules = 3;
constexpr int split_at = 50;
constexpr std::uint64_t detect_first_seed = 100;
constexpr std::uint64_t detect_last_seed = 109;
constexpr double far_distance = 10.0;
constexpr int far_samples = 1000;
constexpr double min_recall = 0.9;
} // namespace pin

void check_manifest(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open acceptance manifest " + path);
    const json m = json::parse(in);
    auto same = [&](bool ok, const char* what) {
        if (!ok)
            throw std::runtime_error(std::string("acceptance manifest disagrees with the binary on ") + what);
    };
    same(m["gradcheck"]["networks"] == pin::gradcheck_networks, "gradcheck.networks");
    same(m["gradcheck"]["tolerance"] == pin::gradcheck_tolerance, "gradcheck.tolerance");
    same(m["gradcheck"]["max_seconds"] == pin::gradcheck_seconds, "gradcheck.max_seconds");
    same(m["mahalanobis"]["affine_relative_tolerance"] == pin::affine_tolerance, "affine tolerance");
    same(m["mahalanobis"]["affine_points"] == pin::affine_points, "affine points");
    same(m["schedules"]["squ_horizons"] == json::array({16, 100, 400}), "squ horizons");
    same(m["schedules"]["ber_steps"] == pin::ber_steps, "ber steps");
    same(m["schedules"]["ber_se_multiple"] == pin::ber_se_multiple, "ber SE multiple");
    same(m["chi_square"]["draws"] == pin::chi_draws, "chi-square draws");
    same(m["chi_square"]["min_pvalue"] == pin::chi_min_p, "chi-square p");
    same(m["pseudo_label_fuzz"]["instances"] == pin::fuzz_instances, "fuzz instances");
    same(m["directional"]["seeds"] == json::array({pin::directional_first_seed, pin::directional_last_seed}),
         "directional seeds");
    same(m["directional"]["sign_test_alpha"] == pin::sign_alpha, "sign test alpha");
    same(m["directional"]["max_sweep_seconds"] == pin::sweep_seconds, "sweep budget");
    same(m["directional"]["min_schedules_refine_not_worse"] == pin::refine_schedules, "refine schedules");
    same(m["determinism"]["split_at"] == pin::split_at, "split point");
    same(m["unseen_detection"]["seeds"] == json::array({pin::detect_first_seed, pin::detect_last_seed}),
         "detection seeds");
    same(m["unseen_detection"]["min_standardized_distance"] == pin::far_distance, "far distance");
    same(m["unseen_detection"]["cluster_samples"] == pin::far_samples, "cluster samples");
    same(m["unseen_detection"]["min_mean_recall"] == pin::min_recall, "recall threshold");
}

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

ClassStats hand_stats(const std::vector<Vector>& means, const std::vector<Matrix>& covs)
{
    std::vector<ClassGaussian> gs;
    for (std::size_t k = 0; k < means.size(); ++k) {
        ClassGaussian g;
        g.mean = means[k];
        g.covariance = covs[k];
        g.inverse = covs[k].inverse();
        g.count = 10;
        gs.push_back(g);
    }
    return ClassStats(gs);
}

// Binomial(n, 1/2) upper tail P(X >= k).
double sign_test_pvalue(int k, int n)
{
    double p = 0.0;
    for (int i = k; i <= n; ++i)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    return p;
}

Verdict gradients()
{
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = run_gradcheck(pin::gradcheck_networks, 7, 1e-5, pin::gradcheck_tolerance);
    const double secs = seconds_since(t0);
    std::set<std::string> losses;
    std::set<int> nets;
    for (const auto& c : r.cases) {
        losses.insert(c.loss);
        nets.insert(c.network);
    }
    v.detail << "networks=" << nets.size() << " losses=" << losses.size() << " max_rel_err=" << r.max_relative_error
             << " seconds=" << secs;
    v.require(static_cast<int>(nets.size()) >= pin::gradcheck_networks, "network count");
    for (const char* name : {"cross_entropy", "pretrain_different_class", "pretrain_same_class",
                             "contrastive_different_class", "contrastive_same_class", "refinement_pull"})
        v.require(losses.count(name) == 1, std::string("loss ") + name + " checked");
    v.require(r.max_relative_error <= pin::gradcheck_tolerance, "relative error");
    v.require(secs < pin::gradcheck_seconds, "runtime");
    return v;
}

Verdict mahalanobis_suite()
{
    Verdict v;
    const Matrix I = Matrix::Identity(2, 2);
    {
        const ClassStats s = hand_stats({vec({1.0, -2.0})}, {I});
        v.require(mahalanobis(s, 0, vec({1.0, -2.0})) == 0.0, "zero at centroid");
    }
    {
        const ClassStats s = hand_stats({vec({0.0, 0.0})}, {I});
        v.require(std::abs(mahalanobis(s, 0, vec({3.0, 4.0})) - 5.0) < 1e-12, "3-4-5 case");
    }
    {
        Matrix d = Matrix::Zero(2, 2);
        d(0, 0) = 4.0;
        d(1, 1) = 9.0;
        const ClassStats s = hand_stats({vec({0.0, 0.0})}, {d});
        // (2/2, 3/3) standardizes to (1, 1)
        v.require(std::abs(mahalanobis(s, 0, vec({2.0, 3.0})) - std::sqrt(2.0)) < 1e-12, "diagonal standardization");
    }
    {
        v.require(md_margin({3.0, 1.0, 2.0}) == 1.0, "margin is second minus first");
        v.require(md_margin({2.0, 2.0, 5.0}) == 0.0, "tied minimum gives zero margin");
        v.require(nearest_class({2.0, 2.0, 5.0}) == 0, "tie goes to the lowest index");
    }
    {
        // Fit with gamma = 0, map data and queries through the same affine map.
        Rng rng(4242);
        std::vector<Vector> z;
        std::vector<int> y;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 60; ++i) {
                z.push_back(test::random_vector(3, rng) + vec({3.0 * k, -1.0 * k, 0.5 * k}));
                y.push_back(k);
            }
        Matrix A = Matrix::Random(3, 3) + 2.0 * Matrix::Identity(3, 3);
        const Vector b = vec({5.0, -7.0, 0.25});
        std::vector<Vector> za;
        for (const auto& zi : z)
            za.push_back(A * zi + b);
        const Shrinkage none{.relative = 0.0, .floor = 0.0};
        const ClassStats s = fit_stats(z, y, 3, none);
        const ClassStats sa = fit_stats(za, y, 3, none);
        int argmin_diff = 0;
        double worst = 0.0;
        for (int i = 0; i < pin::affine_points; ++i) {
            const Vector q = test::random_vector(3, rng, 3.0);
            const MDSet m = md_set(s, q);
            const MDSet ma = md_set(sa, A * q + b);
            argmin_diff += nearest_class(m) != nearest_class(ma);
            for (std::size_t k = 0; k < m.size(); ++k)
                worst = std::max(worst, std::abs(m[k] - ma[k]) / std::max(m[k], 1e-12));
        }
        v.detail << "affine_worst_rel=" << worst << " argmin_changes=" << argmin_diff;
        v.require(worst <= pin::affine_tolerance, "affine distance invariance");
        v.require(argmin_diff == 0, "affine argmin invariance");
    }
    return v;
}

Verdict schedule_suite()
{
    Verdict v;
    const ShiftSchedule lin(ShiftKind::Lin, 100);
    v.require(lin.alpha(0) == 0.0 && lin.alpha(100) == 1.0, "Lin endpoints");

    for (int T : {16, 100, 400}) {
        const ShiftSchedule squ(ShiftKind::Squ, T);
        const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(T)) / 2.0));
        bool ok = squ.alpha(0) == 0.0;
        for (int t = 1; t <= T; ++t) {
            const bool boundary = t % k == 0;
            const bool toggled = squ.alpha(t) != squ.alpha(t - 1);
            ok = ok && boundary == toggled;
        }
        v.require(ok, "Squ toggles exactly at multiples of ceil(sqrt(T)/2) for T=" + std::to_string(T));
    }

    {
        const int T = 100;
        const ShiftSchedule sin(ShiftKind::Sin, T);
        bool ok = true;
        for (int t = 0; t <= T; ++t) {
            const double raw = std::sin(t * std::numbers::pi / std::sqrt(double(T)));
            const double a = sin.alpha(t);
            ok = ok && a >= 0.0 && a <= 1.0;
            ok = ok && (raw <= 0.0 ? a == 0.0 : a == std::min(raw, 1.0));
        }
        v.require(ok, "Sin clamp");
    }

    {
        const int T = pin::ber_steps;
        const ShiftSchedule ber(ShiftKind::Ber, T, 99);
        long kept = 0;
        for (int t = 1; t <= T; ++t)
            kept += ber.alpha(t) == ber.alpha(t - 1);
        const double p = 1.0 / std::sqrt(double(T));
        const double se = std::sqrt(p * (1 - p) / T);
        const double rate = double(kept) / T;
        v.detail << "ber_keep_rate=" << rate << " target=" << p << " se=" << se;
        v.require(std::abs(rate - p) <= pin::ber_se_multiple * se, "Ber keep rate");
    }

    {
        const WorldSpec w = build_world(WorldConfig{});
        const auto w0 = initial_distribution(w);
        const auto wT = target_distribution(w);
        v.require(mixture_dist(w0, wT, 0.0) == w0, "mixture at alpha 0 is omega_0");
        v.require(mixture_dist(w0, wT, 1.0) == wT, "mixture at alpha 1 is omega_T");
    }
    return v;
}

Verdict chi_square_suite()
{
    Verdict v;
    // D_0 counts of the desk world: round(1000 * 10^(-c/3)).
    const std::vector<double> counts = {1000, 464, 215, 100};
    const double n = 1779.0;
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c)
        labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), c);
    std::vector<double> inv(4);
    for (int c = 0; c < 4; ++c)
        inv[c] = (1.0 - counts[c] / n) / 3.0;

    PairSampler sampler(labels, 4);
    Rng rng(20240601);
    std::vector<long> partner(4, 0);
    for (int i = 0; i < pin::chi_draws; ++i)
        ++partner[static_cast<std::size_t>(labels[sampler.draw_partner(rng)])];
    const double p_pair = test::chi_square_pvalue(partner, inv);

    // omega_0 = counts / n; omega_T reversed with the unseen class at the smallest share.
    const WorldSpec w = build_world(WorldConfig{});
    std::vector<double> w0 = {1000 / n, 464 / n, 215 / n, 100 / n, 0.0};
    const double nT = n + 100;
    std::vector<double> wT = {100 / nT, 215 / nT, 464 / nT, 1000 / nT, 100 / nT};
    const ShiftSchedule lin(ShiftKind::Lin, w.horizon);
    const int t = 37;
    const double a = 0.37;
    std::vector<double> mix(5);
    for (int c = 0; c < 5; ++c)
        mix[c] = (1 - a) * w0[c] + a * wT[c];
    std::vector<long> seen(5, 0);
    long drawn = 0;
    for (int b = 0; drawn < pin::chi_draws; ++b) {
        Rng r = batch_rng(static_cast<std::uint64_t>(b), ShiftKind::Lin, t);
        const LabeledBatch lb = emit_batch(w, lin, t, r);
        for (int y : lb.truth.labels)
            ++seen[static_cast<std::size_t>(y)];
        drawn += static_cast<long>(lb.truth.labels.size());
    }
    const double p_emit = test::chi_square_pvalue(seen, mix);
    v.detail << "pair_p=" << p_pair << " emit_p=" << p_emit << " emit_draws=" << drawn;
    v.require(p_pair > pin::chi_min_p, "pair sampler");
    v.require(p_emit > pin::chi_min_p, "emit_batch labels");
    return v;
}

Verdict fuzz_suite()
{
    Verdict v;
    Rng rng(777);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long bad_branch = 0, rep_below = 0, bad_flag = 0;
    long counts[3] = {0, 0, 0};
    long flags = 0;
    for (int n = 0; n < pin::fuzz_instances; ++n) {
        const Model m = test::small_model(rng(), {2, 5, 3, 4, 4});
        std::vector<Vector> z;
        std::vector<int> y;
        for (int i = 0; i < 24; ++i) {
            z.push_back(test::random_vector(3, rng));
            y.push_back(i % 4);
        }
        const ClassStats s = fit_stats(z, y, 4);
        const Vector x = test::random_vector(2, rng, 3.0);
        const GateThresholds g{.entropy = 0.0, .cosine = 1.0, .pred = 1.5 * u(rng), .margin = 4.0 * u(rng)};
        const DetectThresholds d{.entropy = 1.5 * u(rng), .min_distance = 4.0 * u(rng), .margin = 4.0 * u(rng)};

        const SampleEvidence ev = evidence(m, s, x);
        const double h = entropy(m.forward(x));
        const MDSet md = md_set(s, m.latent(x));
        const double mn = *std::min_element(md.begin(), md.end());
        const double mg = md_margin(md);

        const PseudoLabel p = pseudo_label(ev, g);
        const bool b_model = h < g.pred;
        const bool b_rep = h >= g.pred && mg >= g.margin;
        const bool b_abstain = h >= g.pred && mg < g.margin;
        if (int(b_model) + int(b_rep) + int(b_abstain) != 1 || p.index() != (b_model ? 0u : b_rep ? 1u : 2u))
            ++bad_branch;
        ++counts[p.index()];
        if (std::holds_alternative<RepresentationLabel>(p) && mg < g.margin)
            ++rep_below;

        const bool all_three = h > d.entropy && mn > d.min_distance && mg < d.margin;
        const bool flagged = is_unseen(detect_and_predict(ev, d));
        flags += flagged;
        if (flagged != all_three)
            ++bad_flag;
    }
    v.detail << "model=" << counts[0] << " rep=" << counts[1] << " abstain=" << counts[2] << " unseen=" << flags;
    v.require(bad_branch == 0, "exactly the direct branch fires");
    v.require(rep_below == 0, "no representation label below the margin");
    v.require(bad_flag == 0, "unseen flag iff all three conditions");
    v.require(counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && flags > 0, "every branch exercised");
    return v;
}

struct Sweep {
    std::vector<MetricsRecord> records;
    double seconds = 0.0;
};

Sweep directional_sweep()
{
    ExperimentConfig c = default_config();
    c.seeds.clear();
    for (std::uint64_t s = pin::directional_first_seed; s <= pin::directional_last_seed; ++s)
        c.seeds.push_back(s);
    c.record_wall_time = false;
    const auto t0 = std::chrono::steady_clock::now();
    Sweep sw;
    sw.records = run_experiment(c);
    sw.seconds = seconds_since(t0);
    return sw;
}

// acc[schedule][arm][seed]
using AccTable = std::map<ShiftKind, std::map<Arm, std::map<std::uint64_t, double>>>;

AccTable accuracy_table(const Sweep& sw)
{
    AccTable t;
    for (const auto& r : sw.records)
        t[r.schedule][r.arm][r.seed] = r.mean_seen_accuracy.value_or(0.0);
    return t;
}

Verdict claim_a(const Sweep& sw)
{
    Verdict v;
    const AccTable t = accuracy_table(sw);
    v.detail << "sweep_seconds=" << sw.seconds;
    for (const auto& [kind, arms] : t) {
        int wins = 0, losses = 0;
        double diff = 0.0;
        for (const auto& [seed, ours] : arms.at(Arm::Ours)) {
            const double base = arms.at(Arm::Base).at(seed);
            wins += ours > base;
            losses += ours < base;
            diff += ours - base;
        }
        const int n = wins + losses;
        const double p = n == 0 ? 1.0 : sign_test_pvalue(wins, n);
        v.detail << " " << to_string(kind) << ":" << wins << "/" << n << ",p=" << p
                 << ",mean_diff=" << diff / arms.at(Arm::Ours).size();
        v.require(diff > 0.0, std::string(to_string(kind)) + " ours above base");
        v.require(p < pin::sign_alpha, std::string(to_string(kind)) + " sign test");
    }
    v.require(t.size() == 4, "all four schedules");
    v.require(sw.seconds < pin::sweep_seconds, "sweep runtime");
    return v;
}

Verdict claim_b(const Sweep& sw)
{
    Verdict v;
    const AccTable t = accuracy_table(sw);
    int not_worse = 0;
    for (const auto& [kind, arms] : t) {
        double diff = 0.0;
        for (const auto& [seed, ours] : arms.at(Arm::Ours))
            diff += ours - arms.at(Arm::OursNoRefine).at(seed);
        diff /= static_cast<double>(arms.at(Arm::Ours).size());
        not_worse += diff >= 0.0;
        v.detail << to_string(kind) << ":mean_diff=" << diff << " ";
    }
    std::map<std::uint64_t, double> refined, plain;
    for (const auto& r : sw.records) {
        if (r.arm == Arm::Ours)
            refined[r.seed] = r.pretrain_intra_class_distance;
        if (r.arm == Arm::OursNoRefine)
            plain[r.seed] = r.pretrain_intra_class_distance;
    }
    int lower = 0;
    for (const auto& [seed, d] : refined) {
        const bool ok = d < plain.at(seed);
        lower += ok;
        if (!ok)
            v.detail << "seed" << seed << ":refined=" << d << ",plain=" << plain.at(seed) << " ";
    }
    v.detail << "schedules_not_worse=" << not_worse << " seeds_with_lower_intra_md=" << lower << "/" << refined.size();
    v.require(not_worse >= pin::refine_schedules, "refinement not worse on enough schedules");
    v.require(lower == static_cast<int>(refined.size()) && !refined.empty(), "intra-class distance on every seed");
    return v;
}

Verdict freeze_determinism_persistence()
{
    Verdict v;
    ExperimentConfig c = default_config();
    c.seeds = {pin::directional_first_seed};
    c.schedules = {ShiftKind::Squ, ShiftKind::Ber};
    c.record_wall_time = false;
    const SeedContext ctx = prepare_seed(c, c.seeds.front(), true, false);

    for (ShiftKind kind : {ShiftKind::Lin, ShiftKind::Squ, ShiftKind::Sin, ShiftKind::Ber}) {
        PostState s{ctx.refined->model, ctx.refined->stats};
        const auto before = frozen_checksum(s.model);
        bool constant = true;
        for (int t = 1; t <= ctx.world.horizon; ++t) {
            run_post_training(c, ctx, Arm::Ours, kind, s, t, t);
            constant = constant && frozen_checksum(s.model) == before;
        }
        v.require(constant, std::string("frozen checksum under ") + std::string(to_string(kind)));
    }

    const auto root = std::filesystem::temp_directory_path() / "oasis_acceptance";
    std::filesystem::remove_all(root);
    const auto a = run_experiment(c);
    const auto b = run_experiment(c);
    const auto files = emit_results(a, (root / "a").string(), ResultFormat::Csv);
    emit_results(b, (root / "b").string(), ResultFormat::Csv);
    bool identical = !files.empty();
    for (const auto& f : files) {
        const auto name = std::filesystem::path(f).filename();
        std::ifstream fa(root / "a" / name, std::ios::binary), fb(root / "b" / name, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        identical = identical && sa.str() == sb.str();
    }
    v.detail << "compared_files=" << files.size();
    v.require(identical, "bit-identical outputs");

    PostState whole{ctx.refined->model, ctx.refined->stats};
    const auto full = run_post_training(c, ctx, Arm::Ours, ShiftKind::Ber, whole, 1, ctx.world.horizon);
    PostState first{ctx.refined->model, ctx.refined->stats};
    auto logs = run_post_training(c, ctx, Arm::Ours, ShiftKind::Ber, first, 1, pin::split_at);
    const auto ckpt = (root / "split.ckpt").string();
    save_checkpoint(ckpt, first.model, &first.stats);
    const Checkpoint loaded = load_checkpoint(ckpt);
    PostState resumed{loaded.model, *loaded.stats};
    const auto rest =
        run_post_training(c, ctx, Arm::Ours, ShiftKind::Ber, resumed, pin::split_at + 1, ctx.world.horizon);
    logs.insert(logs.end(), rest.begin(), rest.end());
    v.require(logs == full, "split-run logs equal the continuous run");
    v.require(resumed.model == whole.model, "split-run final model equals the continuous run");
    std::filesystem::remove_all(root);
    return v;
}

/// Input-space cluster whose latents sit at least `far_distance` Mahalanobis
/// units from every seen centroid. Centers are searched on rings around the
/// origin; only samples meeting the distance bound are kept.
std::vector<SampleEvidence> far_cluster(const ExperimentConfig& c, const SeedContext& ctx, std::uint64_t seed)
{
    const Model& m = ctx.refined->model;
    const ClassStats& st = ctx.refined->stats;
    auto draw = [&](const Vector& center, Rng& rng) {
        return Vector(draw_sample(ctx.world, 0, 0.0, rng) - ctx.world.means[0] + center);
    };
    int best = -1;
    Vector center;
    for (double r : {8.0, 12.0, 16.0, 20.0, 30.0})
        for (int a = 0; a < 72; ++a) {
            const double ang = 2 * std::numbers::pi * a / 72;
            Vector ctr = Vector::Zero(c.world.dim);
            ctr[0] = r * std::cos(ang);
            ctr[1] = r * std::sin(ang);
            Rng rng(derive_seed(seed, {99, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(r)}));
            int ok = 0;
            for (int i = 0; i < 50; ++i)
                ok += evidence(m, st, draw(ctr, rng)).min_distance >= pin::far_distance;
            if (ok > best) {
                best = ok;
                center = ctr;
            }
        }
    std::vector<SampleEvidence> out;
    Rng rng(derive_seed(seed, {98}));
    for (int i = 0; i < pin::far_samples; ++i) {
        SampleEvidence ev = evidence(m, st, draw(center, rng));
        if (ev.min_distance >= pin::far_distance)
            out.push_back(std::move(ev));
    }
    return out;
}

Verdict unseen_detection()
{
    Verdict v;
    const ExperimentConfig c = default_config();
    double total = 0.0;
    int seeds = 0;
    std::size_t smallest = pin::far_samples;
    for (std::uint64_t seed = pin::detect_first_seed; seed <= pin::detect_last_seed; ++seed) {
        const SeedContext ctx = prepare_seed(c, seed, true, false);
        const auto cluster = far_cluster(c, ctx, seed);
        smallest = std::min(smallest, cluster.size());
        int flagged = 0;
        for (const auto& ev : cluster)
            flagged += is_unseen(detect_and_predict(ev, c.detect));
        const double recall = cluster.empty() ? 0.0 : double(flagged) / cluster.size();
        total += recall;
        ++seeds;
        v.detail << "seed" << seed << "=" << recall << "(" << cluster.size() << ") ";
    }
    const double mean = total / seeds;
    v.detail << "mean_recall=" << mean << " psi_pred=" << c.detect.entropy << " psi_md=" << c.detect.min_distance
             << " psi_dmd=" << c.detect.margin;
    v.require(smallest >= 50, "every cluster has at least 50 qualifying samples");
    v.require(mean >= pin::min_recall, "mean recall");
    return v;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        check_manifest(argc > 1 ? argv[1] : OASIS_ACCEPTANCE_MANIFEST);
    } catch (const std::exception& e) {
        std::cout << "FAIL manifest: " << e.what() << "\n";
        return 100;
    }

    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " [exception: " << e.what() << "]";
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << v.detail.str()
                  << std::endl;
    };

    report(1, "gradient suite", gradients);
    report(2, "mahalanobis suite", mahalanobis_suite);
    report(3, "schedule suite", schedule_suite);
    report(4, "sampler chi-square suite", chi_square_suite);
    report(5, "pseudo-label totality and exclusivity", fuzz_suite);
    std::optional<Sweep> sweep;
    try {
        sweep = directional_sweep();
    } catch (const std::exception& e) {
        std::cout << "sweep error: " << e.what() << "\n";
    }
    report(6, "adaptation helps (ours vs base)", [&] {
        if (!sweep)
            throw std::runtime_error("sweep failed");
        return claim_a(*sweep);
    });
    report(7, "refinement helps (ours vs ours_no_refine)", [&] {
        if (!sweep)
            throw std::runtime_error("sweep failed");
        return claim_b(*sweep);
    });
    report(8, "freeze, determinism, persistence", freeze_determinism_persistence);
    report(9, "unseen detection on a far cluster", unseen_detection);
    std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
    return failed;
}
