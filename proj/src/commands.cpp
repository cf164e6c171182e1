#include "ufatd/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <omp.h>

#include "ufatd/checkpoint.hpp"
#include "ufatd/codec.hpp"
#include "ufatd/dataset.hpp"
#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"
#include "ufatd/formats.hpp"
#include "ufatd/image.hpp"
#include "ufatd/rng.hpp"

namespace ufatd {

namespace fs = std::filesystem;

namespace {

std::string trim_number(double v) {
    std::string s = fmt::format("{:.4f}", v);
    while (s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

fs::path sibling(const fs::path& p, std::string_view tag) {
    return p.parent_path() / (p.stem().string() + "." + std::string(tag) + p.extension().string());
}

AnchorSet load_anchors_for(const RunConfig& cfg) {
    AnchorSet anchors = read_anchors(cfg.paths.anchors);
    check_consistency(cfg.model, anchors);
    return anchors;
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
    std::string out = "epoch,l_hcl,l_pi,lambda,lr_backbone,val_f1_50,val_pi_acc\n";
    for (const EpochMetrics& m : log) {
        out += fmt::format("{},{},{},{},{},{},{}\n", m.epoch, m.l_hcl, m.l_pi, m.lambda, m.lr_backbone, m.val_f1_50,
                           m.val_pi_acc);
    }
    return out;
}

std::map<std::string, int> read_groups(const fs::path& path) {
    std::map<std::string, int> out;
    std::istringstream in(read_text(path));
    std::string name;
    int group = 0;
    while (in >> name >> group) out[name] = group;
    return out;
}

double acc_tolerance(const RunConfig& cfg) {
    return cfg.acc_tolerance > 0.0 ? cfg.acc_tolerance : 0.5 * cfg.eval.width / cfg.model.w;
}

void paint(Raster& img, const Mask& mask, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.bits[static_cast<std::size_t>(y) * mask.width + x]) continue;
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    }
}

std::string f1_svg(const EvalReport& report, const std::string& title) {
    const double W = 480, H = 320, left = 56, right = 16, top = 32, bottom = 44;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double tau) { return left + (tau - 0.5) / 0.45 * pw; };
    auto py = [&](double f1) { return top + (1.0 - f1) * ph; };
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{3}</text>\n",
        W, H, W / 2, title);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + ph, left + pw);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, top + ph);
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        s += fmt::format(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#ddd\"/>"
            "<text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{5:.1f}</text>\n",
            left, py(f), left + pw, left - 6, py(f) + 4, f);
    }
    for (double tau : report.thresholds) {
        s += fmt::format(
            "<text x=\"{0}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{2:.2f}</text>\n",
            px(tau), top + ph + 16, tau);
    }
    s += fmt::format(
        "<text x=\"{0}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">IoU threshold</text>\n"
        "<text x=\"14\" y=\"{2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 14 {2})\">F1</text>\n",
        left + pw / 2, H - 8, top + ph / 2);
    std::string points;
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
        points += fmt::format("{:.2f},{:.2f} ", px(report.thresholds[i]), py(report.results[i].f1));
    }
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n", points);
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"#1f77b4\"/>\n", px(report.thresholds[i]),
                         py(report.results[i].f1));
    }
    s += "</svg>\n";
    return s;
}

}  // namespace

fs::path split_index(const RunConfig& cfg, const std::string& split) { return cfg.paths.dataset / (split + ".txt"); }

fs::path predictions_dir(const RunConfig& cfg) { return cfg.paths.output / "predictions" / cfg.split; }

std::string format_summary(const EvalReport& report) {
    return fmt::format("mF1={},F1@50={},F1@75={}", trim_number(report.mf1), trim_number(report.f1_at(0.5)),
                       trim_number(report.f1_at(0.75)));
}

DatasetCounts run_synth(const RunConfig& cfg, std::ostream& log) {
    const DatasetCounts c = generate_dataset(cfg.synth.scene, cfg.synth.count, cfg.synth.split, cfg.paths.dataset);
    log << fmt::format("synth: {} train, {} val, {} test images in {}\n", c.train, c.val, c.test,
                       cfg.paths.dataset.string());
    return c;
}

GenAnchorsResult run_gen_anchors(const RunConfig& cfg, std::ostream& log) {
    const fs::path index = split_index(cfg, "train");
    const std::vector<IndexEntry> entries = read_index(index);
    if (entries.empty()) fail(ErrorKind::Input, fmt::format("{}: no training images", index.string()));
    std::vector<std::vector<Polyline>> labels;
    for (const IndexEntry& e : entries) labels.push_back(read_labels(e.label));
    const int image_h = read_pnm(entries.front().image).height;

    GenAnchorsResult r;
    r.extent = top_row_extent(labels);
    const AnchorGenSpec spec{cfg.model.h, cfg.model.n, r.extent.y_min, r.extent.y_max,
                             cfg.anchors.h_anchor_fraction * image_h};
    r.nonuniform = generate_set(spec);
    r.equidistant = generate_equidistant_set(spec);
    write_anchors(sibling(cfg.paths.anchors, "nonuniform"), r.nonuniform);
    write_anchors(sibling(cfg.paths.anchors, "equidistant"), r.equidistant);
    write_anchors(cfg.paths.anchors,
                  cfg.anchors.spacing == AnchorSpacing::Nonuniform ? r.nonuniform : r.equidistant);
    log << fmt::format("gen-anchors: y_min={} y_max={} H_anchor={} -> {}\n", r.extent.y_min, r.extent.y_max,
                       spec.h_anchor, cfg.paths.anchors.string());
    return r;
}

void run_encode(const RunConfig& cfg, std::ostream& log) {
    const AnchorSet anchors = load_anchors_for(cfg);
    const std::vector<IndexEntry> entries = read_index(split_index(cfg, cfg.split));
    std::string out;
    for (const IndexEntry& e : entries) {
        const std::vector<Polyline> tracks = read_labels(e.label);
        const GridTarget t = encode(tracks, anchors, cfg.eval.width, cfg.model.w, cfg.model.C);
        out += fmt::format("image {} group {}\n", e.label.filename().string(), t.gt_group);
        for (int k = 0; k < t.n; ++k) {
            for (int j = 0; j < t.h; ++j) {
                out += fmt::format("{} {} {:.6f}", k, j, anchors.groups[k].rows[j]);
                for (int i = 0; i < t.C; ++i) out += fmt::format(" {}", t.at(k, j, i));
                out += '\n';
            }
        }
    }
    const fs::path path = cfg.paths.output / fmt::format("targets_{}.txt", cfg.split);
    atomic_write(path, out);
    log << fmt::format("encode: {} images -> {} (background cell = {})\n", entries.size(), path.string(), cfg.model.w);
}

TrainResult run_train(const RunConfig& cfg, std::ostream& log) {
    const AnchorSet anchors = load_anchors_for(cfg);
    const LoadedSplit train_split = load_split(split_index(cfg, "train"), cfg.model, anchors);
    const LoadedSplit val_split = load_split(split_index(cfg, "val"), cfg.model, anchors);
    if (train_split.native_w != cfg.eval.width || train_split.native_h != cfg.eval.height) {
        fail(ErrorKind::Config, fmt::format("images are {}x{} but eval.width x eval.height is {}x{}",
                                            train_split.native_w, train_split.native_h, cfg.eval.width,
                                            cfg.eval.height));
    }
    atomic_write(cfg.paths.output / "train_config.txt", echo_config(cfg));

    const Model model(cfg.model);
    TrainContext ctx{anchors, cfg.eval, cfg.decode};
    std::vector<EpochMetrics> history;
    int saved_epoch = -1;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochMetrics& m, const ModelParams& params, bool improved) {
        history.push_back(m);
        atomic_write(cfg.paths.output / "metrics.csv", metrics_csv(history));
        if (improved) {
            ModelParams snapshot = params;
            snapshot.frozen = {false, false, false};
            save_checkpoint(cfg.paths.checkpoint, cfg.model, snapshot);
            saved_epoch = m.epoch;
        }
        log << fmt::format("epoch {:3d}  l_hcl={:.4f} l_pi={:.4f} lambda={} lr_backbone={:.3e} val_f1_50={:.4f} "
                           "val_pi_acc={:.4f}{}\n",
                           m.epoch, m.l_hcl, m.l_pi, m.lambda, m.lr_backbone, m.val_f1_50, m.val_pi_acc,
                           improved ? "  *" : "");
        log.flush();
    };
    try {
        TrainResult r = train(model, cfg.train, ctx, train_split.examples, val_split.examples, hooks);
        log << fmt::format("train: best epoch {} -> {}\n", r.best_epoch, cfg.paths.checkpoint.string());
        return r;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        const std::string kept = saved_epoch < 0 ? std::string("no checkpoint was written")
                                                 : fmt::format("last good checkpoint {} (epoch {})",
                                                               cfg.paths.checkpoint.string(), saved_epoch);
        throw Error(ErrorKind::Numeric, fmt::format("training diverged: {}; {}", e.what(), kept));
    }
}

void run_infer(const RunConfig& cfg, std::ostream& log) {
    const AnchorSet anchors = load_anchors_for(cfg);
    const Checkpoint ck = load_checkpoint(cfg.paths.checkpoint, cfg.model);
    const LoadedSplit split = load_split(split_index(cfg, cfg.split), cfg.model, anchors);
    const Model model(cfg.model);
    const Inference inf = infer(model, ck.params, split.examples, anchors, split.native_w, cfg.decode, cfg.train.batch);

    const fs::path dir = predictions_dir(cfg);
    std::string groups;
    for (std::size_t i = 0; i < split.entries.size(); ++i) {
        const std::string name = split.entries[i].label.filename().string();
        write_labels(dir / name, inf.decoded[i].tracks);
        groups += fmt::format("{} {}\n", name, inf.decoded[i].group);
    }
    atomic_write(dir / "groups.txt", groups);
    log << fmt::format("infer: {} predictions -> {}\n", split.entries.size(), dir.string());
}

EvalOutcome run_eval(const RunConfig& cfg, const fs::path& pred_dir, std::ostream& log) {
    const std::vector<IndexEntry> entries = read_index(split_index(cfg, cfg.split));
    std::optional<AnchorSet> anchors;
    if (fs::exists(cfg.paths.anchors)) anchors = read_anchors(cfg.paths.anchors);
    std::vector<ImageLines> corpus;
    std::vector<std::vector<double>> rows;
    for (const IndexEntry& e : entries) {
        const fs::path pred = pred_dir / e.label.filename();
        if (!fs::exists(pred)) fail(ErrorKind::Input, fmt::format("missing prediction file {}", pred.string()));
        ImageLines lines{read_labels(pred), read_labels(e.label)};
        std::vector<double> ys;
        if (anchors && !lines.gts.empty()) {
            ys = anchors->groups[static_cast<std::size_t>(assign_group(lines.gts, *anchors))].rows;
        } else {
            for (const Polyline& p : lines.gts)
                for (const Point& v : p.vertices) ys.push_back(v.y);
            std::sort(ys.begin(), ys.end());
            ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        }
        rows.push_back(std::move(ys));
        corpus.push_back(std::move(lines));
    }

    EvalOutcome out;
    out.report = evaluate(corpus, cfg.eval);
    out.acc = acc(corpus, rows, acc_tolerance(cfg));
    out.summary = format_summary(out.report);

    const fs::path groups_path = pred_dir / "groups.txt";
    if (fs::exists(groups_path) && anchors) {
        const auto groups = read_groups(groups_path);
        long correct = 0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto it = groups.find(entries[i].label.filename().string());
            if (it == groups.end()) fail(ErrorKind::Input, fmt::format("{}: no group for {}", groups_path.string(),
                                                                        entries[i].label.filename().string()));
            correct += it->second == assign_group(corpus[i].gts, *anchors);
        }
        out.pi_acc = entries.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(entries.size());
    }

    std::string csv = "tau,precision,recall,f1\n";
    for (std::size_t i = 0; i < out.report.thresholds.size(); ++i) {
        const MatchResult& m = out.report.results[i];
        csv += fmt::format("{:.2f},{},{},{}\n", out.report.thresholds[i], m.precision, m.recall, m.f1);
    }
    atomic_write(cfg.paths.output / fmt::format("eval_{}.csv", cfg.split), csv);
    std::string extra = fmt::format("acc={} ({} of {} points within {} px)", out.acc.acc, out.acc.correct,
                                    out.acc.total, acc_tolerance(cfg));
    if (out.pi_acc) extra += fmt::format("\npi_acc={}", *out.pi_acc);
    atomic_write(cfg.paths.output / fmt::format("eval_{}_summary.txt", cfg.split), out.summary + "\n" + extra + "\n");
    log << out.summary << '\n' << extra << '\n';
    return out;
}

BenchReport run_bench(const RunConfig& cfg, std::ostream& log) {
    const Model model(cfg.model);
    ModelParams params;
    if (fs::exists(cfg.paths.checkpoint)) {
        params = load_checkpoint(cfg.paths.checkpoint, cfg.model).params;
    } else {
        params = model.init(cfg.train.seed);
        log << fmt::format("bench: {} not found, timing seeded initial parameters\n", cfg.paths.checkpoint.string());
    }
    AnchorSet anchors;
    if (fs::exists(cfg.paths.anchors)) {
        anchors = load_anchors_for(cfg);
    } else {
        const int H = cfg.eval.height;
        anchors = generate_set({cfg.model.h, cfg.model.n, 0.1 * H, 0.6 * H, cfg.anchors.h_anchor_fraction * H});
    }
    Rng rng = Rng::derive(cfg.synth.scene.seed, 0);
    const Sample sample = render(cfg.synth.scene, 0, rng);
    Tensor input({1, cfg.model.channels, cfg.model.in_h, cfg.model.in_w});
    input.data = to_model_input(sample.image, cfg.model.in_w, cfg.model.in_h, cfg.model.channels);

    const int saved_threads = omp_get_max_threads();
    omp_set_num_threads(cfg.bench.threads);
    BenchReport r;
    using clock = std::chrono::steady_clock;
    for (int it = 0; it < cfg.bench.warmup + cfg.bench.iterations; ++it) {
        const auto t0 = clock::now();
        const BatchPrediction pred = model.forward(params, input);
        const auto t1 = clock::now();
        const DecodedTracks decoded = decode(pred.image(0), anchors, cfg.eval.width, cfg.model.w, cfg.decode);
        const auto t2 = clock::now();
        if (it < cfg.bench.warmup) continue;
        r.forward_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        r.decode_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
    omp_set_num_threads(saved_threads);

    const std::size_t n = r.forward_ms.size();
    std::vector<double> total(n);
    for (std::size_t i = 0; i < n; ++i) total[i] = r.forward_ms[i] + r.decode_ms[i];
    r.mean_ms = std::accumulate(total.begin(), total.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double t : total) var += (t - r.mean_ms) * (t - r.mean_ms);
    r.stddev_ms = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    std::vector<double> sorted = total;
    std::sort(sorted.begin(), sorted.end());
    r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    r.mean_fps = 1000.0 / r.mean_ms;
    r.median_fps = 1000.0 / r.median_ms;
    r.reduction_ratio = reduction_ratio(cfg.model.in_h, cfg.model.in_w, cfg.model.h, cfg.model.w, cfg.model.n);

    std::string csv = "iteration,forward_ms,decode_ms,total_ms\n";
    for (std::size_t i = 0; i < n; ++i) {
        csv += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", i, r.forward_ms[i], r.decode_ms[i], total[i]);
    }
    atomic_write(cfg.paths.output / "bench_latency.csv", csv);
    const double fwd = std::accumulate(r.forward_ms.begin(), r.forward_ms.end(), 0.0) / static_cast<double>(n);
    const std::string summary = fmt::format(
        "iterations={}\nwarmup={}\nthreads={}\nmean_ms={:.6f}\nmedian_ms={:.6f}\nstddev_ms={:.6f}\n"
        "forward_ms={:.6f}\ndecode_ms={:.6f}\nmean_fps={:.2f}\nmedian_fps={:.2f}\nreduction_ratio={:.4f}\n",
        n, cfg.bench.warmup, cfg.bench.threads, r.mean_ms, r.median_ms, r.stddev_ms, fwd, r.mean_ms - fwd,
        r.mean_fps, r.median_fps, r.reduction_ratio);
    atomic_write(cfg.paths.output / "bench_summary.txt", summary);
    log << summary;
    return r;
}

void run_viz(const RunConfig& cfg, int limit, std::ostream& log) {
    const std::vector<IndexEntry> entries = read_index(split_index(cfg, cfg.split));
    const fs::path pred_dir = predictions_dir(cfg);
    const fs::path out_dir = cfg.paths.output / "viz";
    const AnchorSet anchors = load_anchors_for(cfg);
    const auto groups = read_groups(pred_dir / "groups.txt");
    const int count = std::min<int>(limit, static_cast<int>(entries.size()));
    for (int i = 0; i < count; ++i) {
        const IndexEntry& e = entries[i];
        const std::string name = e.label.filename().string();
        Raster img = to_rgb(read_pnm(e.image));
        const auto it = groups.find(name);
        if (it == groups.end()) fail(ErrorKind::Input, fmt::format("no predicted group for {}", name));
        for (double row : anchors.groups.at(it->second).rows) {
            const int y = std::clamp(static_cast<int>(std::lround(row)), 0, img.height - 1);
            for (int x = 0; x < std::min(10, img.width); ++x) {
                img.at(x, y, 0) = img.at(img.width - 1 - x, y, 0) = 255;
                img.at(x, y, 1) = img.at(img.width - 1 - x, y, 1) = 220;
                img.at(x, y, 2) = img.at(img.width - 1 - x, y, 2) = 0;
            }
        }
        for (const Polyline& p : read_labels(e.label)) paint(img, rasterize(p, 1.5, img.width, img.height), 0, 200, 0);
        for (const Polyline& p : read_labels(pred_dir / name)) {
            paint(img, rasterize(p, 1.5, img.width, img.height), 230, 0, 0);
        }
        write_pnm(out_dir / (e.label.stem().string() + ".ppm"), img);
    }
    const EvalOutcome ev = run_eval(cfg, pred_dir, log);
    atomic_write(out_dir / "f1_vs_tau.svg", f1_svg(ev.report, fmt::format("F1 vs IoU threshold ({})", cfg.split)));
    log << fmt::format("viz: {} overlays and f1_vs_tau.svg -> {}\n", count, out_dir.string());
}

}  // namespace ufatd
