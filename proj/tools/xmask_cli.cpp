// xmask: batch front end for segmentation, losses, EDP-SAM annotation,
// evaluation and the synthetic demo. Exit codes: 0 ok, 2 input/shape error,
// 3 precondition error, 4 numerical divergence.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmask/edpsam.hpp"
#include "xmask/error.hpp"
#include "xmask/eval.hpp"
#include "xmask/io.hpp"
#include "xmask/losses.hpp"
#include "xmask/segmenter.hpp"
#include "xmask/toy.hpp"

namespace fs = std::filesystem;
using namespace xmask;

namespace {

io::RunConfig load_config(const std::string& path) { return path.empty() ? io::RunConfig{} : io::read_config(path); }

void emit_json(const nlohmann::json& j, const std::string& out_path) {
    const std::string text = j.dump(2);
    if (out_path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path);
    out << text << "\n";
}

// Points come in image coordinates; the feature grid is `stride` times coarser.
PointSet points_on_grid(const std::string& path, Dims grid, int stride) {
    const Dims image{grid.height * stride, grid.width * stride};
    const PointSet pts = io::read_points(path, image);
    return stride == 1 ? pts : pts.rescaled(stride, grid);
}

ScalarField embedding_norm(const FeatureMap& f) {
    ScalarField out(f.dims);
    for (std::size_t i = 0; i < f.plane(); ++i) {
        double s = 0.0;
        for (int c = 0; c < f.channels; ++c) s += f.values[c * f.plane() + i] * f.values[c * f.plane() + i];
        out.values[i] = std::sqrt(s);
    }
    return out;
}

struct SegmentArgs {
    std::string fmap, points, config, out, png;
};

int cmd_segment(const SegmentArgs& a) {
    const io::RunConfig cfg = load_config(a.config);
    const FeatureMap fmap = io::feature_map_from(io::read_tensor(a.fmap));
    const PointSet pts = points_on_grid(a.points, fmap.dims, cfg.stride);
    const SegmentationLabelMap seg = segment(fmap, pts, cfg.energy, cfg.disc.kernel);
    io::write_tensor(a.out, io::to_tensor(seg));
    if (!a.png.empty()) io::write_label_png(a.png, seg);
    std::cerr << "segmented " << seg.ids().size() << " of " << pts.size() << " instances\n";
    return 0;
}

struct LossArgs {
    std::string fmap, points, labels, pred, config, out;
    bool gradcheck = false;
    double h = 1e-5;
};

int cmd_losses(const LossArgs& a) {
    const io::RunConfig cfg = load_config(a.config);
    const FeatureMap fmap = io::feature_map_from(io::read_tensor(a.fmap));
    const LabelMap labels = io::label_map_from(io::read_tensor(a.labels));
    if (labels.dims != fmap.dims) throw InputError("labels dims differ from feature map dims");
    const PointSet pts = points_on_grid(a.points, fmap.dims, cfg.stride);
    const NnecRadii radii = nnec_radii(pts, fmap.dims);

    const auto disc = discriminative_loss(fmap, pts, labels, radii, cfg.disc);
    for (auto id : disc.orphans) std::cerr << "warning: point " << id << " skipped (background under point)\n";

    nlohmann::json report{{"discriminative", disc.value}, {"supervised", disc.supervised}, {"orphans", disc.orphans}};
    nlohmann::json checks;
    if (a.gradcheck) {
        auto fn = [&](std::span<const double> x) {
            FeatureMap probe = fmap;
            probe.values.assign(x.begin(), x.end());
            return discriminative_loss(probe, pts, labels, radii, cfg.disc).value;
        };
        checks["discriminative"] = max_relative_error(disc.gradient.values, finite_diff_gradient(fn, fmap.values, a.h));
    }

    if (!a.pred.empty()) {
        const ScalarField pred = io::scalar_field_from(io::read_tensor(a.pred));
        if (pred.dims != labels.dims) throw InputError("pred dims differ from labels dims");
        std::vector<std::uint32_t> valid;
        const auto present = labels.ids();
        for (const Point& p : pts.points()) {
            if (p.score.value_or(1.0) >= cfg.pseudo_mask.high_threshold &&
                std::binary_search(present.begin(), present.end(), p.id)) {
                valid.push_back(p.id);
            }
        }
        const auto bg = background_penalty(pred, labels);
        const auto fg = foreground_constraint(pred, labels, valid, cfg.foreground);
        report["background"] = bg.value;
        report["foreground"] = fg.value;
        report["valid_ids"] = valid;
        if (a.gradcheck) {
            auto wrap = [&](auto loss) {
                return [&, loss](std::span<const double> x) {
                    ScalarField probe = pred;
                    probe.values.assign(x.begin(), x.end());
                    return loss(probe);
                };
            };
            checks["background"] = max_relative_error(
                bg.gradient.values,
                finite_diff_gradient(wrap([&](const ScalarField& f) { return background_penalty(f, labels).value; }),
                                     pred.values, a.h));
            checks["foreground"] = max_relative_error(
                fg.gradient.values,
                finite_diff_gradient(
                    wrap([&](const ScalarField& f) { return foreground_constraint(f, labels, valid, cfg.foreground).value; }),
                    pred.values, a.h));
        }
    }
    if (a.gradcheck) report["gradcheck_max_rel_error"] = checks;
    emit_json(report, a.out);
    return 0;
}

struct EdpSamArgs {
    std::string image, points, candidates, config, out, png;
    bool slic_only = false;
};

int cmd_edpsam(const EdpSamArgs& a) {
    const io::RunConfig cfg = load_config(a.config);
    const Image img = io::image_from(io::read_tensor(a.image));
    const SuperpixelMap sp = slic_superpixels(img, cfg.slic);
    if (a.slic_only) {
        io::write_tensor(a.out, io::to_tensor(sp));
        if (!a.png.empty()) io::write_label_png(a.png, sp);
        std::cerr << "slic produced " << sp.ids().size() << " segments\n";
        return 0;
    }
    const PointSet pts = io::read_points(a.points, img.dims);
    CandidateMaskSet set{img.dims, {}};
    if (!a.candidates.empty()) {
        const LabelMap cand = io::label_map_from(io::read_tensor(a.candidates));
        if (cand.dims != img.dims) throw InputError("candidates dims differ from image dims");
        set = candidates_from_label_map(cand);
    }
    const InstanceLabelMap ann = build_annotation(pts, StaticCandidateProvider(std::move(set)), sp);
    io::write_tensor(a.out, io::to_tensor(ann));
    if (!a.png.empty()) io::write_label_png(a.png, ann);
    return 0;
}

struct EvalArgs {
    std::string pred, gt, out;
    bool by_id = false;
    double threshold = 0.5;
};

int cmd_eval(const EvalArgs& a) {
    const LabelMap pred = io::label_map_from(io::read_tensor(a.pred));
    const LabelMap gt = io::label_map_from(io::read_tensor(a.gt));
    if (pred.dims != gt.dims) throw InputError("pred dims differ from gt dims");
    MetricsReport report;
    report.seg = iou_f1(a.by_id ? match_by_id(pred, gt) : match_instances(pred, gt), a.threshold);
    const double pc = static_cast<double>(pred.ids().size()), gc = static_cast<double>(gt.ids().size());
    report.counts = counting_errors(std::span(&pc, 1), std::span(&gc, 1));
    emit_json(io::metrics_to_json(report), a.out);
    return 0;
}

struct DemoArgs {
    std::string config, out, png_dir;
    std::uint64_t seed = 0;
    bool bench = false;
    int bench_scenes = 3;
};

int cmd_demo(const DemoArgs& a) {
    const io::RunConfig cfg = load_config(a.config);
    const auto& d = cfg.demo;
    const SyntheticScene scene = synth_scene(d.instances, Dims{d.height, d.width}, d.min_separation, a.seed);
    OptimizeConfig oc;
    oc.steps = d.steps;
    oc.learning_rate = d.learning_rate;
    oc.channels = d.channels;
    oc.init_scale = d.init_scale;
    oc.seed = a.seed;
    oc.disc = cfg.disc;
    oc.energy = cfg.energy;

    const OptimizeResult opt = optimize_embedding(scene, oc);
    MetricsReport report = evaluate_field(scene, opt.field, oc);
    if (!a.png_dir.empty()) {
        fs::create_directories(a.png_dir);
        io::write_label_png(fs::path(a.png_dir) / "gt.png", scene.labels);
        io::write_label_png(fs::path(a.png_dir) / "segmentation.png", segment(opt.field, scene.points, oc.energy, oc.disc.kernel));
        io::write_field_png(fs::path(a.png_dir) / "embedding_norm.png",
                            embedding_norm(depthwise_gaussian_smooth(opt.field, oc.disc.kernel)));
    }
    if (a.bench) {
        const auto buckets = density_benchmark(Dims{768, 1024}, 16, {50, 200, 500, 1000}, a.bench_scenes, a.seed,
                                               oc.energy, oc.disc.kernel);
        report.timing = timing_harness(buckets);
    }
    nlohmann::json j = io::metrics_to_json(report);
    j["initial_loss"] = opt.history.front();
    j["final_loss"] = opt.history.back();
    emit_json(j, a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xmask: exclusivity-guided crowd instance segmentation toolkit"};
    app.require_subcommand(1);

    SegmentArgs seg;
    auto* s = app.add_subcommand("segment", "Segment instances from an embedding field and points");
    s->add_option("--fmap", seg.fmap, "Embedding field tensor (f32, D x H x W)")->required();
    s->add_option("--points", seg.points, "Points JSON")->required();
    s->add_option("--config", seg.config, "Run config JSON");
    s->add_option("--out", seg.out, "Output label map tensor (u32, H x W)")->required();
    s->add_option("--png", seg.png, "Optional PNG render of the label map");

    LossArgs loss;
    auto* l = app.add_subcommand("losses", "Evaluate the discriminative, background and foreground losses");
    l->add_option("--fmap", loss.fmap, "Raw embedding field tensor")->required();
    l->add_option("--points", loss.points, "Points JSON")->required();
    l->add_option("--labels", loss.labels, "Instance label map tensor")->required();
    l->add_option("--pred", loss.pred, "Prediction field tensor (f32, H x W) for the mask-constraint losses");
    l->add_option("--config", loss.config, "Run config JSON");
    l->add_option("--out", loss.out, "Write JSON here instead of stdout");
    l->add_flag("--gradcheck", loss.gradcheck, "Compare analytic gradients against central differences");
    l->add_option("--step", loss.h, "Finite-difference step")->check(CLI::PositiveNumber);

    EdpSamArgs edp;
    auto* e = app.add_subcommand("edpsam", "Build an annotation from points, candidate masks and NNEC disks");
    e->add_option("--image", edp.image, "Image tensor (f32, H x W x 3 in [0,1])")->required();
    e->add_option("--points", edp.points, "Points JSON");
    e->add_option("--candidates", edp.candidates, "Candidate label map tensor; each nonzero value is one mask");
    e->add_option("--config", edp.config, "Run config JSON");
    e->add_option("--out", edp.out, "Output label map tensor")->required();
    e->add_option("--png", edp.png, "Optional PNG render");
    e->add_flag("--slic-only", edp.slic_only, "Write the SLIC superpixel map instead");

    EvalArgs ev;
    auto* v = app.add_subcommand("eval", "Score a predicted label map against ground truth");
    v->add_option("--pred", ev.pred, "Predicted label map tensor")->required();
    v->add_option("--gt", ev.gt, "Ground-truth label map tensor")->required();
    v->add_option("--threshold", ev.threshold, "IoU threshold for a true positive");
    v->add_flag("--by-id", ev.by_id, "Pair instances by id instead of greedy IoU matching");
    v->add_option("--out", ev.out, "Write JSON here instead of stdout");

    DemoArgs demo;
    auto* dm = app.add_subcommand("demo", "Synthetic scene -> optimize embedding -> segment -> score");
    dm->add_option("--config", demo.config, "Run config JSON");
    dm->add_option("--seed", demo.seed, "Scene and initialization seed");
    dm->add_flag("--bench", demo.bench, "Also time segmentation on 1024x768 scenes bucketed by point count");
    dm->add_option("--bench-scenes", demo.bench_scenes, "Timed scenes per bucket")->check(CLI::PositiveNumber);
    dm->add_option("--png-dir", demo.png_dir, "Write gt/segmentation/embedding renders here");
    dm->add_option("--out", demo.out, "Write JSON here instead of stdout");

    auto* cfg = app.add_subcommand("config", "Print the default run config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return static_cast<int>(ErrorKind::Input);
    }

    try {
        if (*s) return cmd_segment(seg);
        if (*l) return cmd_losses(loss);
        if (*e) {
            if (!edp.slic_only && edp.points.empty()) throw InputError("--points is required unless --slic-only");
            return cmd_edpsam(edp);
        }
        if (*v) return cmd_eval(ev);
        if (*dm) return cmd_demo(demo);
        if (*cfg) {
            std::cout << io::config_to_json(io::RunConfig{}).dump(2) << "\n";
            return 0;
        }
    } catch (const Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
