// fishpose command-line tool: single-frame and clip length measurement,
// brute-force-search baseline, synthetic scene generator, histogram metrics.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fishpose/fishpose.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fishpose::Template load_template(const std::string& path, int stride) {
    const fishpose::BinaryMask m =
        path.empty() ? fishpose::make_default_template_mask() : fishpose::read_mask(path);
    return fishpose::build_template(m, stride);
}

fishpose::OptimizerConfig load_config(const std::string& path, unsigned seed) {
    fishpose::OptimizerConfig cfg;
    if (!path.empty()) cfg = fishpose::read_optimizer_config(path);
    cfg.seed = seed;
    return cfg;
}

json vec3_json(const fishpose::Vec3& v) { return json::array({v.x, v.y, v.z}); }
json vec2_json(const fishpose::Vec2& v) { return json::array({v.x, v.y}); }

json measurement_json(const fishpose::FrameMeasurement& m, const fishpose::CameraModel& cam) {
    json j;
    j["params"] = {{"s", m.relative.params.s},     {"kappa", m.relative.params.kappa},
                   {"tx", m.relative.params.tx},   {"ty", m.relative.params.ty},
                   {"alpha", m.relative.params.alpha}, {"beta", m.relative.params.beta},
                   {"gamma", m.relative.params.gamma}};
    j["relative"] = {{"h", vec3_json(m.relative.h)},
                     {"c", vec3_json(m.relative.c)},
                     {"t", vec3_json(m.relative.t)}};
    j["keypoints_2d"] = {{"h", vec2_json(m.relative.h2d)},
                         {"c", vec2_json(m.relative.c2d)},
                         {"t", vec2_json(m.relative.t2d)}};
    j["absolute"] = {{"H", vec3_json(m.absolute.H_abs)},
                     {"C", vec3_json(m.absolute.C_abs)},
                     {"T", vec3_json(m.absolute.T_abs)},
                     {"gaps", json::array({m.absolute.gap_head, m.absolute.gap_tail})},
                     {"low_confidence", m.absolute.low_confidence}};
    j["length_mm"] = m.absolute.length_mm;
    j["bend_ratio"] = m.absolute.bend_ratio;
    j["final_loss"] = m.relative.final_loss;
    j["homography"] = cam.H().m;  // echoed for audit
    return j;
}

std::vector<fs::path> list_masks(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw fishpose::InvalidInputError("no .pgm masks found in " + dir);
    }
    return files;
}

void write_text(const std::string& path, const std::string& text) {
    fishpose::write_file_bytes(path, text);
}

int run_estimate_frame(const std::string& mask_path, const std::string& calib_path,
                       const std::string& config_path, const std::string& template_path,
                       int stride, unsigned seed, const std::string& out_path) {
    const fishpose::BinaryMask mask = fishpose::read_mask(mask_path);
    const fishpose::Calibration calib = fishpose::read_calibration(calib_path);
    const fishpose::Template tpl = load_template(template_path, stride);
    const fishpose::OptimizerConfig cfg = load_config(config_path, seed);

    const fishpose::FrameMeasurement m = fishpose::measure_frame(mask, tpl, calib.cam, cfg);
    write_text(out_path, measurement_json(m, calib.cam).dump(2) + "\n");
    return 0;
}

int run_estimate_clip(const std::string& masks_dir, const std::string& calib_path,
                      const std::string& config_path, const std::string& template_path,
                      int stride, unsigned seed, const std::string& out_path) {
    const fishpose::Calibration calib = fishpose::read_calibration(calib_path);
    const fishpose::Template tpl = load_template(template_path, stride);
    const fishpose::OptimizerConfig cfg = load_config(config_path, seed);
    const std::vector<fs::path> files = list_masks(masks_dir);

    struct FrameRow {
        std::string file;
        bool ok = false;
        double length_mm = 0.0;
        double bend_ratio = 0.0;
        double final_loss = 0.0;
    };
    std::vector<FrameRow> rows(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        rows[i].file = files[i].filename().string();
        try {
            const fishpose::BinaryMask mask = fishpose::read_mask(files[i].string());
            const auto m = fishpose::measure_frame(mask, tpl, calib.cam, cfg);
            rows[i].ok = true;
            rows[i].length_mm = m.absolute.length_mm;
            rows[i].bend_ratio = m.absolute.bend_ratio;
            rows[i].final_loss = m.relative.final_loss;
        } catch (const fishpose::Error&) {
            rows[i].ok = false;  // row reported with empty length
        }
    }

    std::vector<double> lengths;
    for (const FrameRow& r : rows)
        if (r.ok) lengths.push_back(r.length_mm);
    if (lengths.empty()) {
        throw fishpose::InvalidInputError("no frame in " + masks_dir + " produced a measurement");
    }
    const fishpose::ClipEstimate clip = fishpose::aggregate_clip(lengths);

    std::string csv = "kind,index,file,length_mm,bend_ratio,final_loss,kept,n_kept,final_length_mm\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const FrameRow& r = rows[i];
        csv += "frame," + std::to_string(i) + "," + r.file + ",";
        if (r.ok) {
            const bool kept = clip.kept_mask[k++];
            csv += fishpose::format_double(r.length_mm) + "," +
                   fishpose::format_double(r.bend_ratio) + "," +
                   fishpose::format_double(r.final_loss) + "," + (kept ? "1" : "0");
        } else {
            csv += ",,,0";
        }
        csv += ",,\n";
    }
    csv += "clip,,,,,,," + std::to_string(clip.n_kept) + "," +
           fishpose::format_double(clip.final_length_mm) + "\n";
    write_text(out_path, csv);
    return 0;
}

int run_bfs_build(const std::string& template_path, int stride, const std::string& grid_path,
                  const std::string& out_dir) {
    const fishpose::Template tpl = load_template(template_path, stride);
    fishpose::GridSpec grid;
    if (!grid_path.empty()) grid = fishpose::read_grid_spec(grid_path);
    const fishpose::ProjectionDatabase db = fishpose::build_projection_database(tpl, grid);
    fishpose::save_projection_database(db, out_dir);
    std::cout << "database: " << db.entries.size() << " entries";
    if (db.skipped_overbend > 0) {
        std::cout << " (" << db.skipped_overbend << " over-bend grid points skipped)";
    }
    std::cout << "\n";
    return 0;
}

int run_bfs_estimate(const std::string& mask_path, const std::string& db_dir,
                     const std::string& calib_path, const std::string& template_path, int stride,
                     const std::string& out_path) {
    const fishpose::BinaryMask mask = fishpose::read_mask(mask_path);
    const fishpose::Calibration calib = fishpose::read_calibration(calib_path);
    const fishpose::Template tpl = load_template(template_path, stride);
    const fishpose::ProjectionDatabase db = fishpose::load_projection_database(db_dir);
    const fishpose::FrameMeasurement m = fishpose::measure_frame_bfs(mask, tpl, calib.cam, db);
    write_text(out_path, measurement_json(m, calib.cam).dump(2) + "\n");
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& template_path,
              const std::string& out_dir) {
    fishpose::SceneSpec spec = fishpose::read_scene_spec(spec_path);
    if (!template_path.empty()) spec.template_path = template_path;
    const fishpose::SyntheticScene scene = fishpose::render_synthetic(spec);

    fs::create_directories(out_dir);
    fishpose::write_mask((fs::path(out_dir) / "mask.pgm").string(), scene.mask);
    fishpose::write_calibration((fs::path(out_dir) / "calib.txt").string(), scene.cam,
                                spec.image_width, spec.image_height);
    json truth;
    truth["length_mm"] = scene.true_length_mm;
    truth["mm_per_template_px"] = scene.mm_per_template_px;
    truth["head_cam"] = vec3_json(scene.head_cam);
    truth["center_cam"] = vec3_json(scene.center_cam);
    truth["tail_cam"] = vec3_json(scene.tail_cam);
    truth["head_px"] = vec2_json(scene.head_px);
    truth["center_px"] = vec2_json(scene.center_px);
    truth["tail_px"] = vec2_json(scene.tail_px);
    truth["params"] = {{"s", scene.params.s},
                       {"kappa", scene.params.kappa},
                       {"alpha", scene.params.alpha},
                       {"beta", scene.params.beta},
                       {"gamma", scene.params.gamma}};
    write_text((fs::path(out_dir) / "truth.json").string(), truth.dump(2) + "\n");
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_path, double lo, double hi,
             int bins, const std::string& out_path) {
    const std::vector<double> pred = fishpose::read_lengths_csv(pred_path);
    const std::vector<double> gt = fishpose::read_lengths_csv(gt_path);
    const auto hp = fishpose::build_histogram(pred, lo, hi, static_cast<std::size_t>(bins));
    const auto hg = fishpose::build_histogram(gt, lo, hi, static_cast<std::size_t>(bins));
    const fishpose::HistogramMetrics m = fishpose::compare_histograms(hp, hg);
    const std::string csv = "bias_mm,emd_mm,rmsd,kl\n" + fishpose::format_double(m.bias_mm) + "," +
                            fishpose::format_double(m.emd_mm) + "," +
                            fishpose::format_double(m.rmsd) + "," + fishpose::format_double(m.kl) +
                            "\n";
    write_text(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-view fish pose and length measurement"};
    app.require_subcommand(1);

    std::string mask_path, calib_path, config_path, template_path, out_path, masks_dir, db_dir,
        spec_path, pred_path, gt_path, grid_path;
    int stride = 2;
    unsigned seed = 0;
    double lo = 500.0, hi = 1000.0;
    int bins = 20;

    auto* frame = app.add_subcommand("estimate-frame", "Measure one fish from one mask");
    frame->add_option("--mask", mask_path)->required();
    frame->add_option("--calib", calib_path)->required();
    frame->add_option("--config", config_path);
    frame->add_option("--template", template_path);
    frame->add_option("--stride", stride);
    frame->add_option("--seed", seed);
    frame->add_option("--out", out_path)->required();

    auto* clip = app.add_subcommand("estimate-clip", "Measure a clip of per-frame masks");
    clip->add_option("--masks", masks_dir)->required();
    clip->add_option("--calib", calib_path)->required();
    clip->add_option("--config", config_path);
    clip->add_option("--template", template_path);
    clip->add_option("--stride", stride);
    clip->add_option("--seed", seed);
    clip->add_option("--out", out_path)->required();

    auto* bfs_build = app.add_subcommand("bfs-build", "Precompute the projection database");
    bfs_build->add_option("--template", template_path);
    bfs_build->add_option("--stride", stride);
    bfs_build->add_option("--grid", grid_path);
    bfs_build->add_option("--out", out_path)->required();

    auto* bfs_est = app.add_subcommand("bfs-estimate", "Measure via brute-force search");
    bfs_est->add_option("--mask", mask_path)->required();
    bfs_est->add_option("--db", db_dir)->required();
    bfs_est->add_option("--calib", calib_path)->required();
    bfs_est->add_option("--template", template_path);
    bfs_est->add_option("--stride", stride);
    bfs_est->add_option("--out", out_path)->required();

    auto* synth = app.add_subcommand("synth", "Render a synthetic oracle scene");
    synth->add_option("--spec", spec_path)->required();
    synth->add_option("--template", template_path);
    synth->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "Histogram metrics between two length CSVs");
    eval->add_option("--pred", pred_path)->required();
    eval->add_option("--gt", gt_path)->required();
    eval->add_option("--lo", lo);
    eval->add_option("--hi", hi);
    eval->add_option("--bins", bins);
    eval->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (frame->parsed()) {
            return run_estimate_frame(mask_path, calib_path, config_path, template_path, stride,
                                      seed, out_path);
        }
        if (clip->parsed()) {
            return run_estimate_clip(masks_dir, calib_path, config_path, template_path, stride,
                                     seed, out_path);
        }
        if (bfs_build->parsed()) {
            return run_bfs_build(template_path, stride, grid_path, out_path);
        }
        if (bfs_est->parsed()) {
            return run_bfs_estimate(mask_path, db_dir, calib_path, template_path, stride,
                                    out_path);
        }
        if (synth->parsed()) {
            return run_synth(spec_path, template_path, out_path);
        }
        if (eval->parsed()) {
            return run_eval(pred_path, gt_path, lo, hi, bins, out_path);
        }
    } catch (const fishpose::DegenerateGeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fishpose::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
