#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "vesselseg/dataset_io.hpp"
#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"
#include "vesselseg/service.hpp"

namespace vesselseg {

namespace fs = std::filesystem;

namespace {

struct FrangiFlags {
    FrangiParams p;

    void attach(CLI::App& app, bool with_threshold) {
        app.add_option("--sigmas", p.sigmas, "Scales, comma separated")->delimiter(',')->capture_default_str();
        app.add_option("--beta", p.beta, "Blob suppression")->capture_default_str();
        app.add_option("--c", p.c, "Structure sensitivity, 8-bit units")->capture_default_str();
        app.add_option(with_threshold ? "--threshold" : "--frangi-threshold", p.threshold, "Vesselness threshold")
            ->capture_default_str();
    }
};

struct ConnectivityFlags {
    FrangiFlags frangi;
    ConnectivityParams p;
    std::string variant{to_string(p.variant)};
    std::string neighborhood{to_string(p.growth.neighborhood)};
    std::string reference{to_string(p.growth.reference)};
    std::optional<std::size_t> max_pixels;
    std::string cleanup = "none";
    std::string element = "square";
    int element_radius = 1;

    void attach(CLI::App& app) {
        frangi.attach(app, false);
        app.add_option("--seed-threshold", p.seed_threshold, "Vesselness needed to seed")->capture_default_str();
        app.add_option("--variant", variant, "Growth variant")
            ->check(CLI::IsMember({"immediate", "radial"}))
            ->capture_default_str();
        app.add_option("--tolerance", p.growth.tolerance, "Gray-level tolerance")->capture_default_str();
        app.add_option("--neighborhood", neighborhood, "Immediate neighborhood")
            ->check(CLI::IsMember({"4", "8"}))
            ->capture_default_str();
        app.add_option("--radius", p.growth.radius, "Radial variant radius")->capture_default_str();
        app.add_option("--reference", reference, "Acceptance reference")
            ->check(CLI::IsMember({"seed", "mean"}))
            ->capture_default_str();
        app.add_option("--max-pixels", max_pixels, "Region size cap (unbounded when omitted)");
        app.add_option("--cleanup", cleanup, "Morphological cleanup")
            ->check(CLI::IsMember({"none", "opening", "closing"}))
            ->capture_default_str();
        app.add_option("--element", element, "Cleanup element shape")
            ->check(CLI::IsMember({"square", "disk"}))
            ->capture_default_str();
        app.add_option("--element-radius", element_radius, "Cleanup element radius")->capture_default_str();
    }

    ConnectivityParams params() const {
        ConnectivityParams out = p;
        out.frangi = frangi.p;
        out.variant = parse_variant(variant);
        out.growth.neighborhood = parse_neighborhood(neighborhood);
        out.growth.reference = parse_reference(reference);
        out.growth.max_pixels = max_pixels;
        if (cleanup != "none") {
            out.cleanup = CleanupSpec{parse_cleanup_order(cleanup), StructuringElement(parse_element_shape(element), element_radius)};
        }
        out.validate();
        return out;
    }
};

struct FeatureFlags {
    FeatureConfig cfg;

    void attach(CLI::App& app) {
        app.add_option("--scales", cfg.scales, "Feature scales, comma separated")->delimiter(',')->capture_default_str();
        app.add_option("--window", cfg.window, "Local statistics window")->capture_default_str();
        app.add_flag("--coords", cfg.include_coordinates, "Append normalized coordinates");
    }
};

struct SamplingFlags {
    std::string kind = "all";
    std::size_t n = 0;
    std::uint64_t seed = 0;

    void attach(CLI::App& app) {
        app.add_option("--sampling", kind, "Pixel sampling")
            ->check(CLI::IsMember({"all", "balanced", "random"}))
            ->capture_default_str();
        app.add_option("--n", n, "Samples per class (balanced) or per image (random)")->capture_default_str();
        app.add_option("--seed", seed, "Sampling seed")->capture_default_str();
    }

    Sampling sampling() const { return {parse_sampling_kind(kind), n, seed}; }
};

struct ModelFlags {
    std::string type = "nb";
    ModelKind kind;

    void attach(CLI::App& app) {
        app.add_option("--model", type, "Classifier")
            ->check(CLI::IsMember({"nb", "gaussian_naive_bayes", "knn", "tree", "decision_tree"}))
            ->capture_default_str();
        app.add_option("--k", kind.k, "Neighbors (knn)")->capture_default_str();
        app.add_option("--max-depth", kind.max_depth, "Depth limit (tree)")->capture_default_str();
        app.add_option("--min-leaf", kind.min_leaf, "Samples per leaf (tree)")->capture_default_str();
    }

    ModelKind model_kind() const {
        ModelKind out = kind;
        out.type = parse_model_type(type);
        out.validate();
        return out;
    }
};

Dataset read_dataset(const fs::path& path) {
    return path.extension() == ".csv" ? import_csv(path) : import_arff(path);
}

void write_dataset(const Dataset& ds, const fs::path& path) {
    if (path.extension() == ".csv") {
        export_csv(ds, path);
    } else {
        export_arff(ds, path);
    }
}

const CLI::App* deepest_parsed(const CLI::App& app) {
    for (const CLI::App* sub : app.get_subcommands()) {
        if (sub->parsed()) return deepest_parsed(*sub);
    }
    return &app;
}

int serve(AppConfig cfg) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(std::move(cfg));
    const int port = service.start();
    std::cout << "listening on " << service.config().host_port().first << ":" << port << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retinal vessel segmentation toolkit", "vesselseg"};
    app.require_subcommand(1);

    // segment
    auto* segment = app.add_subcommand("segment", "Run a segmentation filter on an image");
    segment->require_subcommand(1);

    fs::path frangi_in, frangi_out, frangi_response;
    FrangiFlags frangi_flags;
    auto* seg_frangi = segment->add_subcommand("frangi", "Thresholded multi-scale vesselness");
    seg_frangi->add_option("--in", frangi_in, "Input image")->required()->check(CLI::ExistingFile);
    seg_frangi->add_option("--out", frangi_out, "Output mask (PNG)")->required();
    seg_frangi->add_option("--response", frangi_response, "Also write the vesselness response");
    frangi_flags.attach(*seg_frangi, true);

    fs::path conn_in, conn_out;
    ConnectivityFlags conn_flags;
    auto* seg_conn = segment->add_subcommand("connectivity", "Seeded region growing from vesselness seeds");
    seg_conn->add_option("--in", conn_in, "Input image")->required()->check(CLI::ExistingFile);
    seg_conn->add_option("--out", conn_out, "Output mask (PNG)")->required();
    conn_flags.attach(*seg_conn);

    // dataset
    auto* dataset = app.add_subcommand("dataset", "Labeled feature datasets");
    dataset->require_subcommand(1);
    std::vector<fs::path> ds_images, ds_truths, ds_projects;
    std::string ds_layer = "manual";
    fs::path ds_out;
    FeatureFlags ds_features;
    SamplingFlags ds_sampling;
    auto* ds_build = dataset->add_subcommand("build", "Extract features from labeled images or projects");
    ds_build->add_option("--image", ds_images, "Input image (repeatable, paired with --truth)")->check(CLI::ExistingFile);
    ds_build->add_option("--truth", ds_truths, "Ground-truth mask (repeatable)")->check(CLI::ExistingFile);
    ds_build->add_option("--project", ds_projects, "Project archive (repeatable)")->check(CLI::ExistingFile);
    ds_build->add_option("--layer", ds_layer, "Layer selector for projects")->capture_default_str();
    ds_build->add_option("--out", ds_out, "Output dataset (.arff or .csv)")->required();
    ds_features.attach(*ds_build);
    ds_sampling.attach(*ds_build);

    // train
    fs::path train_dataset, train_out;
    std::vector<fs::path> train_projects;
    std::string train_layer = "manual";
    ModelFlags train_model;
    FeatureFlags train_features;
    SamplingFlags train_sampling;
    auto* train_cmd = app.add_subcommand("train", "Train a pixel classifier");
    auto* train_src = train_cmd->add_option("--dataset", train_dataset, "Dataset (.arff or .csv)")->check(CLI::ExistingFile);
    train_cmd->add_option("--project", train_projects, "Train from project archives instead (repeatable)")
        ->check(CLI::ExistingFile)
        ->excludes(train_src);
    train_cmd->add_option("--layer", train_layer, "Layer selector for projects")->capture_default_str();
    train_cmd->add_option("--out", train_out, "Output model file")->required();
    train_model.attach(*train_cmd);
    train_features.attach(*train_cmd);
    train_sampling.attach(*train_cmd);

    // predict
    fs::path pred_model, pred_in, pred_out, pred_scores;
    double pred_threshold = kDefaultDecisionThreshold;
    auto* predict_cmd = app.add_subcommand("predict", "Segment an image with a trained model");
    predict_cmd->add_option("--model", pred_model, "Model file")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--in", pred_in, "Input image")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", pred_out, "Output mask (PNG)")->required();
    predict_cmd->add_option("--scores", pred_scores, "Also write vessel probabilities");
    predict_cmd->add_option("--threshold", pred_threshold, "Decision threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    // evaluate
    fs::path ev_pred, ev_truth, ev_model, ev_image, ev_dataset;
    double ev_threshold = kDefaultDecisionThreshold;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare a segmentation against ground truth");
    evaluate_cmd->add_option("--pred", ev_pred, "Predicted mask")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--truth", ev_truth, "Ground-truth mask")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--model", ev_model, "Model to evaluate instead of --pred")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--image", ev_image, "Image for --model")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--dataset", ev_dataset, "Dataset for --model")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--threshold", ev_threshold, "Decision threshold for --model")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    // project
    auto* project = app.add_subcommand("project", "Project archives");
    project->require_subcommand(1);
    fs::path pn_image, pn_out;
    std::string pn_name = "untitled";
    auto* project_new = project->add_subcommand("new", "Create a project from an image");
    project_new->add_option("--image", pn_image, "Base image")->required()->check(CLI::ExistingFile);
    project_new->add_option("--name", pn_name, "Project name")->capture_default_str();
    project_new->add_option("--out", pn_out, "Output archive")->required();

    fs::path pe_project, pe_out_dir, pe_out;
    std::string pe_layer;
    auto* project_export = project->add_subcommand("export", "Write the base image and layers as PNG files");
    project_export->add_option("--project", pe_project, "Project archive")->required()->check(CLI::ExistingFile);
    auto* pe_dir_opt = project_export->add_option("--out-dir", pe_out_dir, "Directory for every layer");
    auto* pe_out_opt = project_export->add_option("--out", pe_out, "Single mask file (with --layer)");
    project_export->add_option("--layer", pe_layer, "Layer selector for --out")->needs(pe_out_opt);
    pe_dir_opt->excludes(pe_out_opt);

    // serve
    fs::path sv_config, sv_storage, sv_static;
    std::string sv_listen;
    std::size_t sv_workers = 0;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", sv_config, "JSON config file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--storage", sv_storage, "Storage root");
    serve_cmd->add_option("--listen", sv_listen, "host:port");
    serve_cmd->add_option("--static", sv_static, "Directory of UI assets")->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--workers", sv_workers, "Job worker threads (0 = core count)");

    try {
        app.parse(argc, argv);
        if (ds_build->parsed()) {
            if (ds_images.size() != ds_truths.size()) throw CLI::ValidationError("--image and --truth must pair up");
            if (ds_images.empty() && ds_projects.empty()) throw CLI::ValidationError("give --image/--truth or --project");
        }
        if (train_cmd->parsed() && train_dataset.empty() && train_projects.empty()) {
            throw CLI::ValidationError("give --dataset or --project");
        }
        if (evaluate_cmd->parsed()) {
            const bool masks = !ev_pred.empty() && !ev_truth.empty() && ev_model.empty();
            const bool model_image = !ev_model.empty() && !ev_image.empty() && !ev_truth.empty();
            const bool model_dataset = !ev_model.empty() && !ev_dataset.empty() && ev_image.empty();
            if (!masks && !model_image && !model_dataset) {
                throw CLI::ValidationError("give --pred/--truth, --model/--image/--truth or --model/--dataset");
            }
        }
        if (project_export->parsed() && pe_out_dir.empty() && pe_out.empty()) {
            throw CLI::ValidationError("give --out-dir or --out");
        }
    } catch (const CLI::CallForHelp& e) {
        return deepest_parsed(app)->exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << deepest_parsed(app)->help();
        return 2;
    }

    try {
        if (seg_frangi->parsed()) {
            frangi_flags.p.validate();
            const RasterImage img = load_image(frangi_in);
            const VesselnessMap v = frangi_multiscale(green_channel(img), frangi_flags.p);
            const BinaryMask mask = threshold_map(v, frangi_flags.p.threshold);
            save_image(mask, frangi_out, ImageFormat::Png);
            if (!frangi_response.empty()) save_image(v.response, frangi_response, ImageFormat::Png);
            out << "vessel pixels: " << mask.count() << "\n";
        } else if (seg_conn->parsed()) {
            const ConnectivityParams params = conn_flags.params();
            const BinaryMask mask = connectivity_filter(load_image(conn_in), params);
            save_image(mask, conn_out, ImageFormat::Png);
            out << "vessel pixels: " << mask.count() << "\n";
        } else if (ds_build->parsed()) {
            ds_features.cfg.validate();
            std::vector<LabeledImage> images;
            for (std::size_t i = 0; i < ds_images.size(); ++i) {
                images.push_back({load_image(ds_images[i]), load_mask(ds_truths[i]), ds_images[i].stem().string()});
            }
            const LayerSelector selector = LayerSelector::parse(ds_layer);
            for (const fs::path& path : ds_projects) {
                const Project p = load_project(path);
                images.push_back({p.base_image, selector.select(p).mask, p.id});
            }
            const Dataset ds = build_dataset(images, ds_features.cfg, ds_sampling.sampling());
            write_dataset(ds, ds_out);
            out << "samples: " << ds.samples.size() << "\n";
        } else if (train_cmd->parsed()) {
            const ModelKind kind = train_model.model_kind();
            TrainedModel m;
            if (!train_projects.empty()) {
                train_features.cfg.validate();
                std::vector<Project> projects;
                for (const fs::path& path : train_projects) projects.push_back(load_project(path));
                m = retrain_from_projects(projects, LayerSelector::parse(train_layer), train_features.cfg, kind,
                                          train_sampling.sampling());
            } else {
                m = train(read_dataset(train_dataset), kind);
            }
            save_model(m, train_out);
            out << "trained " << to_string(m.kind.type) << " on " << (m.meta.samples[0] + m.meta.samples[1])
                << " samples\n";
        } else if (predict_cmd->parsed()) {
            const MaskPrediction pred = predict_mask(load_model(pred_model), load_image(pred_in), pred_threshold);
            save_image(pred.mask, pred_out, ImageFormat::Png);
            if (!pred_scores.empty()) save_image(pred.scores, pred_scores, ImageFormat::Png);
            out << "vessel pixels: " << pred.mask.count() << "\n";
        } else if (evaluate_cmd->parsed()) {
            EvalReport report;
            if (ev_model.empty()) {
                report = evaluate_masks(load_mask(ev_pred), load_mask(ev_truth));
            } else if (!ev_dataset.empty()) {
                report = evaluate_dataset(load_model(ev_model), read_dataset(ev_dataset), ev_threshold);
            } else {
                const LabeledImage pair{load_image(ev_image), load_mask(ev_truth), ev_image.stem().string()};
                report = evaluate(load_model(ev_model), std::span(&pair, 1), ev_threshold);
            }
            out << Json(report).dump(2) << "\n";
        } else if (project_new->parsed()) {
            const Project p = create_project(load_image(pn_image), pn_name);
            save_project(p, pn_out);
            out << p.id << "\n";
        } else if (project_export->parsed()) {
            const Project p = load_project(pe_project);
            if (!pe_out.empty()) {
                save_image(LayerSelector::parse(pe_layer.empty() ? "active" : pe_layer).select(p).mask, pe_out,
                           ImageFormat::Png);
            } else {
                fs::create_directories(pe_out_dir);
                save_image(p.base_image, pe_out_dir / "image.png", ImageFormat::Png);
                Json layers = Json::array();
                for (std::size_t i = 0; i < p.layers.size(); ++i) {
                    const std::string file = "layer_" + std::to_string(i) + ".png";
                    save_image(p.layers[i].mask, pe_out_dir / file, ImageFormat::Png);
                    layers.push_back({{"name", p.layers[i].name},
                                      {"file", file},
                                      {"provenance", provenance_json(p.layers[i].provenance)}});
                }
                const std::string summary =
                    Json{{"id", p.id}, {"name", p.name}, {"image", "image.png"}, {"layers", layers}}.dump(2) + "\n";
                write_file(pe_out_dir / "project.json",
                           std::span(reinterpret_cast<const std::uint8_t*>(summary.data()), summary.size()));
            }
        } else if (serve_cmd->parsed()) {
            AppConfig cfg = sv_config.empty() ? AppConfig{} : AppConfig::load(sv_config);
            cfg.apply_environment();
            if (!sv_storage.empty()) cfg.storage_root = sv_storage;
            if (!sv_listen.empty()) cfg.listen_address = sv_listen;
            if (!sv_static.empty()) cfg.static_root = sv_static;
            if (sv_workers > 0) cfg.workers = sv_workers;
            cfg.host_port();
            return serve(std::move(cfg));
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run_cli(int argc, char** argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace vesselseg
