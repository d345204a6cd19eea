#include "slideadapt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "slideadapt/checkpoint.hpp"
#include "slideadapt/errors.hpp"
#include "slideadapt/eval.hpp"
#include "slideadapt/hash.hpp"
#include "slideadapt/heatmap.hpp"
#include "slideadapt/image.hpp"
#include "slideadapt/losses.hpp"
#include "slideadapt/run_manifest.hpp"
#include "slideadapt/synth.hpp"
#include "slideadapt/training.hpp"

namespace fs = std::filesystem;

namespace slideadapt {

namespace {

void require_exists(const std::string& path) {
    if (!fs::exists(path)) throw DataError("missing input path: " + path);
}

// Deterministic 80/20-style split shared by train-source, adapt and
// evaluate --subset: same data, ratio and seed always produce the same
// partition.
DatasetSplit dataset_split(const std::vector<Slide>& slides, const TrainConfig& cfg) {
    return split_patient_disjoint(slides, cfg.split_ratio, cfg.seed);
}

std::string fmt_pct(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << 100.0 * v;
    return os.str();
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, const std::string& domain_name) {
    require_exists(config_path);
    const SynthConfig cfg = SynthConfig::load(config_path);
    const Domain domain = domain_name == "source" ? Domain::Source : Domain::Target;
    const std::vector<Slide> slides = generate_dataset(cfg, domain);
    write_dataset(out_dir, slides);

    RunManifest manifest("synth", cfg.seed);
    manifest.add_input(config_path);
    manifest.add_config_line("domain", domain_name);
    manifest.add_artifact((fs::path(out_dir) / "manifest.txt").string());
    manifest.write((fs::path(out_dir) / "run_manifest.txt").string());
    std::cout << "synth: wrote " << slides.size() << " slides to " << out_dir << "\n";
    return kExitOk;
}

int cmd_prepare(const std::string& data_dir, const std::string& out_path, double ratio, std::uint64_t seed) {
    require_exists(data_dir);
    const std::vector<Slide> slides = load_dataset(data_dir, /*load_pixels=*/false);
    const DatasetSplit split = split_patient_disjoint(slides, ratio, seed);
    write_split_manifest(out_path, split);

    RunManifest manifest("prepare", seed);
    manifest.add_input(data_dir);
    manifest.add_config_line("ratio", std::to_string(ratio));
    manifest.add_artifact(out_path);
    manifest.write(out_path + ".run_manifest.txt");
    std::cout << "prepare: " << split.train.size() << " train / " << split.test.size() << " test slides\n";
    return kExitOk;
}

int cmd_train_source(const std::string& data_dir, const std::string& config_path,
                     const std::string& out_ckpt, std::string log_path) {
    require_exists(data_dir);
    require_exists(config_path);
    const TrainConfig cfg = TrainConfig::load(config_path);
    const std::vector<Slide> slides = load_dataset(data_dir);
    const DatasetSplit split = dataset_split(slides, cfg);
    if (log_path.empty()) log_path = out_ckpt + ".log";

    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write training log: " + log_path);
    auto bundle = train_source(split, cfg, &log);
    log.close();
    save_checkpoint(out_ckpt, *bundle);
    write_split_manifest(out_ckpt + ".split", split);

    RunManifest manifest("train-source", cfg.seed);
    manifest.add_input(data_dir);
    manifest.add_input(config_path);
    manifest.add_config_text(cfg.to_text());
    manifest.add_artifact(out_ckpt);
    manifest.add_artifact(log_path);
    manifest.write(out_ckpt + ".run_manifest.txt");
    std::cout << "train-source: checkpoint written to " << out_ckpt << "\n";
    return kExitOk;
}

int cmd_adapt(const std::string& source_ckpt, const std::string& source_data,
              const std::string& target_data, const std::string& mode_name,
              const std::string& out_ckpt, const std::string& config_path,
              std::string log_path, const std::string& trace_path) {
    require_exists(source_ckpt);
    require_exists(source_data);
    require_exists(target_data);
    auto bundle = load_checkpoint(source_ckpt);
    if (!config_path.empty()) {
        require_exists(config_path);
        TrainConfig override_cfg = TrainConfig::load(config_path);
        if (override_cfg.arch != bundle->config.arch)
            throw ConfigError("adapt: architecture in --config does not match the checkpoint");
        bundle->config = override_cfg;
    }
    const TrainConfig& cfg = bundle->config;

    const std::vector<Slide> source_slides = load_dataset(source_data);
    const std::vector<Slide> target_slides = load_dataset(target_data);
    const DatasetSplit source_split = dataset_split(source_slides, cfg);
    const DatasetSplit target_split = dataset_split(target_slides, cfg);

    const AdaptMode mode = (mode_name == "adv") ? AdaptMode::AdvOnly : AdaptMode::AdvPlusSiamese;
    if (log_path.empty()) log_path = out_ckpt + ".log";
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write training log: " + log_path);

    std::vector<AdaptStepTrace> trace;
    adapt_target(*bundle, source_split.train, target_split.train, mode, &log,
                 trace_path.empty() ? nullptr : &trace);
    log.close();
    save_checkpoint(out_ckpt, *bundle);

    if (!trace_path.empty()) {
        std::ofstream tf(trace_path);
        for (const AdaptStepTrace& t : trace)
            tf << "iter=" << t.iteration << " phase=" << t.phase << " theta_s=" << hash_hex(t.hash_source)
               << " theta_t=" << hash_hex(t.hash_target) << " theta_d=" << hash_hex(t.hash_disc)
               << " theta_f=" << hash_hex(t.hash_head) << "\n";
    }

    RunManifest manifest("adapt", cfg.seed);
    manifest.add_input(source_ckpt);
    manifest.add_input(source_data);
    manifest.add_input(target_data);
    manifest.add_config_text(cfg.to_text());
    manifest.add_config_line("mode", mode_name);
    manifest.add_artifact(out_ckpt);
    manifest.add_artifact(log_path);
    manifest.write(out_ckpt + ".run_manifest.txt");
    std::cout << "adapt (" << mode_name << "): checkpoint written to " << out_ckpt << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_dir,
                 const std::string& mapper_name, const std::string& report_path,
                 const std::string& subset) {
    require_exists(ckpt_path);
    require_exists(data_dir);
    auto bundle = load_checkpoint(ckpt_path);
    std::vector<Slide> slides = load_dataset(data_dir);
    if (subset != "all") {
        DatasetSplit split = dataset_split(slides, bundle->config);
        slides = subset == "train" ? std::move(split.train) : std::move(split.test);
    }
    const WhichMapper which = mapper_name == "source" ? WhichMapper::Source : WhichMapper::Target;
    const EvalReport report = evaluate(*bundle, which, slides);
    write_eval_report(report_path, report);

    RunManifest manifest("evaluate", bundle->config.seed);
    manifest.add_input(ckpt_path);
    manifest.add_input(data_dir);
    manifest.add_config_line("mapper", mapper_name);
    manifest.add_config_line("subset", subset);
    manifest.add_artifact(report_path);
    manifest.write(report_path + ".run_manifest.txt");
    std::cout << "evaluate: patch accuracy " << fmt_pct(report.patch_accuracy) << "%, slide accuracy "
              << fmt_pct(report.slide_accuracy) << "% (" << slides.size() << " slides)\n";
    return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b, const std::string& out_path) {
    require_exists(path_a);
    require_exists(path_b);
    const EvalReport a = read_eval_report(path_a);
    const EvalReport b = read_eval_report(path_b);
    const McNemarResult r = compare_reports(a, b);

    std::ostringstream os;
    os.precision(17);
    os << "mcnemar b=" << r.b << " c=" << r.c << " p_value=" << r.p_value << "\n";
    std::cout << os.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write comparison: " + out_path);
        out << os.str();
        RunManifest manifest("compare", 0);
        manifest.add_input(path_a);
        manifest.add_input(path_b);
        manifest.add_artifact(out_path);
        manifest.write(out_path + ".run_manifest.txt");
    }
    return kExitOk;
}

// Assemble a slide thumbnail by shrinking each stored tile onto its grid cell.
Image slide_thumbnail(const Slide& slide, int cell_px) {
    int rows = 0, cols = 0;
    for (const Patch& p : slide.patches) {
        rows = std::max(rows, p.grid_row + 1);
        cols = std::max(cols, p.grid_col + 1);
    }
    Image thumb = Image::filled(rows * cell_px, cols * cell_px, 255, 255, 255);
    for (const Patch& p : slide.patches) {
        const Image small = resize_bilinear(p.pixels, cell_px, cell_px);
        for (int y = 0; y < cell_px; ++y)
            for (int x = 0; x < cell_px; ++x)
                for (int c = 0; c < 3; ++c)
                    thumb.at(p.grid_row * cell_px + y, p.grid_col * cell_px + x, c) = small.at(y, x, c);
    }
    return thumb;
}

int cmd_heatmap(const std::string& ckpt_path, const std::string& slide_dir, const std::string& out_path,
                double sigma, const std::string& mapper_name) {
    require_exists(ckpt_path);
    require_exists(slide_dir);
    auto bundle = load_checkpoint(ckpt_path);

    // A slide directory holds r<row>_c<col>.png tiles.
    Slide slide;
    slide.slide_id = fs::path(slide_dir).filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(slide_dir))
        if (entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no patch images in " + slide_dir);
    for (const fs::path& f : files) {
        Patch p;
        const std::string stem = f.stem().string();
        const auto underscore = stem.find('_');
        if (stem.size() < 4 || stem[0] != 'r' || underscore == std::string::npos)
            throw ParseError("unexpected patch filename: " + f.string());
        p.grid_row = std::stoi(stem.substr(1, underscore - 1));
        p.grid_col = std::stoi(stem.substr(underscore + 2));
        p.pixels = read_png(f.string());
        p.slide_id = slide.slide_id;
        slide.patches.push_back(std::move(p));
    }

    const WhichMapper which = mapper_name == "source" ? WhichMapper::Source : WhichMapper::Target;
    const auto probs = predict_patches(*bundle, which, {slide});
    const Image thumb = slide_thumbnail(slide, 48);
    const Heatmap hm = render_heatmap(slide, probs[0], thumb, sigma);
    write_png_rgba(out_path, hm.render_h, hm.render_w, hm.rendered_rgba);

    RunManifest manifest("heatmap", bundle->config.seed);
    manifest.add_input(ckpt_path);
    manifest.add_input(slide_dir);
    manifest.add_config_line("sigma", std::to_string(sigma));
    manifest.add_config_line("mapper", mapper_name);
    manifest.add_artifact(out_path);
    manifest.write(out_path + ".run_manifest.txt");
    std::cout << "heatmap: wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_report(const std::string& baseline_path, const std::string& adv_path,
               const std::string& adv_siamese_path, const std::vector<std::string>& log_paths,
               const std::string& out_path) {
    std::ostringstream os;
    os << "Accuracy (%)\n";
    auto add_row = [&](const std::string& name, const std::string& path) {
        if (path.empty()) return;
        require_exists(path);
        const EvalReport r = read_eval_report(path);
        os << name << "\t" << fmt_pct(r.slide_accuracy) << "\n";
    };
    add_row("Baseline", baseline_path);
    add_row("adv-only", adv_path);
    add_row("adv+siamese", adv_siamese_path);

    for (const std::string& log_path : log_paths) {
        require_exists(log_path);
        std::ifstream in(log_path);
        std::string line;
        int steps = 0;
        LossReport last;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            last = LossReport::from_line(line);
            ++steps;
        }
        os << "log " << log_path << ": " << steps << " steps";
        if (last.l_c) os << ", final l_c=" << *last.l_c;
        if (last.l_a) os << ", final l_a=" << *last.l_a;
        if (last.l_t) os << ", final l_t=" << *last.l_t;
        os << "\n";
    }

    std::cout << os.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write report summary: " + out_path);
        out << os.str();
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Unsupervised adversarial domain adaptation for slide-level grade classification"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-domain slide dataset");
    std::string synth_config, synth_out, synth_domain;
    synth->add_option("--config", synth_config)->required();
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--domain", synth_domain)->required()->check(CLI::IsMember({"source", "target"}));

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Write a patient-disjoint split manifest");
    std::string prep_data, prep_out;
    double prep_ratio = 0.8;
    std::uint64_t prep_seed = 1;
    prepare->add_option("--data", prep_data)->required();
    prepare->add_option("--out", prep_out)->required();
    prepare->add_option("--ratio", prep_ratio);
    prepare->add_option("--seed", prep_seed);

    // train-source
    auto* train = app.add_subcommand("train-source", "Stage 1: supervised source training");
    std::string tr_data, tr_config, tr_out, tr_log;
    train->add_option("--data", tr_data)->required();
    train->add_option("--config", tr_config)->required();
    train->add_option("--out", tr_out)->required();
    train->add_option("--log", tr_log);

    // adapt
    auto* adapt = app.add_subcommand("adapt", "Stage 2: adversarial (+ Siamese) target adaptation");
    std::string ad_ckpt, ad_src, ad_tgt, ad_mode, ad_out, ad_config, ad_log, ad_trace;
    adapt->add_option("--source-ckpt", ad_ckpt)->required();
    adapt->add_option("--source-data", ad_src)->required();
    adapt->add_option("--target-data", ad_tgt)->required();
    adapt->add_option("--mode", ad_mode)->required()->check(CLI::IsMember({"adv", "adv+siamese"}));
    adapt->add_option("--out", ad_out)->required();
    adapt->add_option("--config", ad_config);
    adapt->add_option("--log", ad_log);
    adapt->add_option("--trace", ad_trace);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Patch/slide accuracy and confusion matrix");
    std::string ev_ckpt, ev_data, ev_mapper = "target", ev_report, ev_subset = "all";
    eval_cmd->add_option("--ckpt", ev_ckpt)->required();
    eval_cmd->add_option("--data", ev_data)->required();
    eval_cmd->add_option("--mapper", ev_mapper)->check(CLI::IsMember({"source", "target"}));
    eval_cmd->add_option("--report", ev_report)->required();
    eval_cmd->add_option("--subset", ev_subset)->check(CLI::IsMember({"all", "train", "test"}));

    // compare
    auto* compare = app.add_subcommand("compare", "McNemar test between two evaluation reports");
    std::string cmp_a, cmp_b, cmp_out;
    compare->add_option("--a", cmp_a)->required();
    compare->add_option("--b", cmp_b)->required();
    compare->add_option("--out", cmp_out);

    // heatmap
    auto* heat = app.add_subcommand("heatmap", "Render a smoothed probability overlay for one slide");
    std::string hm_ckpt, hm_slide, hm_out, hm_mapper = "target";
    double hm_sigma = 1.0;
    heat->add_option("--ckpt", hm_ckpt)->required();
    heat->add_option("--slide", hm_slide)->required();
    heat->add_option("--out", hm_out)->required();
    heat->add_option("--sigma", hm_sigma);
    heat->add_option("--mapper", hm_mapper)->check(CLI::IsMember({"source", "target"}));

    // report
    auto* report = app.add_subcommand("report", "Summarize evaluation reports and training logs");
    std::string rp_baseline, rp_adv, rp_advs, rp_out;
    std::vector<std::string> rp_logs;
    report->add_option("--baseline", rp_baseline);
    report->add_option("--adv", rp_adv);
    report->add_option("--adv-siamese", rp_advs);
    report->add_option("--log", rp_logs);
    report->add_option("--out", rp_out);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_domain);
        if (prepare->parsed()) return cmd_prepare(prep_data, prep_out, prep_ratio, prep_seed);
        if (train->parsed()) return cmd_train_source(tr_data, tr_config, tr_out, tr_log);
        if (adapt->parsed())
            return cmd_adapt(ad_ckpt, ad_src, ad_tgt, ad_mode, ad_out, ad_config, ad_log, ad_trace);
        if (eval_cmd->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_mapper, ev_report, ev_subset);
        if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
        if (heat->parsed()) return cmd_heatmap(hm_ckpt, hm_slide, hm_out, hm_sigma, hm_mapper);
        if (report->parsed()) return cmd_report(rp_baseline, rp_adv, rp_advs, rp_logs, rp_out);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InvalidInputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SamplingError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}

}  // namespace slideadapt
