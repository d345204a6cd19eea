#include "slideadapt/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "slideadapt/errors.hpp"
#include "slideadapt/rng.hpp"

namespace fs = std::filesystem;

namespace slideadapt {

GradeLabel gleason_to_grade(int score) {
    if (score < 6 || score > 10) throw InvalidInputError("gleason score out of range [6,10]: " + std::to_string(score));
    return score <= 7 ? GradeLabel::Low : GradeLabel::High;
}

double tissue_fraction(const Image& pixels) {
    if (pixels.empty()) throw InvalidInputError("tissue_fraction: empty image");
    std::int64_t tissue = 0;
    const std::int64_t total = static_cast<std::int64_t>(pixels.height) * pixels.width;
    for (int y = 0; y < pixels.height; ++y)
        for (int x = 0; x < pixels.width; ++x)
            if (luma(pixels.at(y, x, 0), pixels.at(y, x, 1), pixels.at(y, x, 2)) < kTissueLumaThreshold)
                ++tissue;
    return static_cast<double>(tissue) / static_cast<double>(total);
}

std::vector<Patch> extract_patches(const Image& slide_image, int patch_size, double min_tissue) {
    if (patch_size <= 0) throw InvalidInputError("extract_patches: patch_size must be positive");
    if (min_tissue < 0.0 || min_tissue > 1.0) throw InvalidInputError("extract_patches: min_tissue must be in [0,1]");
    std::vector<Patch> patches;
    if (slide_image.empty()) throw InvalidInputError("extract_patches: empty image");
    const int rows = slide_image.height / patch_size;
    const int cols = slide_image.width / patch_size;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Patch p;
            p.grid_row = r;
            p.grid_col = c;
            p.pixels = Image(patch_size, patch_size);
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        p.pixels.at(y, x, ch) = slide_image.at(r * patch_size + y, c * patch_size + x, ch);
            p.tissue_fraction = tissue_fraction(p.pixels);
            if (p.tissue_fraction >= min_tissue) patches.push_back(std::move(p));
        }
    }
    return patches;
}

DatasetSplit split_patient_disjoint(const std::vector<Slide>& slides, double ratio, std::uint64_t seed) {
    if (slides.empty()) throw InvalidInputError("split_patient_disjoint: no slides");
    if (ratio <= 0.0 || ratio >= 1.0) throw InvalidInputError("split_patient_disjoint: ratio must be in (0,1)");

    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < slides.size(); ++i) by_patient[slides[i].patient_id].push_back(i);
    if (by_patient.size() < 2)
        throw InvalidInputError("split_patient_disjoint: a single patient owns all slides (degenerate split)");

    std::vector<std::string> patients;
    patients.reserve(by_patient.size());
    for (const auto& [pid, _] : by_patient) patients.push_back(pid);

    Rng rng(seed);
    rng.shuffle(patients);

    const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(slides.size())));
    DatasetSplit split;
    split.ratio = ratio;
    split.seed = seed;
    std::size_t train_count = 0;
    for (const std::string& pid : patients) {
        const auto& owned = by_patient[pid];
        auto& dest = (train_count < target) ? split.train : split.test;
        if (&dest == &split.train) train_count += owned.size();
        for (std::size_t i : owned) dest.push_back(slides[i]);
    }
    if (split.train.empty() || split.test.empty())
        throw InvalidInputError("split_patient_disjoint: degenerate split (empty partition)");
    return split;
}

Tensor prepare_input(const Patch& patch, InputMode mode, std::uint64_t seed, int resize, int crop) {
    if (patch.pixels.empty()) throw InvalidInputError("prepare_input: empty patch image");
    if (crop > resize) throw InvalidInputError("prepare_input: crop larger than resize");
    const Image resized = resize_bilinear(patch.pixels, resize, resize);

    int off_y, off_x;
    bool flip = false;
    if (mode == InputMode::Train) {
        Rng rng(seed);
        off_y = static_cast<int>(rng.uniform_int(0, resize - crop));
        off_x = static_cast<int>(rng.uniform_int(0, resize - crop));
        flip = rng.bernoulli(0.5);
    } else {
        off_y = (resize - crop) / 2;
        off_x = (resize - crop) / 2;
    }

    Tensor out({3, crop, crop});
    for (int y = 0; y < crop; ++y) {
        for (int x = 0; x < crop; ++x) {
            const int sx = flip ? (crop - 1 - x) : x;
            for (int c = 0; c < 3; ++c) {
                const double v = resized.at(off_y + y, off_x + sx, c) / 255.0;
                out[(static_cast<std::int64_t>(c) * crop + y) * crop + x] = (v - 0.5) / 0.5;
            }
        }
    }
    return out;
}

namespace {

std::map<std::string, std::string> parse_record(const std::string& line, int lineno) {
    std::map<std::string, std::string> kv;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ParseError("manifest line " + std::to_string(lineno) + ": expected key=value, got '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

}  // namespace

void write_dataset(const std::string& root, const std::vector<Slide>& slides) {
    fs::create_directories(root);
    std::ofstream manifest(fs::path(root) / "manifest.txt");
    if (!manifest) throw DataError("cannot write manifest under " + root);
    for (const Slide& slide : slides) {
        manifest << "slide_id=" << slide.slide_id << " patient_id=" << slide.patient_id
                 << " gleason_score=" << (slide.gleason_score ? std::to_string(*slide.gleason_score) : "-")
                 << "\n";
        const fs::path dir = fs::path(root) / (slide.patient_id + "__" + slide.slide_id);
        fs::create_directories(dir);
        for (const Patch& p : slide.patches) {
            const std::string name = "r" + std::to_string(p.grid_row) + "_c" + std::to_string(p.grid_col) + ".png";
            write_png((dir / name).string(), p.pixels);
        }
    }
}

std::vector<Slide> load_dataset(const std::string& root, bool load_pixels) {
    const fs::path manifest_path = fs::path(root) / "manifest.txt";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw DataError("missing manifest: " + manifest_path.string());

    std::vector<Slide> slides;
    std::string line;
    int lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto kv = parse_record(line, lineno);
        Slide slide;
        auto require = [&](const char* key) {
            const auto it = kv.find(key);
            if (it == kv.end())
                throw ParseError("manifest line " + std::to_string(lineno) + ": missing " + key);
            return it->second;
        };
        slide.slide_id = require("slide_id");
        slide.patient_id = require("patient_id");
        const std::string score = require("gleason_score");
        if (score != "-") {
            slide.gleason_score = std::stoi(score);
            slide.grade = gleason_to_grade(*slide.gleason_score);
        }

        const fs::path dir = fs::path(root) / (slide.patient_id + "__" + slide.slide_id);
        if (!fs::is_directory(dir)) throw DataError("missing slide directory: " + dir.string());
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".png") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            Patch p;
            p.slide_id = slide.slide_id;
            const std::string stem = f.stem().string();  // r<row>_c<col>
            const auto underscore = stem.find('_');
            if (stem.size() < 4 || stem[0] != 'r' || underscore == std::string::npos || stem[underscore + 1] != 'c')
                throw ParseError("unexpected patch filename: " + f.string());
            p.grid_row = std::stoi(stem.substr(1, underscore - 1));
            p.grid_col = std::stoi(stem.substr(underscore + 2));
            if (load_pixels) {
                p.pixels = read_png(f.string());
                p.tissue_fraction = tissue_fraction(p.pixels);
            }
            slide.patches.push_back(std::move(p));
        }
        slides.push_back(std::move(slide));
    }
    if (slides.empty()) throw DataError("empty dataset manifest: " + manifest_path.string());
    return slides;
}

void write_split_manifest(const std::string& path, const DatasetSplit& split) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split manifest: " + path);
    for (const Slide& s : split.train) out << "slide_id=" << s.slide_id << " split=train\n";
    for (const Slide& s : split.test) out << "slide_id=" << s.slide_id << " split=test\n";
}

DatasetSplit load_split(const std::string& split_path, const std::vector<Slide>& slides) {
    std::ifstream in(split_path);
    if (!in) throw DataError("missing split manifest: " + split_path);
    std::map<std::string, std::string> assignment;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto kv = parse_record(line, lineno);
        const auto sid = kv.find("slide_id");
        const auto part = kv.find("split");
        if (sid == kv.end() || part == kv.end())
            throw ParseError("split manifest line " + std::to_string(lineno) + ": need slide_id and split");
        assignment[sid->second] = part->second;
    }
    DatasetSplit split;
    for (const Slide& s : slides) {
        const auto it = assignment.find(s.slide_id);
        if (it == assignment.end()) throw DataError("slide missing from split manifest: " + s.slide_id);
        if (it->second == "train")
            split.train.push_back(s);
        else if (it->second == "test")
            split.test.push_back(s);
        else
            throw ParseError("unknown split value for " + s.slide_id + ": " + it->second);
    }
    return split;
}

}  // namespace slideadapt
