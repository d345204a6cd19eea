#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "slideadapt/cli.hpp"
#include "slideadapt/eval.hpp"

using namespace slideadapt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& rel) const { return (path / rel).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream(path) << text;
}

const char* kSynthCfg =
    "n_slides_per_class = 3\n"
    "patches_per_slide_min = 2\n"
    "patches_per_slide_max = 3\n"
    "patch_size = 32\n"
    "seed = 5\n";

const char* kTrainCfg =
    "conv_channels = 2,2,2,2,2\n"
    "disc_hidden = 8\n"
    "batch_size = 4\n"
    "pair_batch_size = 4\n"
    "source_epochs = 1\n"
    "adapt_iterations = 1\n"
    "input_resize = 64\n"
    "input_crop = 56\n"
    "split_ratio = 0.67\n"
    "seed = 5\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli({}) == kExitUsage);
    CHECK(run_cli({"no-such-command"}) == kExitUsage);
    CHECK(run_cli({"synth"}) == kExitUsage);  // missing required options
    CHECK(run_cli({"synth", "--config", "x", "--out", "y", "--domain", "neither"}) == kExitUsage);
    CHECK(run_cli({"--help"}) == kExitOk);
}

TEST_CASE("missing inputs exit with code 3") {
    TempDir tmp("sa_cli_data_err");
    CHECK(run_cli({"synth", "--config", tmp.str("missing.cfg"), "--out", tmp.str("out"),
                   "--domain", "source"}) == kExitData);
    CHECK(run_cli({"evaluate", "--ckpt", tmp.str("no.ckpt"), "--data", tmp.str("no_data"),
                   "--report", tmp.str("r.txt")}) == kExitData);
}

TEST_CASE("malformed configs exit with code 5") {
    TempDir tmp("sa_cli_cfg_err");
    write_file(tmp.str("bad.cfg"), "patch_size = not_a_number\n");
    CHECK(run_cli({"synth", "--config", tmp.str("bad.cfg"), "--out", tmp.str("out"),
                   "--domain", "source"}) == kExitConfig);
    write_file(tmp.str("unknown.cfg"), "no_such_key = 1\n");
    CHECK(run_cli({"synth", "--config", tmp.str("unknown.cfg"), "--out", tmp.str("out"),
                   "--domain", "source"}) == kExitConfig);
}

TEST_CASE("full pipeline runs through the CLI") {
    TempDir tmp("sa_cli_pipeline");
    write_file(tmp.str("synth.cfg"), kSynthCfg);
    write_file(tmp.str("train.cfg"), kTrainCfg);

    REQUIRE(run_cli({"synth", "--config", tmp.str("synth.cfg"), "--out", tmp.str("src"),
                     "--domain", "source"}) == kExitOk);
    REQUIRE(run_cli({"synth", "--config", tmp.str("synth.cfg"), "--out", tmp.str("tgt"),
                     "--domain", "target"}) == kExitOk);
    CHECK(fs::exists(tmp.str("src/manifest.txt")));
    CHECK(fs::exists(tmp.str("src/run_manifest.txt")));

    REQUIRE(run_cli({"prepare", "--data", tmp.str("src"), "--out", tmp.str("split.txt"),
                     "--ratio", "0.67", "--seed", "5"}) == kExitOk);
    CHECK(fs::exists(tmp.str("split.txt")));

    REQUIRE(run_cli({"train-source", "--data", tmp.str("src"), "--config", tmp.str("train.cfg"),
                     "--out", tmp.str("src.ckpt")}) == kExitOk);
    CHECK(fs::exists(tmp.str("src.ckpt")));
    CHECK(fs::exists(tmp.str("src.ckpt.log")));
    CHECK(fs::exists(tmp.str("src.ckpt.run_manifest.txt")));

    REQUIRE(run_cli({"adapt", "--source-ckpt", tmp.str("src.ckpt"), "--source-data", tmp.str("src"),
                     "--target-data", tmp.str("tgt"), "--mode", "adv+siamese",
                     "--out", tmp.str("tgt.ckpt"), "--trace", tmp.str("trace.txt")}) == kExitOk);
    CHECK(fs::exists(tmp.str("tgt.ckpt")));
    CHECK(fs::exists(tmp.str("trace.txt")));

    REQUIRE(run_cli({"evaluate", "--ckpt", tmp.str("src.ckpt"), "--data", tmp.str("tgt"),
                     "--mapper", "source", "--report", tmp.str("base.rpt"),
                     "--subset", "test"}) == kExitOk);
    REQUIRE(run_cli({"evaluate", "--ckpt", tmp.str("tgt.ckpt"), "--data", tmp.str("tgt"),
                     "--mapper", "target", "--report", tmp.str("adapt.rpt"),
                     "--subset", "test"}) == kExitOk);
    const EvalReport base = read_eval_report(tmp.str("base.rpt"));
    CHECK(base.mapper == "source");
    CHECK(!base.predictions.empty());

    REQUIRE(run_cli({"compare", "--a", tmp.str("base.rpt"), "--b", tmp.str("adapt.rpt"),
                     "--out", tmp.str("cmp.txt")}) == kExitOk);
    CHECK(fs::exists(tmp.str("cmp.txt")));

    // the slide directory name is <patient>__<slide>; pick the first one
    std::string slide_dir;
    for (const auto& entry : fs::directory_iterator(tmp.str("tgt")))
        if (entry.is_directory()) {
            slide_dir = entry.path().string();
            break;
        }
    REQUIRE(run_cli({"heatmap", "--ckpt", tmp.str("tgt.ckpt"), "--slide", slide_dir,
                     "--out", tmp.str("hm.png")}) == kExitOk);
    CHECK(fs::exists(tmp.str("hm.png")));

    REQUIRE(run_cli({"report", "--baseline", tmp.str("base.rpt"), "--adv-siamese", tmp.str("adapt.rpt"),
                     "--log", tmp.str("tgt.ckpt.log"), "--out", tmp.str("summary.txt")}) == kExitOk);
    CHECK(fs::exists(tmp.str("summary.txt")));
}

TEST_CASE("identical invocations produce identical checkpoints") {
    TempDir tmp("sa_cli_determinism");
    write_file(tmp.str("synth.cfg"), kSynthCfg);
    write_file(tmp.str("train.cfg"), kTrainCfg);
    REQUIRE(run_cli({"synth", "--config", tmp.str("synth.cfg"), "--out", tmp.str("src"),
                     "--domain", "source"}) == kExitOk);
    REQUIRE(run_cli({"train-source", "--data", tmp.str("src"), "--config", tmp.str("train.cfg"),
                     "--out", tmp.str("a.ckpt")}) == kExitOk);
    REQUIRE(run_cli({"train-source", "--data", tmp.str("src"), "--config", tmp.str("train.cfg"),
                     "--out", tmp.str("b.ckpt")}) == kExitOk);
    std::ifstream a(tmp.str("a.ckpt"), std::ios::binary), b(tmp.str("b.ckpt"), std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
}

}  // TEST_SUITE
