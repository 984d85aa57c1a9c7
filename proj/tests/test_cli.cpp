#include "mrf/cli.hpp"
#include "mrf/io.hpp"
#include "mrf/mrfa.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace mrf;
namespace fs = std::filesystem;

namespace {

const char *kSmallConfig = R"(# small pipeline for tests
schedule.d0 = 60
grid.t1_min_ms = 100
grid.t1_max_ms = 3000
grid.t1_step_ms = 100
grid.t2_min_ms = 20
grid.t2_max_ms = 500
grid.t2_step_ms = 20
subspace.d1 = 6
phantom.height = 24
phantom.width = 24
model.block_channels = 16,8
training.train_samples = 3
training.val_samples = 1
training.epochs = 2
training.batch_size = 2
)";

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path &root) {
    std::map<std::string, std::vector<std::uint8_t>> m;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename() != "bench.csv") {
            m[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
        }
    }
    return m;
}

class CliPipeline : public ::testing::Test {
protected:
    fs::path dir;
    std::string cfg;

    void SetUp() override {
        dir = testing_support::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        cfg = (dir / "run.cfg").string();
        std::ofstream(cfg) << kSmallConfig;
    }

    CliRun step(const std::string &out, std::vector<std::string> args, const std::string &seed = "1") {
        std::vector<std::string> full = {args[0], "--config", cfg, "--seed", seed, "--out", (dir / out).string()};
        full.insert(full.end(), args.begin() + 1, args.end());
        auto r = cli(full);
        EXPECT_EQ(r.code, 0) << r.err;
        return r;
    }

    std::string p(const std::string &name) const { return (dir / name).string(); }
};

} // namespace

TEST_F(CliPipeline, NoiselessChainRecoversGridTissuesExactly) {
    setenv("MRFCNN_UNDERSAMPLING_FRACTION", "1", 1);
    setenv("MRFCNN_UNDERSAMPLING_NOISE_SIGMA", "0", 1);
    step("dict", {"dict"});
    step("basis", {"basis", p("dict")});
    step("phantom", {"phantom", "--grid-tissues"}, "5");
    step("acq", {"acquire", p("phantom")}, "5");
    step("match", {"match", p("acq"), p("dict")});
    step("cmatch", {"match", p("acq"), p("dict"), "--basis", p("basis")});
    unsetenv("MRFCNN_UNDERSAMPLING_FRACTION");
    unsetenv("MRFCNN_UNDERSAMPLING_NOISE_SIGMA");
    const auto r = step("eval", {"eval", p("match"), p("phantom"), "--method", "dm_full"});
    EXPECT_NE(r.out.find("t1 mae 0 "), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("t2 mae 0 "), std::string::npos) << r.out;
    const auto m = load_maps(p("match"));
    const auto gt = load_maps(p("phantom"));
    for (std::size_t v = 0; v < gt.voxels(); ++v) {
        if (gt.mask[v]) {
            ASSERT_TRUE(m.mask[v]);
            EXPECT_EQ(m.t1_ms[v], gt.t1_ms[v]);
            EXPECT_EQ(m.t2_ms[v], gt.t2_ms[v]);
            EXPECT_NEAR(m.pd[v], gt.pd[v], 1e-9);
        }
    }
    EXPECT_TRUE(fs::exists(dir / "eval" / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "match" / "t1.png"));
    EXPECT_TRUE(fs::exists(dir / "match" / "config.txt"));
}

TEST_F(CliPipeline, EveryCommandIsReproducible) {
    auto run_all = [&](const std::string &tag) {
        step(tag + "/dict", {"dict"});
        step(tag + "/basis", {"basis", p(tag + "/dict")});
        step(tag + "/phantom", {"phantom"}, "3");
        step(tag + "/acq", {"acquire", p(tag + "/phantom")}, "4");
        step(tag + "/cacq", {"acquire", p(tag + "/phantom"), "--basis", p(tag + "/basis"), "--compress"}, "4");
        step(tag + "/match", {"match", p(tag + "/acq"), p(tag + "/dict")});
        step(tag + "/cmatch", {"match", p(tag + "/cacq"), p(tag + "/dict"), "--basis", p(tag + "/basis")});
        step(tag + "/ckpt", {"train", p(tag + "/basis")}, "6");
        step(tag + "/recon", {"recon", p(tag + "/acq"), p(tag + "/ckpt")});
        step(tag + "/eval", {"eval", p(tag + "/recon"), p(tag + "/phantom")});
        step(tag + "/bench", {"bench", p(tag + "/ckpt"), p(tag + "/dict"), "--size", "16", "--compressed-dm"});
    };
    run_all("a");
    run_all("b");
    const auto a = tree_bytes(dir / "a"), b = tree_bytes(dir / "b");
    ASSERT_EQ(a.size(), b.size());
    for (const auto &[name, bytes] : a) {
        ASSERT_TRUE(b.count(name)) << name;
        EXPECT_EQ(bytes, b.at(name)) << name;
    }
    std::ifstream csv(dir / "a" / "bench" / "bench.csv");
    std::string header, line;
    std::getline(csv, header);
    EXPECT_EQ(header, "method,H,W,d0,d1,atoms,seconds");
    std::vector<std::string> methods;
    while (std::getline(csv, line)) {
        methods.push_back(line.substr(0, line.find(',')));
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    }
    EXPECT_EQ(methods, (std::vector<std::string>{"network", "dm_full", "dm_compressed"}));
}

TEST_F(CliPipeline, FailuresExitNonzeroWithDiagnostic) {
    auto r = cli({"match", p("nope"), p("nada"), "--config", cfg, "--out", p("o")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    r = cli({"dict", "--config", p("missing.cfg"), "--out", p("o")});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
    std::ofstream(p("bad.cfg")) << "subspace.d1 = 0\n";
    r = cli({"dict", "--config", p("bad.cfg"), "--out", p("o")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("subspace.d1"), std::string::npos);
    r = cli({"frobnicate"});
    EXPECT_NE(r.code, 0);
    r = cli({});
    EXPECT_NE(r.code, 0);
}

TEST_F(CliPipeline, ExecutableRuns) {
    const std::string cmd = std::string(MRFCNN_EXE) + " dict --config " + cfg + " --out " + p("exe") + " > " +
                            p("exe.log") + " 2>&1";
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "exe" / "atoms.mrfa"));
    EXPECT_NE(std::system((std::string(MRFCNN_EXE) + " bogus > /dev/null 2>&1").c_str()), 0);
}
