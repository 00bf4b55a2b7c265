#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Each test gets its own output root so runs never collide.
class Cli : public ::testing::Test {
protected:
    fs::path root;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root = fs::temp_directory_path() / (std::string("orlab-cli-") + info->name());
        fs::remove_all(root);
        fs::create_directories(root);
    }
    void TearDown() override { fs::remove_all(root); }

    int run(const std::string& args, const std::string& stdout_file = "") const {
        std::string cmd = "ORLAB_OUTDIR='" + root.string() + "' '" ORLAB_CLI_PATH "' " + args;
        cmd += " > '" + (stdout_file.empty() ? (root / "stdout.txt").string() : stdout_file) + "' 2> '" +
               (root / "stderr.txt").string() + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return slurp(root / "stdout.txt"); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(root / name) << text;
        return root / name;
    }
};

}  // namespace

TEST_F(Cli, AuditWso2Json) {
    ASSERT_EQ(run("audit --scheme wso2 --json"), 0);
    json j = json::parse(out());
    EXPECT_EQ(j["p"], 3);
    EXPECT_EQ(j["wso"], 2);
    EXPECT_TRUE(j["mismatches"].empty());
    EXPECT_TRUE(fs::exists(root / "audit" / "wso2" / "audit.json"));
    EXPECT_TRUE(fs::exists(root / "audit" / "wso2" / "manifest.json"));
}

TEST_F(Cli, AuditTable) {
    ASSERT_EQ(run("audit --scheme dirk3 --table"), 0);
    const std::string t = out();
    EXPECT_NE(t.find("stage order q         1"), std::string::npos);
    EXPECT_NE(t.find("weak stage order q~   1"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("audit --scheme rk45"), 2);
    EXPECT_EQ(run("audit --tableau " + write("bad.json", R"({"A":[["0.5"]],"b":["1"],"c":["0.7"]})").string()), 2);
    const auto liar = write("liar.json", R"({"name":"liar","A":[["1"]],"b":["1"],
        "declared":{"p":2,"q":1,"wso":1,"stiffly_accurate":true}})");
    EXPECT_EQ(run("audit --tableau " + liar.string()), 4);
    EXPECT_EQ(run("audit --scheme be --tableau " + liar.string()), 2);
    EXPECT_EQ(run("converge --problem nope --scheme dirk2"), 2);
    EXPECT_EQ(run("converge --problem heat --scheme dirk2 --dts 0.01,0.004"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, StiffCheck) { EXPECT_EQ(run("stiff --scheme wso2 --check"), 0); }

TEST_F(Cli, ConvergeHeatMbc3Check) {
    ASSERT_EQ(run("converge --problem heat --scheme dirk3 --policy mbc3 --check"), 0);
    const fs::path dir = root / "converge" / "heat-dirk3-mbc3-n2000";
    for (const char* f : {"report.csv", "summary.json", "plot.svg", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const std::string csv = slurp(dir / "report.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "problem,scheme,policy,quantity,region,dt,error,order_fit,residual");
}

TEST_F(Cli, ModalOutputs) {
    ASSERT_EQ(run("modal --scheme dirk3 --omega 15 --dt 1e-3"), 0);
    const fs::path dir = root / "modal" / "dirk3-w15-dt0.001-n2000";
    EXPECT_TRUE(fs::exists(dir / "modes.csv"));
    json s = json::parse(slurp(dir / "spectrum.json"));
    EXPECT_FALSE(s.empty());
}

TEST_F(Cli, LmmBdf3Check) { EXPECT_EQ(run("lmm --bdf 3 --problem heat --check"), 0); }

TEST_F(Cli, ReplayIsIdentical) {
    ASSERT_EQ(run("converge --problem heat --scheme wso2 --n 400 --label orig"), 0);
    ASSERT_EQ(run("replay " + (root / "converge" / "orig" / "manifest.json").string()), 0);
    const fs::path a = root / "converge" / "orig", b = root / "converge" / "orig-replay";
    EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
    EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST_F(Cli, ConfigFileAndFlagsWin) {
    const auto cfg = write("c.toml", "[converge]\nproblem = \"heat\"\nscheme = \"dirk2\"\nn = 300\nlabel = \"cfg\"\n");
    ASSERT_EQ(run("--config " + cfg.string() + " converge"), 0);
    EXPECT_EQ(json::parse(slurp(root / "converge" / "cfg" / "summary.json"))["n"], 300);
    ASSERT_EQ(run("--config " + cfg.string() + " converge --n 200 --label cfg2"), 0);
    EXPECT_EQ(json::parse(slurp(root / "converge" / "cfg2" / "summary.json"))["n"], 200);
}

TEST_F(Cli, WrittenTableauReloads) {
    ASSERT_TRUE(fs::exists(fs::path(ORLAB_SOURCE_DIR) / "CMakeLists.txt"));
    ASSERT_EQ(run("audit --scheme dirk2 --out " + root.string() + " --label custom"), 0);
    EXPECT_EQ(run("audit --tableau " + (root / "audit" / "custom" / "tableau.json").string() + " --json"), 0);
    EXPECT_EQ(json::parse(out())["p"], 2);
}
