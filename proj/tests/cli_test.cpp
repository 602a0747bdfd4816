#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"p2pinc-sim"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : storage) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = p2pinc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("p2pinc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, AnalyticLine) {
    const auto r = invoke({"analytic", "--b-total", "6", "--alpha", "1"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "d_lo=0.267949 d_hi=3.732051 b_c=4.0 stable_lambda=0.633975\n");
}

TEST_F(CliTest, AnalyticNoEquilibrium) {
    const auto r = invoke({"analytic", "--b-total", "3", "--alpha", "1"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "no equilibrium (b_total*alpha < 4)\n");
}

TEST_F(CliTest, AnalyticTwoPlayer) {
    const auto r = invoke({"analytic", "--b-total", "4.5", "--b12", "8", "--b21", "4.5"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("d_lo=0.500000 d_hi=2.000000"), std::string::npos);
    EXPECT_NE(r.out.find("two_player d1=4.158001 d2=3.325622"), std::string::npos);
}

TEST_F(CliTest, HelpListsFlagsWithDefaults) {
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.code, 0);
    for (const char* flag : {"--n", "--density", "--b-av", "--distribution", "--gamma-shape", "--benefit-stddev",
                             "--initial-mean", "--initial-stddev", "--seed", "--alpha", "--tolerance",
                             "--max-iterations", "--repeats", "--threads", "--alive-fraction", "--frozen-fraction",
                             "--frozen-value", "--bins", "--b-total", "--out", "--strict", "--config"}) {
        EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
    }
    EXPECT_NE(r.out.find("[1000]"), std::string::npos);
    EXPECT_NE(r.out.find("[1e-06]"), std::string::npos);
    EXPECT_NE(r.out.find("[10000]"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(invoke({"run", "--bogus", "1"}).code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"explode"}).code, 2);
}

TEST_F(CliTest, ValidationErrorsNameTheField) {
    auto r = invoke({"run", "--n", "abc"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("--n"), std::string::npos);
    r = invoke({"run", "--density", "2", "--out", path("x.csv")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("--density"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("x.csv")));
    r = invoke({"sweep", "--tolerance", "-1"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("--tolerance"), std::string::npos);
    EXPECT_EQ(invoke({"churn", "--alive-fraction", "0.5,1.5"}).code, 3);
    EXPECT_EQ(invoke({"analytic", "--b-total", "0"}).code, 3);
    EXPECT_EQ(invoke({"run", "--distribution", "cauchy"}).code, 3);
}

TEST_F(CliTest, UnwritableOutputIsRuntimeError) {
    const auto r = invoke({"run", "--n", "100", "--density", "0.1", "--out", path("missing/dir/eq.csv")});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("eq.csv"), std::string::npos);
}

TEST_F(CliTest, RunWritesPerPeerFileAndSummary) {
    const auto out = path("eq.csv");
    const auto r = invoke({"run", "--n", "1000", "--b-av", "6.0", "--density", "0.02", "--seed", "42", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("converged=true"), std::string::npos);
    const auto pos = r.out.find("mean=");
    ASSERT_NE(pos, std::string::npos);
    const double mean = std::stod(r.out.substr(pos + 5));
    EXPECT_NEAR(mean, 3.68, 0.05 * 3.68);
    const auto text = slurp(out);
    EXPECT_EQ(text.substr(0, text.find('\n')), "peer,status,initial,final,row_benefit");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1001);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
    const auto a = path("a.csv");
    const auto b = path("b.csv");
    ASSERT_EQ(invoke({"sweep", "--n", "200", "--b-av", "5,8", "--repeats", "2", "--out", a}).code, 0);
    ASSERT_EQ(invoke({"sweep", "--n", "200", "--b-av", "5,8", "--repeats", "2", "--out", b}).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
}

TEST_F(CliTest, ConfigFileWithOverride) {
    const auto cfg = path("run.cfg");
    {
        std::ofstream f(cfg);
        f << "# small instance\nn = 300\ndensity = 0.05\nb-av = 5.0\nseed=3\n";
    }
    auto r = invoke({"run", "--config", cfg, "--out", path("c.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("run n=300 "), std::string::npos);
    EXPECT_NE(r.out.find("seed=3 "), std::string::npos);
    r = invoke({"run", "--config", cfg, "--seed", "9", "--out", path("c.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("seed=9 "), std::string::npos);
}

TEST_F(CliTest, StrictNonConvergence) {
    const std::string common_out = path("s.csv");
    auto r = invoke({"run", "--n", "300", "--density", "0.05", "--max-iterations", "2", "--out", common_out});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("converged=false"), std::string::npos);
    r = invoke({"run", "--n", "300", "--density", "0.05", "--max-iterations", "2", "--strict", "--out", common_out});
    EXPECT_EQ(r.code, 4);
}

TEST_F(CliTest, GenerateThenRunFromFile) {
    const auto inst = path("inst.txt");
    ASSERT_EQ(invoke({"generate", "--n", "300", "--density", "0.05", "--seed", "5", "--out", inst}).code, 0);
    const auto from_file = invoke({"run", "--instance", inst, "--out", path("f.csv")});
    const auto direct = invoke({"run", "--n", "300", "--density", "0.05", "--seed", "5", "--out", path("d.csv")});
    ASSERT_EQ(from_file.code, 0) << from_file.err;
    ASSERT_EQ(direct.code, 0);
    EXPECT_EQ(slurp(path("f.csv")), slurp(path("d.csv")));
    EXPECT_EQ(invoke({"run", "--instance", path("nope.txt"), "--out", path("g.csv")}).code, 4);
}

TEST_F(CliTest, ExperimentCommands) {
    for (std::initializer_list<std::string> args :
         {std::initializer_list<std::string>{"churn", "--n", "200", "--b-av", "12", "--alive-fraction", "1,0.5",
                                             "--repeats", "1"},
          std::initializer_list<std::string>{"freeze", "--n", "200", "--frozen-fraction", "0,1", "--frozen-value",
                                             "2", "--repeats", "1"},
          std::initializer_list<std::string>{"convergence", "--n", "200", "--b-av", "5,8", "--repeats", "1"},
          std::initializer_list<std::string>{"hist", "--n", "200", "--bins", "5"}}) {
        std::vector<std::string> v(args);
        v.push_back("--out");
        v.push_back(path(v.front() + ".csv"));
        std::vector<const char*> argv{"p2pinc-sim"};
        for (const auto& a : v) {
            argv.push_back(a.c_str());
        }
        std::ostringstream out;
        std::ostringstream err;
        EXPECT_EQ(p2pinc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err), 0) << err.str();
        EXPECT_TRUE(out.str().rfind(v.front(), 0) == 0) << out.str();
        EXPECT_FALSE(slurp(path(v.front() + ".csv")).empty());
    }
}
