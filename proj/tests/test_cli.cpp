#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    json report() const { return json::parse(out); }
};

Outcome run(const std::string& args)
{
    std::string cmd = std::string(RESLAB_CLI_PATH) + " " + args + " 2>/dev/null";
    Outcome r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name)
{
    fs::path dir = fs::temp_directory_path() / "reslab_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::vector<std::string>& header)
{
    std::ifstream in(p);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            if (first) header.push_back(cell);
            else row.push_back(std::stod(cell));
        }
        if (!first) rows.push_back(row);
        first = false;
    }
    return rows;
}

} // namespace

TEST(Cli, ResonanceSampleWritesResonantRows)
{
    auto csv = scratch("quad.csv");
    Outcome r = run("resonance sample --law quadratic --d 2 --n 1000 --seed 42 --out " + csv.string());
    ASSERT_EQ(r.code, 0);
    std::vector<std::string> header;
    auto rows = read_csv(csv, header);
    ASSERT_EQ(rows.size(), 1000u);
    std::vector<std::string> want{"v_1", "v_2", "vstar_1", "vstar_2", "vp_1", "vp_2", "vpstar_1", "vpstar_2",
                                  "weight", "energy_residual"};
    EXPECT_EQ(header, want);
    double worst = 0.0;
    for (const auto& x : rows) {
        auto w = [&](int k) { return x[k] * x[k] + x[k + 1] * x[k + 1]; };
        double scale = w(0) + w(2) + w(4) + w(6);
        worst = std::max(worst, std::abs(w(0) + w(2) - w(4) - w(6)) / std::max(1.0, scale));
        EXPECT_NEAR(x[0] + x[2], x[4] + x[6], 1e-12);
        EXPECT_NEAR(x[1] + x[3], x[5] + x[7], 1e-12);
        EXPECT_GT(x[8], 0.0);
    }
    EXPECT_LE(worst, 1e-10);
    json s = r.report();
    EXPECT_LE(s["max_energy_residual"].get<double>(), 1e-10);
    EXPECT_TRUE(s.contains("rejection_rate"));
    EXPECT_EQ(s["config"]["seed"], 42);
}

TEST(Cli, ResonanceSampleIsByteIdenticalForSeed)
{
    auto a = scratch("rep_a.csv"), b = scratch("rep_b.csv");
    Outcome ra = run("resonance sample --law relativistic --n 300 --seed 7 --out " + a.string());
    Outcome rb = run("resonance sample --law relativistic --n 300 --seed 7 --out " + b.string());
    ASSERT_EQ(ra.code, 0);
    ASSERT_EQ(rb.code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    json ja = ra.report(), jb = rb.report();
    ja["config"].erase("out"), jb["config"].erase("out"), ja.erase("csv"), jb.erase("csv");
    EXPECT_EQ(ja.dump(), jb.dump());
}

TEST(Cli, ThreeWaveSampleColumns)
{
    auto csv = scratch("tri.csv");
    Outcome r = run("resonance sample --law quadratic --mode three-wave --n 100 --out " + csv.string());
    ASSERT_EQ(r.code, 0);
    std::vector<std::string> header;
    auto rows = read_csv(csv, header);
    EXPECT_EQ(rows.size(), 100u);
    std::vector<std::string> want{"v_1", "v_2", "vp_1", "vp_2", "vpp_1", "vpp_2", "weight", "energy_residual"};
    EXPECT_EQ(header, want);
    for (const auto& x : rows) {
        EXPECT_NEAR(x[0], x[2] + x[4], 1e-12);
        double e = x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3] - x[4] * x[4] - x[5] * x[5];
        EXPECT_LE(std::abs(e), 1e-10);
    }
}

TEST(Cli, ShearedLawFlagsTrivialManifold)
{
    Outcome r = run("resonance sample --law 'sheared:alpha=1,beta=1,h=exp(v1)' --n 300 --out " +
                scratch("sheared.csv").string());
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.report()["trivial_manifold"].get<bool>());
    Outcome q = run("resonance sample --law quadratic --n 300 --out " + scratch("q.csv").string());
    EXPECT_FALSE(q.report()["trivial_manifold"].get<bool>());
}

TEST(Cli, InvariantCheckVerdicts)
{
    Outcome pass = run("invariant check --law relativistic --d 3 --g '1+2*v1-v3+0.5*sqrt(1+dot(v,v))' --mode four-wave");
    EXPECT_EQ(pass.code, 0);
    json j = pass.report();
    EXPECT_EQ(j["verdict"], "pass");
    EXPECT_LE(j["residuals"]["four_wave_rms"].get<double>(), 1e-8);
    EXPECT_NEAR(j["fit"]["c"].get<double>(), 0.5, 1e-8);
    EXPECT_TRUE(j["gram"].is_object());

    Outcome fail = run("invariant check --law quadratic --g 'v1^2' --mode four-wave --no-gram");
    EXPECT_EQ(fail.code, 1);
    EXPECT_EQ(fail.report()["verdict"], "fail");

    Outcome rossby = run("invariant check --law rossby --mode three-wave --g "
                     "'arctan((v1*sqrt(3)+v2)/(v1^2+v2^2)) - arctan((-v1*sqrt(3)+v2)/(v1^2+v2^2))'");
    EXPECT_EQ(rossby.code, 0);
    EXPECT_EQ(rossby.report()["verdict"], "pass");
}

TEST(Cli, InvariantFit)
{
    Outcome r = run("invariant fit --law quadratic --g '2+3*v1-v2+0.5*dot(v,v)'");
    ASSERT_EQ(r.code, 0);
    json f = r.report()["fit"];
    EXPECT_NEAR(f["a"].get<double>(), 2.0, 1e-10);
    EXPECT_NEAR(f["b"][0].get<double>(), 3.0, 1e-10);
    EXPECT_NEAR(f["b"][1].get<double>(), -1.0, 1e-10);
    EXPECT_NEAR(f["c"].get<double>(), 0.5, 1e-10);

    Outcome bad = run("invariant fit --law quadratic --g 'exp(v1)'");
    EXPECT_NE(bad.code, 0);
    EXPECT_GT(bad.report()["fit"]["value_res"].get<double>(), 1e-2);
}

TEST(Cli, MalformedExpressionIsConfigError)
{
    std::string cmd = std::string(RESLAB_CLI_PATH) + " invariant fit --g '2+*v1' 2>&1 >/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    ASSERT_NE(p, nullptr);
    char buf[512] = {};
    std::size_t got = fread(buf, 1, sizeof buf - 1, p);
    int status = pclose(p);
    EXPECT_EQ(WEXITSTATUS(status), 2);
    EXPECT_NE(std::string(buf, got).find("at byte 2"), std::string::npos);
}

TEST(Cli, Degeneracy)
{
    Outcome q = run("degeneracy --law quadratic");
    EXPECT_EQ(q.code, 0);
    EXPECT_EQ(q.report()["verdict"], "nondegenerate");
    Outcome lin = run("degeneracy --law expr:v1");
    EXPECT_EQ(lin.code, 1);
    EXPECT_EQ(lin.report()["verdict"], "degenerate:dependent-gradients");
    Outcome grav = run("degeneracy --law gravity:C=1");
    EXPECT_EQ(grav.report()["verdict"], "nondegenerate");
}

TEST(Cli, Dissipation)
{
    Outcome eq = run("dissipation --law quadratic --f '1/(1+dot(v,v))' --n 500");
    EXPECT_EQ(eq.code, 0);
    json j = eq.report();
    EXPECT_EQ(j["verdict"], "zero");
    for (const char* key : {"operation", "law", "f", "W", "n_samples", "seed", "estimate", "stderr", "verdict"})
        EXPECT_TRUE(j.contains(key)) << key;

    Outcome pos = run("dissipation --law quadratic --f 'exp(0.3*v1-0.2*v2^2)' --n 1000");
    EXPECT_EQ(pos.code, 1);
    EXPECT_EQ(pos.report()["verdict"], "positive");

    EXPECT_EQ(run("dissipation --law quadratic --f 'v1' --n 100").code, 3);
    EXPECT_EQ(run("dissipation --law quadratic --mode three-wave --f '1/dot(v,v)' --n 500").code, 0);
}

TEST(Cli, OperatorEvaluation)
{
    Outcome qw = run("qw eval --law quadratic --f '1+v1^2' --at 1,0 --n 20000");
    EXPECT_EQ(qw.code, 1);
    EXPECT_EQ(qw.report()["operation"], "qw_apply");
    Outcome q3 = run("q3 eval --law quadratic --f '1/dot(v,v)' --at 1,0 --n 2000");
    EXPECT_EQ(q3.code, 0);
    EXPECT_EQ(run("qw eval --law quadratic --f 1 --at 1,0,0 --n 100").code, 2);
}

TEST(Cli, ConfigFile)
{
    auto cfg = scratch("cfg.json");
    std::ofstream(cfg) << R"({"law": "quadratic", "g": "v1", "n": 200, "seed": 3})";
    Outcome r = run("invariant check --no-gram --config " + cfg.string());
    EXPECT_EQ(r.code, 0);
    json j = r.report();
    EXPECT_EQ(j["config"]["n"], 200);
    EXPECT_EQ(j["config"]["g"], "v1");

    Outcome over = run("invariant check --no-gram --config " + cfg.string() + " --g 'v1^2'");
    EXPECT_EQ(over.code, 1);

    std::ofstream(cfg) << R"({"law": "quadratic", "bogus": 1})";
    EXPECT_EQ(run("degeneracy --config " + cfg.string()).code, 2);
    std::ofstream(cfg) << R"({"n": "many"})";
    EXPECT_EQ(run("degeneracy --config " + cfg.string()).code, 2);
}

TEST(Cli, ConfigErrors)
{
    EXPECT_EQ(run("degeneracy --law nosuchlaw").code, 2);
    EXPECT_EQ(run("degeneracy --d 4").code, 2);
    EXPECT_EQ(run("invariant check --mode five-wave --g v1").code, 2);
    EXPECT_EQ(run("resonance sample --n 10").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, ReportFileMatchesStdout)
{
    auto out = scratch("report.json");
    Outcome r = run("degeneracy --law quadratic --out " + out.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(slurp(out), r.out);
    EXPECT_FALSE(fs::exists(out.string() + ".tmp"));
}
