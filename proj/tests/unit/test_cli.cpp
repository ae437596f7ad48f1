#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rcamon/config.hpp"
#include "rcamon/simgen.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream f(p);
    std::size_t n = 0;
    for (std::string line; std::getline(f, line);) n += line.empty() ? 0 : 1;
    return n;
}

struct RunResult {
    int code = -1;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("rcamon_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    RunResult run(const std::string& args) const {
        const std::string cmd = std::string(RCAMON_CLI_PATH) + " " + args + " > " + path("stdout.txt").string() +
                                " 2> " + path("stderr.txt").string();
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(path("stdout.txt"));
        return r;
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream f(path(name));
        f << text;
    }

    // Single-mode scenario with the default block sizes (4, 2, 4).
    std::string write_scenario_file(const std::string& name, std::uint64_t seed, std::size_t samples) const {
        rcamon::ScenarioConfig sc;
        sc.seed = seed;
        sc.modes.push_back({{}, {}, samples});
        std::ofstream f(path(name));
        rcamon::write_scenario(f, sc);
        return path(name).string();
    }

    std::string write_run_config(const std::string& name) const {
        write(name, "block1 = 0,1,2,3\nblock2 = 4,5\nblock3 = 6,7,8,9\n");
        return path(name).string();
    }

    fs::path dir_;
};

TEST_F(Cli, SimulateWritesDataAndLabels) {
    const std::string sc = write_scenario_file("sc.ini", 1, 400);
    const RunResult r = run("simulate --scenario " + sc + " --out " + path("d.csv").string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(count_lines(path("d.csv")), 401u);
    EXPECT_EQ(count_lines(path("d.csv.labels.csv")), 401u);

    ASSERT_EQ(run("simulate --scenario " + sc + " --out " + path("e.csv").string() + " --labels " +
                  path("e_labels.csv").string()).code,
              0);
    EXPECT_EQ(slurp(path("d.csv")), slurp(path("e.csv")));
    EXPECT_EQ(slurp(path("d.csv.labels.csv")), slurp(path("e_labels.csv")));
}

TEST_F(Cli, InputErrorsExitTwo) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("simulate --scenario " + path("missing.ini").string() + " --out " + path("d.csv").string()).code,
              2);
    write("bad.ini", "durations = 100\nunknown_key = 1\n");
    EXPECT_EQ(run("simulate --scenario " + path("bad.ini").string() + " --out " + path("d.csv").string()).code, 2);
    EXPECT_EQ(run("train --data " + path("missing.csv").string() + " --config " + write_run_config("run.ini") +
                  " --model " + path("m.json").string()).code,
              2);
}

TEST_F(Cli, TrainReportsTheModelAndIsReproducible) {
    const std::string sc = write_scenario_file("sc.ini", 2, 1000);
    ASSERT_EQ(run("simulate --scenario " + sc + " --out " + path("d.csv").string()).code, 0);
    const std::string cfg = write_run_config("run.ini");
    const std::string base = "train --data " + path("d.csv").string() + " --config " + cfg + " --model ";
    const RunResult r = run(base + path("m1.json").string());
    ASSERT_EQ(r.code, 0);
    const json summary = json::parse(r.out);
    EXPECT_EQ(summary.at("samples").get<int>(), 1000);
    // Four block-1 variables driven by one common trend.
    EXPECT_EQ(summary.at("r").get<int>(), 3);
    EXPECT_GT(summary.at("thresholds").at("spe").get<double>(), 0.0);

    ASSERT_EQ(run(base + path("m2.json").string()).code, 0);
    EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));

    EXPECT_EQ(run(base + path("m3.json").string() + " --rows 20000").code, 2);
    EXPECT_EQ(run(base + path("m3.json").string() + " --rows 50").code, 2);
}

TEST_F(Cli, IndependentWalksExitThree) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    double a = 0, b = 0;
    std::ofstream f(path("walks.csv"));
    f << "a,b,c\n";
    for (int i = 0; i < 800; ++i) {
        a += nd(rng);
        b += nd(rng);
        f << a << ',' << b << ',' << nd(rng) << '\n';
    }
    f.close();
    write("run.ini", "block1 = 0,1\nblock3 = 2\n");
    const RunResult r = run("train --data " + path("walks.csv").string() + " --config " + path("run.ini").string() +
                            " --model " + path("m.json").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_FALSE(fs::exists(path("m.json")));
}

class CliTrained : public Cli {
protected:
    void SetUp() override {
        Cli::SetUp();
        const std::string sc = write_scenario_file("sc.ini", 3, 1600);
        ASSERT_EQ(run("simulate --scenario " + sc + " --out " + path("d.csv").string()).code, 0);
        ASSERT_EQ(run("train --data " + path("d.csv").string() + " --config " + write_run_config("run.ini") +
                      " --model " + path("m.json").string() + " --rows 1000").code,
                  0);
    }

    RunResult monitor(const std::string& data, const std::string& extra = "") const {
        return run("monitor --data " + data + " --model " + path("m.json").string() + " --trace " +
                   path("trace.csv").string() + " " + extra);
    }
};

TEST_F(CliTrained, MonitorCleanDataExitsZero) {
    const RunResult r = monitor(path("d.csv").string(), "--skip 1000");
    ASSERT_EQ(r.code, 0);
    const json summary = json::parse(r.out);
    EXPECT_EQ(summary.at("samples").get<int>(), 600);
    EXPECT_LE(summary.at("alarms").get<double>() / 600.0, 0.05);
    EXPECT_EQ(count_lines(path("trace.csv")), 601u);
    EXPECT_EQ(slurp(path("trace.csv")).rfind("index,t2f,t2e,t2,spe,", 0), 0u);
}

TEST_F(CliTrained, SensorFailureExitsFour) {
    // Heavy white sensor noise on every channel from sample 1450 on.
    const rcamon::DataMatrix clean = rcamon::read_csv(path("d.csv").string());
    rcamon::DataMatrix broken = clean;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(0.0, 10.0);
    for (Eigen::Index i = 1450; i < broken.samples(); ++i) {
        for (Eigen::Index j = 0; j < broken.variables(); ++j) broken.values(i, j) += nd(rng);
    }
    rcamon::write_csv(path("broken.csv").string(), broken);
    const RunResult full = monitor(path("broken.csv").string(), "--skip 1000");
    const std::string final_status = json::parse(full.out).at("final_status").get<std::string>();
    EXPECT_EQ(full.code, final_status == "Fault" ? 4 : 0);

    // Cut the stream right after the first Fault so that it ends in one.
    std::istringstream trace(slurp(path("trace.csv")));
    std::string line;
    std::getline(trace, line);
    Eigen::Index first_fault = -1;
    while (std::getline(trace, line)) {
        if (line.find(",Fault,") != std::string::npos) {
            first_fault = std::stol(line.substr(0, line.find(',')));
            break;
        }
    }
    ASSERT_GE(first_fault, 1450);
    rcamon::DataMatrix cut;
    cut.values = broken.values.topRows(first_fault + 1);
    rcamon::write_csv(path("cut.csv").string(), cut);
    const RunResult r = monitor(path("cut.csv").string(), "--skip 1000");
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(json::parse(r.out).at("final_status").get<std::string>(), "Fault");
}

TEST_F(CliTrained, MonitorRejectsBadInput) {
    std::string text = slurp(path("d.csv"));
    text.resize(text.rfind(','));
    write("truncated.csv", text);
    EXPECT_EQ(monitor(path("truncated.csv").string()).code, 2);
    write("narrow.csv", "a,b\n1,2\n3,4\n");
    EXPECT_EQ(monitor(path("narrow.csv").string()).code, 2);
    EXPECT_EQ(monitor(path("d.csv").string(), "--skip 99999").code, 2);
    write("garbage.json", "{}");
    EXPECT_EQ(run("monitor --data " + path("d.csv").string() + " --model " + path("garbage.json").string() +
                  " --trace " + path("t.csv").string()).code,
              2);
}

TEST_F(CliTrained, SavedStateResumesTheStream) {
    // Monitoring in two halves through --model-out matches one pass.
    ASSERT_EQ(monitor(path("d.csv").string(), "--skip 1000").code, 0);
    const std::string whole = slurp(path("trace.csv"));

    const rcamon::DataMatrix d = rcamon::read_csv(path("d.csv").string());
    rcamon::DataMatrix first, second;
    first.values = d.values.topRows(1300);
    second.values = d.values.bottomRows(300);
    rcamon::write_csv(path("first.csv").string(), first);
    rcamon::write_csv(path("second.csv").string(), second);
    ASSERT_EQ(run("monitor --data " + path("first.csv").string() + " --model " + path("m.json").string() +
                  " --skip 1000 --trace " + path("t1.csv").string() + " --model-out " + path("mid.json").string())
                  .code,
              0);
    ASSERT_EQ(run("monitor --data " + path("second.csv").string() + " --model " + path("mid.json").string() +
                  " --trace " + path("t2.csv").string())
                  .code,
              0);

    // Compare every column except the file-relative index.
    auto body = [](const std::string& text, std::size_t skip_lines) {
        std::istringstream in(text);
        std::vector<std::string> rows;
        std::size_t n = 0;
        for (std::string line; std::getline(in, line); ++n) {
            if (n < skip_lines) continue;
            rows.push_back(line.substr(line.find(',')));
        }
        return rows;
    };
    std::vector<std::string> halves = body(slurp(path("t1.csv")), 1);
    const std::vector<std::string> tail = body(slurp(path("t2.csv")), 1);
    halves.insert(halves.end(), tail.begin(), tail.end());
    EXPECT_EQ(halves, body(whole, 1));
}

class CliEvaluate : public Cli {
protected:
    // Trace with alarms on rows [alarm_from, n) and labels faulty on [onset, n).
    void write_case(std::size_t n, std::size_t onset, std::size_t alarm_from) const {
        std::ofstream t(path("trace.csv"));
        t << "index,t2f,t2e,t2,spe,t2f_lim,t2e_lim,t2_lim,spe_lim,status,mode_id\n";
        for (std::size_t i = 0; i < n; ++i) {
            t << i << ",0,0,0,0,1,1,1,1," << (i >= alarm_from ? "PotentialFault" : "Normal") << ",0\n";
        }
        std::vector<rcamon::SampleLabel> labels(n);
        for (std::size_t i = onset; i < n; ++i) labels[i].faulty = true;
        rcamon::write_labels(path("labels.csv").string(), labels);
    }

    json evaluate() const {
        const RunResult r =
            run("evaluate --trace " + path("trace.csv").string() + " --labels " + path("labels.csv").string());
        EXPECT_EQ(r.code, 0);
        return json::parse(r.out).at("overall");
    }
};

TEST_F(CliEvaluate, PerfectTrace) {
    write_case(200, 120, 120);
    const json m = evaluate();
    EXPECT_EQ(m.at("fdr").get<double>(), 1.0);
    EXPECT_EQ(m.at("far").get<double>(), 0.0);
    EXPECT_EQ(m.at("dd").get<int>(), 0);
    EXPECT_EQ(m.at("onset").get<int>(), 120);
}

TEST_F(CliEvaluate, LateAlarms) {
    write_case(200, 100, 125);
    const json m = evaluate();
    EXPECT_DOUBLE_EQ(m.at("fdr").get<double>(), 75.0 / 100.0);
    EXPECT_EQ(m.at("far").get<double>(), 0.0);
    EXPECT_EQ(m.at("dd").get<int>(), 25);
}

TEST_F(CliEvaluate, EarlyAlarmsCountAsFalse) {
    write_case(200, 100, 80);
    const json m = evaluate();
    EXPECT_EQ(m.at("fdr").get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(m.at("far").get<double>(), 20.0 / 100.0);
}

TEST_F(CliEvaluate, TraceLongerThanLabelsExitsTwo) {
    write_case(50, 10, 10);
    std::vector<rcamon::SampleLabel> shorter(20);
    rcamon::write_labels(path("labels.csv").string(), shorter);
    EXPECT_EQ(run("evaluate --trace " + path("trace.csv").string() + " --labels " + path("labels.csv").string()).code,
              2);
    write("not_a_trace.csv", "a,b\n1,2\n");
    EXPECT_EQ(
        run("evaluate --trace " + path("not_a_trace.csv").string() + " --labels " + path("labels.csv").string()).code,
        2);
}

}  // namespace
