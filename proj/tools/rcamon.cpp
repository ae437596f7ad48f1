#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcamon/config.hpp"
#include "rcamon/error.hpp"
#include "rcamon/ingest.hpp"
#include "rcamon/monitor.hpp"
#include "rcamon/pipeline.hpp"
#include "rcamon/serialize.hpp"
#include "rcamon/simgen.hpp"

namespace {

using namespace rcamon;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitNoCointegration = 3;
constexpr int kExitFault = 4;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidArgument:
        case ErrorCode::MalformedInput:
        case ErrorCode::SchemaMismatch:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::LengthMismatch:
        case ErrorCode::NonFiniteData:
        case ErrorCode::TooFewSamples:
            return kExitInput;
        case ErrorCode::NoCointegration:
            return kExitNoCointegration;
        default:
            return kExitFailure;
    }
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

DataMatrix rows_of(const DataMatrix& d, Eigen::Index begin, Eigen::Index count) {
    DataMatrix out;
    out.values = d.values.middleRows(begin, count);
    out.variable_names = d.variable_names;
    out.sample_interval_s = d.sample_interval_s;
    return out;
}

struct SimulateArgs {
    std::string scenario;
    std::string out;
    std::string labels;
};

int cmd_simulate(const SimulateArgs& a) {
    const ScenarioConfig sc = read_scenario(a.scenario);
    const Scenario s = generate(sc);
    write_csv(a.out, s.data);
    write_labels(a.labels.empty() ? a.out + ".labels.csv" : a.labels, s.labels);
    std::cerr << "wrote " << s.data.samples() << " samples of " << s.data.variables() << " variables\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string config;
    std::string model;
    std::size_t rows = 0;
};

int cmd_train(const TrainArgs& a) {
    const RunConfig rc = read_run_config(a.config);
    DataMatrix data = read_csv(a.data);
    if (a.rows > 0) {
        if (static_cast<Eigen::Index>(a.rows) > data.samples()) {
            throw Error(ErrorCode::InvalidArgument, "--rows exceeds the number of samples");
        }
        data = rows_of(data, 0, static_cast<Eigen::Index>(a.rows));
    }
    const PipelineState st = offline_train(data, rc.monitor);
    save_pipeline(a.model, st);

    json summary;
    summary["samples"] = data.samples();
    summary["p"] = st.rca.p;
    summary["r"] = st.rca.model.r;
    summary["trace_rank"] = st.trace_rank;
    summary["l"] = st.rpca.l;
    summary["thresholds"] = {{"t2f", st.thresholds.t2f},
                             {"t2e", st.thresholds.t2e},
                             {"t2", st.thresholds.t2},
                             {"spe", st.thresholds.spe},
                             {"quantile", st.thresholds.quantile}};
    std::cout << summary.dump(2) << '\n';
    return kExitOk;
}

struct MonitorArgs {
    std::string data;
    std::string model;
    std::string trace;
    std::string model_out;
    std::size_t skip = 0;
};

int cmd_monitor(const MonitorArgs& a) {
    PipelineState st = load_pipeline(a.model);
    const DataMatrix data = read_csv(a.data);
    if (data.variables() != st.variables) {
        throw Error(ErrorCode::SchemaMismatch, "data has " + std::to_string(data.variables()) +
                                                   " columns, model expects " + std::to_string(st.variables));
    }
    if (static_cast<Eigen::Index>(a.skip) > data.samples()) {
        throw Error(ErrorCode::InvalidArgument, "--skip exceeds the number of samples");
    }

    std::ofstream trace(a.trace);
    if (!trace) throw Error(ErrorCode::InvalidArgument, "cannot open " + a.trace + " for writing");
    trace << "index,t2f,t2e,t2,spe,t2f_lim,t2e_lim,t2_lim,spe_lim,status,mode_id\n";

    MonitorStatus last = MonitorStatus::Normal;
    std::size_t alarms = 0, steps = 0;
    for (Eigen::Index i = static_cast<Eigen::Index>(a.skip); i < data.samples(); ++i) {
        const StepResult res = online_step(st, data.values.row(i));
        const StatRecord& r = res.record;
        const Thresholds& t = res.thresholds;
        trace << i << ',' << fmt(r.t2f) << ',' << fmt(r.t2e) << ',' << fmt(r.t2) << ',' << fmt(r.spe) << ','
              << fmt(t.t2f) << ',' << fmt(t.t2e) << ',' << fmt(t.t2) << ',' << fmt(t.spe) << ','
              << to_string(res.status) << ',' << res.mode_id << '\n';
        last = res.status;
        alarms += is_alarm(res.status) ? 1 : 0;
        ++steps;
    }
    if (!trace) throw Error(ErrorCode::InvalidArgument, "failed writing " + a.trace);
    if (!a.model_out.empty()) save_pipeline(a.model_out, st);

    json summary;
    summary["samples"] = steps;
    summary["alarms"] = alarms;
    summary["final_status"] = std::string(to_string(last));
    summary["mode_id"] = st.mode_id;
    std::cout << summary.dump(2) << '\n';
    return last == MonitorStatus::Fault ? kExitFault : kExitOk;
}

struct TraceRow {
    std::size_t index = 0;
    MonitorStatus status = MonitorStatus::Normal;
};

std::vector<TraceRow> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("index,", 0) != 0) {
        throw Error(ErrorCode::SchemaMismatch, path + " is not a monitoring trace");
    }
    std::vector<TraceRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            fields.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (fields.size() != 11) {
            throw Error(ErrorCode::MalformedInput, "trace line " + std::to_string(lineno) + ": expected 11 fields");
        }
        TraceRow row;
        const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), row.index);
        if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
            throw Error(ErrorCode::MalformedInput, "trace line " + std::to_string(lineno) + ": bad index");
        }
        const auto status = parse_status(fields[9]);
        if (!status) throw Error(ErrorCode::MalformedInput, "trace line " + std::to_string(lineno) + ": bad status");
        row.status = *status;
        rows.push_back(row);
    }
    return rows;
}

json metrics_json(const SegmentMetrics& m) {
    json j;
    j["onset"] = m.onset;
    j["fdr"] = optional_json(m.fdr);
    j["far"] = optional_json(m.far);
    j["dd"] = m.dd ? json(*m.dd) : json(nullptr);
    return j;
}

struct EvaluateArgs {
    std::string trace;
    std::string labels;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const std::vector<TraceRow> trace = read_trace(a.trace);
    const std::vector<SampleLabel> labels = read_labels(a.labels);
    std::vector<bool> alarms, faulty;
    for (const TraceRow& row : trace) {
        if (row.index >= labels.size()) {
            throw Error(ErrorCode::LengthMismatch, "trace index " + std::to_string(row.index) + " has no label");
        }
        alarms.push_back(is_alarm(row.status));
        faulty.push_back(labels[row.index].faulty);
    }
    json out;
    out["overall"] = metrics_json(evaluate(alarms, faulty));
    json segs = json::array();
    for (const SegmentMetrics& m : evaluate_segments(alarms, faulty)) {
        json s = metrics_json(m);
        s["onset"] = trace[m.onset].index;
        segs.push_back(std::move(s));
    }
    out["segments"] = std::move(segs);
    if (out["overall"]["fdr"].is_null()) {
        out["overall"].erase("onset");
    } else {
        out["overall"]["onset"] = trace[evaluate(alarms, faulty).onset].index;
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming cointegration and PCA process monitor"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a labelled synthetic multimode dataset");
    simulate->add_option("--scenario", sim.scenario, "Scenario key-value file")->required();
    simulate->add_option("--out", sim.out, "Data CSV to write")->required();
    simulate->add_option("--labels", sim.labels, "Labels CSV to write (default <out>.labels.csv)");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Fit the monitoring pipeline on in-control data");
    train->add_option("--data", tr.data, "Training CSV")->required();
    train->add_option("--config", tr.config, "Run configuration key-value file")->required();
    train->add_option("--model", tr.model, "Model file to write")->required();
    train->add_option("--rows", tr.rows, "Use only the first N samples");

    MonitorArgs mon;
    auto* monitor = app.add_subcommand("monitor", "Stream samples through a trained pipeline");
    monitor->add_option("--data", mon.data, "CSV to monitor")->required();
    monitor->add_option("--model", mon.model, "Trained model file")->required();
    monitor->add_option("--trace", mon.trace, "Trace CSV to write")->required();
    monitor->add_option("--skip", mon.skip, "Skip the first N samples (e.g. the training prefix)");
    monitor->add_option("--model-out", mon.model_out, "Write the final pipeline state here");

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a trace against ground-truth labels");
    evaluate_cmd->add_option("--trace", ev.trace, "Trace CSV from monitor")->required();
    evaluate_cmd->add_option("--labels", ev.labels, "Labels CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*train) return cmd_train(tr);
        if (*monitor) return cmd_monitor(mon);
        if (*evaluate_cmd) return cmd_evaluate(ev);
    } catch (const Error& e) {
        std::cerr << "rcamon: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "rcamon: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
