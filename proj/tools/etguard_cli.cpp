// Command-line front end: extract | pretrain | update | detect | eval-rounds | synth.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "etguard/pipeline.hpp"

namespace pl = etguard::pipeline;
using etguard::RngState;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<pl::LabeledFlow> read_flows_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return pl::read_flows(in);
}

std::vector<std::string> split_modes(const std::string& text) {
    std::vector<std::string> modes;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) modes.push_back(part);
    }
    return modes;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"encrypted-traffic detection with incremental updates"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string config_path;
    uint64_t seed = 0;
    std::string mode;
    app.add_option("--config", config_path, "key=value configuration file")
        ->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    auto* mode_opt =
        app.add_option("--mode", mode, "update mode: etguard | etguard-v | full");

    auto load_config = [&]() {
        pl::PipelineConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            cfg = pl::parse_config(in);
        }
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (mode_opt->count() > 0) cfg.mode = mode;
        cfg.validate();
        return cfg;
    };

    // extract
    auto* extract = app.add_subcommand("extract", "packet log to per-flow records");
    std::string ex_input, ex_output, ex_format = "jsonl";
    extract->add_option("--input", ex_input, "packet log")->required()->check(CLI::ExistingFile);
    extract->add_option("--output", ex_output, "flow records out")->required();
    extract->add_option("--format", ex_format, "jsonl | pcap")
        ->check(CLI::IsMember({"jsonl", "pcap"}));

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "train extractor and detector on round 0");
    std::string pt_flows, pt_out;
    pretrain->add_option("--flows", pt_flows, "labeled flow records")
        ->required()
        ->check(CLI::ExistingFile);
    pretrain->add_option("--out", pt_out, "checkpoint out")->required();

    // update
    auto* update = app.add_subcommand("update", "one incremental round on new flows");
    std::string up_checkpoint, up_flows, up_out, up_loss_log;
    update->add_option("--checkpoint", up_checkpoint, "checkpoint in")
        ->required()
        ->check(CLI::ExistingFile);
    update->add_option("--flows", up_flows, "new labeled flow records")
        ->required()
        ->check(CLI::ExistingFile);
    update->add_option("--out", up_out, "checkpoint out")->required();
    update->add_option("--loss-log", up_loss_log, "per-step loss CSV out");

    // detect
    auto* detect = app.add_subcommand("detect", "label flows under a trained checkpoint");
    std::string dt_checkpoint, dt_flows, dt_report;
    detect->add_option("--checkpoint", dt_checkpoint, "checkpoint in")
        ->required()
        ->check(CLI::ExistingFile);
    detect->add_option("--flows", dt_flows, "flow records")->required()->check(CLI::ExistingFile);
    detect->add_option("--report", dt_report, "per-flow CSV out")->required();

    // eval-rounds
    auto* eval = app.add_subcommand("eval-rounds", "multi-round forgetting experiment");
    std::string ev_spec, ev_report, ev_steps, ev_modes = "etguard,etguard-v,full";
    eval->add_option("--spec", ev_spec, "family and round spec (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--report", ev_report, "metric table CSV out")->required();
    eval->add_option("--steps-log", ev_steps, "per-step loss CSV out");
    eval->add_option("--modes", ev_modes, "comma-separated mode list");

    // synth
    auto* synth = app.add_subcommand("synth", "generate labeled flows from a family spec");
    std::string sy_spec, sy_out;
    synth->add_option("--spec", sy_spec, "family spec (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out", sy_out, "flow records out")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*extract) {
            std::ifstream in(ex_input, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + ex_input);
            std::ofstream out(ex_output);
            if (!out) throw std::runtime_error("cannot open " + ex_output + " for writing");
            const auto format = ex_format == "pcap" ? etguard::ingest::LogFormat::PCAP
                                                    : etguard::ingest::LogFormat::JSONL;
            const auto summary = pl::cmd_extract(in, format, out);
            if (!out) throw std::runtime_error("write failed: " + ex_output);
            std::cout << "flows=" << summary.flows << " packets=" << summary.packets
                      << " skipped=" << summary.skipped
                      << " other_protocol=" << summary.other_protocol
                      << " fragments=" << summary.fragments
                      << " truncated=" << summary.truncated << '\n';
        } else if (*pretrain) {
            const auto cfg = load_config();
            const auto flows = read_flows_file(pt_flows);
            auto [state, report] = pl::pretrain_pipeline(cfg, flows);
            pl::save_checkpoint_file(pt_out, state);
            std::cout << std::setprecision(6) << "flows=" << flows.size()
                      << " ae_loss=" << report.ae_curve.back()
                      << " det_loss=" << report.det_curve.back() << " buffer=" << state.buffer.size()
                      << "/" << state.buffer.capacity() << " checkpoint=" << pt_out << '\n';
        } else if (*update) {
            auto state = pl::load_checkpoint_file(up_checkpoint);
            if (seed_opt->count() > 0) state.rng = RngState(seed);
            if (mode_opt->count() > 0) {
                pl::learn_mode(mode);
                state.cfg.mode = mode;
            }
            const auto flows = read_flows_file(up_flows);
            const auto logs = pl::update_pipeline(state, flows);
            pl::save_checkpoint_file(up_out, state);
            if (!up_loss_log.empty()) spill(up_loss_log, etguard::incremental::step_log_csv(logs));
            std::cout << std::setprecision(6) << "flows=" << flows.size()
                      << " mode=" << state.cfg.mode << " steps=" << logs.size()
                      << " final_loss=" << (logs.empty() ? 0.0 : logs.back().loss.total)
                      << " checkpoint=" << up_out << '\n';
        } else if (*detect) {
            auto state = pl::load_checkpoint_file(dt_checkpoint);
            const auto flows = read_flows_file(dt_flows);
            const auto preds = pl::predict_flows(state, flows);
            std::ostringstream report;
            report << "key,predicted,p_malicious\n" << std::setprecision(17);
            int64_t malicious = 0;
            for (size_t i = 0; i < flows.size(); ++i) {
                report << flows[i].key << ',' << preds[i].label << ','
                       << preds[i].probabilities.at(1) << '\n';
                malicious += preds[i].label;
            }
            spill(dt_report, report.str());
            std::cout << "flows=" << flows.size() << " malicious=" << malicious
                      << " benign=" << (static_cast<int64_t>(flows.size()) - malicious)
                      << " report=" << dt_report << '\n';
        } else if (*eval) {
            const auto cfg = load_config();
            const auto spec = pl::parse_round_spec(slurp(ev_spec));
            RngState data_rng(cfg.seed);
            const auto data = pl::build_round_dataset(spec, data_rng);
            const auto result = pl::eval_rounds(cfg, data, split_modes(ev_modes));
            spill(ev_report, pl::eval_report_csv(result.rows));
            if (!ev_steps.empty()) spill(ev_steps, pl::tagged_step_csv(result.steps));
            std::cout << "rounds=" << data.train.size() << " rows=" << result.rows.size()
                      << " steps=" << result.steps.size() << " report=" << ev_report << '\n';
        } else if (*synth) {
            const auto cfg = load_config();
            const auto spec = pl::parse_round_spec(slurp(sy_spec));
            bool has_benign = false, has_attack = false;
            for (const auto& fam : spec.families) {
                if (fam.flows > 0) (fam.label == 0 ? has_benign : has_attack) = true;
            }
            if (!has_benign || !has_attack) {
                throw std::invalid_argument(
                    "synth: spec needs a benign and an attack family with flows > 0");
            }
            RngState rng(cfg.seed);
            std::vector<pl::LabeledFlow> flows;
            for (const auto& fam : spec.families) {
                auto batch = pl::synth_family(fam, fam.flows, rng);
                flows.insert(flows.end(), std::make_move_iterator(batch.begin()),
                             std::make_move_iterator(batch.end()));
            }
            std::ostringstream out;
            pl::write_flows(out, flows);
            spill(sy_out, out.str());
            std::cout << "flows=" << flows.size() << " families=" << spec.families.size()
                      << " out=" << sy_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
