#include "etguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "etguard/wire.hpp"

namespace etguard::pipeline {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int64_t to_int64(const std::string& key, const std::string& value) {
    size_t used = 0;
    int64_t out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + value);
    }
    if (used != value.size()) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + value);
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": " + value);
    }
    if (used != value.size() || !std::isfinite(out)) {
        throw std::invalid_argument("config: bad number for " + key + ": " + value);
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

} // namespace

void PipelineConfig::validate() const {
    if (head_packets != ingest::kHeadPackets) {
        throw std::invalid_argument("config: head_packets is fixed at " +
                                    std::to_string(ingest::kHeadPackets) + " by the ingest stage");
    }
    if (num_buckets != ingest::kNumBuckets) {
        throw std::invalid_argument("config: num_buckets is fixed at " +
                                    std::to_string(ingest::kNumBuckets) + " by the ingest stage");
    }
    ae_config().validate();
    det_config().validate();
    learn_config().validate();
    if (ae_epochs < 1) throw std::invalid_argument("config: ae_epochs must be >= 1");
    if (detector_epochs < 1) throw std::invalid_argument("config: detector_epochs must be >= 1");
    if (buffer_capacity < 0) throw std::invalid_argument("config: buffer_capacity must be >= 0");
}

features::AutoEncoderConfig PipelineConfig::ae_config() const {
    features::AutoEncoderConfig ae;
    ae.head_packets = head_packets;
    ae.num_buckets = num_buckets;
    ae.feature_dim = feature_dim;
    ae.hidden = hidden;
    ae.layers = layers;
    ae.recon_hidden = recon_hidden;
    return ae;
}

detection::DetectorConfig PipelineConfig::det_config() const {
    detection::DetectorConfig det;
    det.input_dim = feature_dim + 2;
    det.hidden1 = det_hidden1;
    det.hidden2 = det_hidden2;
    det.classes = 2;
    return det;
}

incremental::LearnConfig PipelineConfig::learn_config() const {
    incremental::LearnConfig lc;
    lc.alpha = alpha;
    lc.gamma = gamma;
    lc.lr = lr;
    lc.batch_size = batch_size;
    lc.epochs_per_round = epochs_per_round;
    lc.buffer_batch = buffer_batch;
    lc.mode = learn_mode(mode);
    return lc;
}

incremental::Mode learn_mode(const std::string& mode_name) {
    if (mode_name == "etguard") return incremental::Mode::kFullLoss;
    if (mode_name == "etguard-v") return incremental::Mode::kFinetuneOnly;
    if (mode_name == "full") return incremental::Mode::kJoint;
    throw std::invalid_argument("config: unknown mode '" + mode_name +
                                "' (expected etguard, etguard-v, or full)");
}

PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key == "head_packets") cfg.head_packets = static_cast<int>(to_int64(key, value));
        else if (key == "num_buckets") cfg.num_buckets = static_cast<int>(to_int64(key, value));
        else if (key == "feature_dim") cfg.feature_dim = static_cast<int>(to_int64(key, value));
        else if (key == "hidden") cfg.hidden = static_cast<int>(to_int64(key, value));
        else if (key == "layers") cfg.layers = static_cast<int>(to_int64(key, value));
        else if (key == "recon_hidden") cfg.recon_hidden = static_cast<int>(to_int64(key, value));
        else if (key == "det_hidden1") cfg.det_hidden1 = static_cast<int>(to_int64(key, value));
        else if (key == "det_hidden2") cfg.det_hidden2 = static_cast<int>(to_int64(key, value));
        else if (key == "lr") cfg.lr = to_double(key, value);
        else if (key == "batch_size") cfg.batch_size = to_int64(key, value);
        else if (key == "ae_epochs") cfg.ae_epochs = to_int64(key, value);
        else if (key == "detector_epochs") cfg.detector_epochs = to_int64(key, value);
        else if (key == "epochs_per_round") cfg.epochs_per_round = to_int64(key, value);
        else if (key == "alpha") cfg.alpha = to_double(key, value);
        else if (key == "gamma") cfg.gamma = to_double(key, value);
        else if (key == "buffer_capacity") cfg.buffer_capacity = to_int64(key, value);
        else if (key == "buffer_batch") cfg.buffer_batch = to_int64(key, value);
        else if (key == "seed") cfg.seed = static_cast<uint64_t>(to_int64(key, value));
        else if (key == "mode") cfg.mode = value;
        else {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

PipelineConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string serialize_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "head_packets=" << cfg.head_packets << '\n'
        << "num_buckets=" << cfg.num_buckets << '\n'
        << "feature_dim=" << cfg.feature_dim << '\n'
        << "hidden=" << cfg.hidden << '\n'
        << "layers=" << cfg.layers << '\n'
        << "recon_hidden=" << cfg.recon_hidden << '\n'
        << "det_hidden1=" << cfg.det_hidden1 << '\n'
        << "det_hidden2=" << cfg.det_hidden2 << '\n'
        << "lr=" << fmt(cfg.lr) << '\n'
        << "batch_size=" << cfg.batch_size << '\n'
        << "ae_epochs=" << cfg.ae_epochs << '\n'
        << "detector_epochs=" << cfg.detector_epochs << '\n'
        << "epochs_per_round=" << cfg.epochs_per_round << '\n'
        << "alpha=" << fmt(cfg.alpha) << '\n'
        << "gamma=" << fmt(cfg.gamma) << '\n'
        << "buffer_capacity=" << cfg.buffer_capacity << '\n'
        << "buffer_batch=" << cfg.buffer_batch << '\n'
        << "seed=" << cfg.seed << '\n'
        << "mode=" << cfg.mode << '\n';
    return out.str();
}

void write_flows(std::ostream& out, const std::vector<LabeledFlow>& flows) {
    for (const auto& f : flows) {
        ordered_json o;
        o["key"] = f.key;
        o["label"] = f.label;
        o["family"] = f.family;
        o["lengths"] = f.raw.lengths;
        o["duration"] = f.raw.duration;
        o["mean_gap"] = f.raw.mean_interval;
        out << o.dump() << '\n';
    }
}

std::vector<LabeledFlow> read_flows(std::istream& in) {
    std::vector<LabeledFlow> flows;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string where = "flows line " + std::to_string(lineno) + ": ";
        ordered_json o;
        try {
            o = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(where + e.what());
        }
        LabeledFlow f;
        try {
            f.key = o.at("key").get<std::string>();
            f.label = o.at("label").get<int>();
            f.family = o.at("family").get<int>();
            f.raw.lengths = o.at("lengths").get<std::vector<int>>();
            f.raw.duration = o.at("duration").get<double>();
            f.raw.mean_interval = o.at("mean_gap").get<double>();
        } catch (const std::exception& e) {
            throw std::runtime_error(where + e.what());
        }
        if (f.label != 0 && f.label != 1) {
            throw std::runtime_error(where + "label must be 0 or 1");
        }
        if (f.family < -1) {
            throw std::runtime_error(where + "family must be >= -1");
        }
        if (f.raw.lengths.empty()) {
            throw std::runtime_error(where + "lengths must be non-empty");
        }
        for (int l : f.raw.lengths) {
            if (l < 0) throw std::runtime_error(where + "negative packet length");
        }
        if (!std::isfinite(f.raw.duration) || f.raw.duration < 0.0 ||
            !std::isfinite(f.raw.mean_interval) || f.raw.mean_interval < 0.0) {
            throw std::runtime_error(where + "duration and mean_gap must be finite and >= 0");
        }
        flows.push_back(std::move(f));
    }
    return flows;
}

std::vector<ingest::NormalizedSequence> normalize_flows(const std::vector<LabeledFlow>& flows) {
    std::vector<ingest::NormalizedSequence> out;
    out.reserve(flows.size());
    for (const auto& f : flows) out.push_back(ingest::normalize_sequence(f.raw));
    return out;
}

void FamilySpec::validate() const {
    if (name.empty()) throw std::invalid_argument("family: empty name");
    if (label != 0 && label != 1) throw std::invalid_argument("family " + name + ": label must be 0 or 1");
    if (label == 0 && family != -1) {
        throw std::invalid_argument("family " + name + ": benign families use family=-1");
    }
    if (label == 1 && family < 0) {
        throw std::invalid_argument("family " + name + ": attack families need family >= 0");
    }
    if (flows < 0) throw std::invalid_argument("family " + name + ": flows must be >= 0");
    if (!(packet_mean > 1.0)) {
        throw std::invalid_argument("family " + name + ": packet_mean must be > 1");
    }
    if (!(gap_mean > 0.0) || !std::isfinite(gap_mean)) {
        throw std::invalid_argument("family " + name + ": gap_mean must be > 0");
    }
    if (length_mix.empty()) {
        throw std::invalid_argument("family " + name + ": length_mix must be non-empty");
    }
    for (const auto& c : length_mix) {
        if (!(c.weight > 0.0)) {
            throw std::invalid_argument("family " + name + ": component weights must be > 0");
        }
        if (!std::isfinite(c.mean) || !(c.sd >= 0.0)) {
            throw std::invalid_argument("family " + name + ": bad length component");
        }
    }
}

std::vector<LabeledFlow> synth_family(const FamilySpec& fam, int64_t count, RngState& rng) {
    fam.validate();
    if (count < 0) throw std::invalid_argument("synth_family: negative count");
    double total_weight = 0.0;
    for (const auto& c : fam.length_mix) total_weight += c.weight;

    std::vector<LabeledFlow> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        const int64_t packets = 1 + rng.geometric_count(fam.packet_mean - 1.0);
        ingest::FlowSequence flow;
        double t = 0.0;
        for (int64_t p = 0; p < packets; ++p) {
            if (p > 0) t += rng.exponential(fam.gap_mean);
            double u = rng.uniform() * total_weight;
            const LengthComponent* comp = &fam.length_mix.back();
            for (const auto& c : fam.length_mix) {
                if (u < c.weight) { comp = &c; break; }
                u -= c.weight;
            }
            const double drawn = rng.normal(comp->mean, comp->sd);
            const int len = static_cast<int>(std::clamp(std::llround(drawn), 0ll, 1514ll));
            ingest::PacketRecord pkt;
            pkt.timestamp = t;
            pkt.length = len;
            flow.packets.push_back(std::move(pkt));
        }
        LabeledFlow lf;
        lf.key = fam.name + "-" + std::to_string(i);
        lf.label = fam.label;
        lf.family = fam.family;
        lf.raw = ingest::derive_raw_sequence(flow);
        out.push_back(std::move(lf));
    }
    return out;
}

const FamilySpec& RoundSpecFile::family(const std::string& name) const {
    for (const auto& f : families) {
        if (f.name == name) return f;
    }
    throw std::invalid_argument("round spec: unknown family '" + name + "'");
}

RoundSpecFile parse_round_spec(const std::string& json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("round spec: ") + e.what());
    }
    RoundSpecFile spec;
    try {
        for (const auto& jf : doc.at("families")) {
            FamilySpec fam;
            fam.name = jf.at("name").get<std::string>();
            fam.label = jf.at("label").get<int>();
            fam.family = jf.value("family", fam.label == 0 ? -1 : 0);
            fam.flows = jf.value("flows", int64_t{0});
            fam.packet_mean = jf.at("packet_mean").get<double>();
            fam.gap_mean = jf.at("gap_mean").get<double>();
            for (const auto& jc : jf.at("length_mix")) {
                LengthComponent c;
                c.weight = jc.value("weight", 1.0);
                c.mean = jc.at("mean").get<double>();
                c.sd = jc.at("sd").get<double>();
                fam.length_mix.push_back(c);
            }
            fam.validate();
            spec.families.push_back(std::move(fam));
        }
        if (doc.contains("rounds")) {
            for (const auto& jr : doc.at("rounds")) {
                RoundPlan plan;
                for (const char* part : {"train", "test"}) {
                    auto& dst = std::string(part) == "train" ? plan.train : plan.test;
                    for (const auto& [name, count] : jr.at(part).items()) {
                        const int64_t n = count.get<int64_t>();
                        if (n < 0) {
                            throw std::invalid_argument("negative flow count for " + name);
                        }
                        dst.emplace_back(name, n);
                    }
                }
                spec.rounds.push_back(std::move(plan));
            }
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("round spec: ") + e.what());
    }
    std::set<std::string> seen;
    for (const auto& f : spec.families) {
        if (!seen.insert(f.name).second) {
            throw std::invalid_argument("round spec: duplicate family '" + f.name + "'");
        }
    }
    for (const auto& r : spec.rounds) {
        for (const auto& [name, count] : r.train) { (void)count; spec.family(name); }
        for (const auto& [name, count] : r.test) { (void)count; spec.family(name); }
    }
    return spec;
}

RoundDataset build_round_dataset(const RoundSpecFile& spec, RngState& rng) {
    RoundDataset data;
    for (const auto& plan : spec.rounds) {
        std::vector<LabeledFlow> train, test;
        for (const auto& [name, count] : plan.train) {
            auto flows = synth_family(spec.family(name), count, rng);
            train.insert(train.end(), std::make_move_iterator(flows.begin()),
                         std::make_move_iterator(flows.end()));
        }
        for (const auto& [name, count] : plan.test) {
            auto flows = synth_family(spec.family(name), count, rng);
            test.insert(test.end(), std::make_move_iterator(flows.begin()),
                        std::make_move_iterator(flows.end()));
        }
        data.train.push_back(std::move(train));
        data.test.push_back(std::move(test));
    }
    return data;
}

std::pair<PipelineState, PretrainReport> pretrain_pipeline(const PipelineConfig& cfg,
                                                           const std::vector<LabeledFlow>& flows) {
    cfg.validate();
    if (flows.empty()) throw std::invalid_argument("pretrain: no flows");
    bool has_benign = false, has_malicious = false;
    for (const auto& f : flows) {
        (f.label == 0 ? has_benign : has_malicious) = true;
    }
    if (!has_benign || !has_malicious) {
        throw std::invalid_argument("pretrain: both classes must be present");
    }

    RngState rng(cfg.seed);
    const auto normalized = normalize_flows(flows);

    auto [extractor, ae_curve] =
        features::train_autoencoder(cfg.ae_config(), normalized, static_cast<int>(cfg.ae_epochs),
                                    static_cast<int>(cfg.batch_size), cfg.lr, rng);

    auto feats = extractor.extract_features(normalized);
    std::vector<int> labels;
    labels.reserve(flows.size());
    for (const auto& f : flows) labels.push_back(f.label);

    detection::DetectorModel detector(cfg.det_config(), rng);
    detection::PretrainConfig pre;
    pre.epochs = static_cast<int>(cfg.detector_epochs);
    pre.batch_size = static_cast<int>(cfg.batch_size);
    pre.lr = cfg.lr;
    auto det_curve = detection::pretrain(detector, feats, labels, pre, rng);

    replay::ReplayBuffer buffer(cfg.buffer_capacity);
    auto preds = detector.predict_batch(feats);
    for (size_t i = 0; i < feats.size(); ++i) {
        buffer.offer({feats[i], labels[i], preds[i].logits}, rng);
    }

    PipelineState state{cfg, std::move(extractor), std::move(detector), std::move(buffer),
                        std::move(rng)};
    return {std::move(state), PretrainReport{std::move(ae_curve), std::move(det_curve)}};
}

std::vector<incremental::StepLog> update_pipeline(PipelineState& state,
                                                  const std::vector<LabeledFlow>& flows) {
    if (flows.empty()) throw std::invalid_argument("update: no new flows");
    const auto normalized = normalize_flows(flows);
    auto feats = state.extractor.extract_features(normalized);
    std::vector<int> labels;
    labels.reserve(flows.size());
    for (const auto& f : flows) labels.push_back(f.label);

    auto lc = state.cfg.learn_config();
    if (lc.mode == incremental::Mode::kJoint) {
        state.detector = detection::DetectorModel(state.cfg.det_config(), state.rng);
    }
    return incremental::incremental_round(state.detector, state.buffer, feats, labels, lc,
                                          state.rng);
}

std::vector<detection::Prediction> predict_flows(PipelineState& state,
                                                 const std::vector<LabeledFlow>& flows) {
    const auto normalized = normalize_flows(flows);
    auto feats = state.extractor.extract_features(normalized);
    return state.detector.predict_batch(feats);
}

detection::MetricsReport evaluate_flows(PipelineState& state,
                                        const std::vector<LabeledFlow>& flows) {
    auto preds = predict_flows(state, flows);
    std::vector<int> predicted, truth;
    predicted.reserve(flows.size());
    truth.reserve(flows.size());
    for (size_t i = 0; i < flows.size(); ++i) {
        predicted.push_back(preds[i].label);
        truth.push_back(flows[i].label);
    }
    return detection::compute_metrics(predicted, truth);
}

void save_checkpoint(std::ostream& out, const PipelineState& state) {
    out.write("ETGD", 4);
    wire::write_u64(out, kCheckpointVersion);
    wire::write_string(out, serialize_config(state.cfg));
    wire::write_string(out, state.rng.serialize());
    state.extractor.params().serialize(out);
    state.detector.params().serialize(out);
    state.buffer.serialize(out);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

PipelineState load_checkpoint(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "ETGD") {
        throw std::runtime_error("checkpoint: bad magic");
    }
    const uint64_t version = wire::read_u64(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    PipelineConfig cfg = parse_config_text(wire::read_string(in));
    cfg.validate();
    RngState rng = RngState::deserialize(wire::read_string(in));
    ParamStore extractor_params = ParamStore::deserialize(in);
    ParamStore detector_params = ParamStore::deserialize(in);
    replay::ReplayBuffer buffer = replay::ReplayBuffer::deserialize(in);

    features::AutoEncoderModel extractor(cfg.ae_config(), std::move(extractor_params));
    detection::DetectorModel detector(cfg.det_config(), std::move(detector_params));
    return PipelineState{std::move(cfg), std::move(extractor), std::move(detector),
                         std::move(buffer), std::move(rng)};
}

void save_checkpoint_file(const std::string& path, const PipelineState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(out, state);
}

PipelineState load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    return load_checkpoint(in);
}

PipelineState clone_state(const PipelineState& state) {
    std::stringstream ss;
    save_checkpoint(ss, state);
    return load_checkpoint(ss);
}

namespace {

EvalRow scoped_row(const std::string& mode, int64_t round, const std::string& scope,
                   const std::vector<int>& predicted, const std::vector<int>& truth) {
    auto m = detection::compute_metrics(predicted, truth);
    EvalRow row;
    row.mode = mode;
    row.round = round;
    row.scope = scope;
    row.count = static_cast<int64_t>(predicted.size());
    row.accuracy = m.accuracy;
    row.precision = m.precision;
    row.recall = m.recall;
    row.f1 = m.f1;
    return row;
}

void append_round_rows(std::vector<EvalRow>& rows, PipelineState& state, const std::string& mode,
                       int64_t round, const std::vector<LabeledFlow>& cumulative_test) {
    auto preds = predict_flows(state, cumulative_test);
    std::vector<int> predicted(cumulative_test.size()), truth(cumulative_test.size());
    for (size_t i = 0; i < cumulative_test.size(); ++i) {
        predicted[i] = preds[i].label;
        truth[i] = cumulative_test[i].label;
    }
    rows.push_back(scoped_row(mode, round, "cumulative", predicted, truth));

    std::set<int> families;
    bool any_benign = false;
    for (const auto& f : cumulative_test) {
        if (f.family < 0) any_benign = true;
        else families.insert(f.family);
    }
    auto subset_row = [&](const std::string& scope, auto&& keep) {
        std::vector<int> sp, st;
        for (size_t i = 0; i < cumulative_test.size(); ++i) {
            if (keep(cumulative_test[i])) {
                sp.push_back(predicted[i]);
                st.push_back(truth[i]);
            }
        }
        rows.push_back(scoped_row(mode, round, scope, sp, st));
    };
    if (any_benign) {
        subset_row("benign", [](const LabeledFlow& f) { return f.family < 0; });
    }
    for (int fam : families) {
        subset_row("family:" + std::to_string(fam),
                   [fam](const LabeledFlow& f) { return f.family == fam; });
    }
}

} // namespace

EvalRoundsResult eval_rounds(const PipelineConfig& cfg, const RoundDataset& data,
                             const std::vector<std::string>& modes) {
    cfg.validate();
    if (data.train.size() != data.test.size()) {
        throw std::invalid_argument("eval_rounds: train/test round count mismatch");
    }
    if (data.train.size() < 2) {
        throw std::invalid_argument("eval_rounds: need at least 2 rounds");
    }
    if (modes.empty()) throw std::invalid_argument("eval_rounds: no modes requested");
    for (const auto& m : modes) learn_mode(m);
    for (size_t i = 0; i < data.test.size(); ++i) {
        for (const auto& f : data.test[i]) {
            if (f.family > static_cast<int>(i)) {
                throw std::runtime_error("eval_rounds: round " + std::to_string(i) +
                                         " test set contains family " +
                                         std::to_string(f.family));
            }
        }
    }

    // Pretraining does not depend on the mode, so round 0 is shared and each
    // mode branches from an identical state.
    auto [base, report] = pretrain_pipeline(cfg, data.train[0]);
    (void)report;

    EvalRoundsResult result;
    for (const auto& mode : modes) {
        PipelineState state = clone_state(base);
        state.cfg.mode = mode;

        std::vector<LabeledFlow> cumulative_test = data.test[0];
        append_round_rows(result.rows, state, mode, 0, cumulative_test);

        std::vector<LabeledFlow> union_train = data.train[0];
        for (size_t i = 1; i < data.train.size(); ++i) {
            union_train.insert(union_train.end(), data.train[i].begin(), data.train[i].end());
            const auto& round_flows =
                learn_mode(mode) == incremental::Mode::kJoint ? union_train : data.train[i];
            auto steps = update_pipeline(state, round_flows);
            for (auto& s : steps) {
                result.steps.push_back({mode, static_cast<int64_t>(i), s});
            }
            cumulative_test.insert(cumulative_test.end(), data.test[i].begin(),
                                   data.test[i].end());
            append_round_rows(result.rows, state, mode, static_cast<int64_t>(i),
                              cumulative_test);
        }
    }
    return result;
}

std::string eval_report_csv(const std::vector<EvalRow>& rows) {
    std::ostringstream out;
    out << "mode,round,scope,count,accuracy,precision,recall,f1\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.mode << ',' << r.round << ',' << r.scope << ',' << r.count << ',' << r.accuracy
            << ',' << r.precision << ',' << r.recall << ',' << r.f1 << '\n';
    }
    return out.str();
}

std::string tagged_step_csv(const std::vector<TaggedStepLog>& steps) {
    std::ostringstream out;
    out << "mode,round,epoch,step,l_ce,l_il,l_lb,k,total\n";
    out << std::setprecision(17);
    for (const auto& s : steps) {
        out << s.mode << ',' << s.round << ',' << s.log.epoch << ',' << s.log.step << ','
            << s.log.loss.l_ce << ',' << s.log.loss.l_il << ',' << s.log.loss.l_lb << ','
            << s.log.loss.k << ',' << s.log.loss.total << '\n';
    }
    return out.str();
}

ExtractSummary cmd_extract(std::istream& in, ingest::LogFormat format, std::ostream& out) {
    auto report = ingest::parse_packet_log(in, format);
    auto flows = ingest::assemble_flows(report.packets);

    ExtractSummary summary;
    summary.packets = static_cast<int64_t>(report.packets.size());
    summary.skipped = static_cast<int64_t>(report.skipped.size());
    summary.other_protocol = report.other_protocol;
    summary.fragments = report.fragments;
    summary.truncated = report.truncated;

    for (const auto& flow : flows) {
        const auto raw = ingest::derive_raw_sequence(flow);
        const auto norm = ingest::normalize_sequence(raw);
        ordered_json o;
        o["key"] = flow.key.src_ip + ":" + std::to_string(flow.key.src_port) + ">" +
                   flow.key.dst_ip + ":" + std::to_string(flow.key.dst_port) + "/" +
                   (flow.key.protocol == ingest::Protocol::TCP ? "tcp" : "udp");
        o["lengths"] = raw.lengths;
        o["duration"] = raw.duration;
        o["mean_gap"] = raw.mean_interval;
        o["buckets"] = norm.buckets;
        o["d_norm"] = norm.d_norm;
        o["t_m_norm"] = norm.t_m_norm;
        out << o.dump() << '\n';
        ++summary.flows;
    }
    return summary;
}

} // namespace etguard::pipeline
