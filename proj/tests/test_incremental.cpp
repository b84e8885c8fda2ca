#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "etguard/detector.hpp"
#include "etguard/gradient_check.hpp"
#include "etguard/incremental.hpp"
#include "etguard/losses.hpp"
#include "etguard/replay_buffer.hpp"
#include "etguard/rng.hpp"

using namespace etguard;
namespace incr = etguard::incremental;

namespace {

detection::DetectorModel zeroed_detector(detection::DetectorConfig cfg) {
    RngState rng(1);
    detection::DetectorModel det(cfg, rng);
    for (const auto& name : det.params().names()) {
        det.params().value(name).fill(0.0);
    }
    return det;
}

detection::DetectorModel clone_detector(const detection::DetectorModel& det) {
    std::stringstream ss;
    det.params().serialize(ss);
    return {det.config(), ParamStore::deserialize(ss)};
}

replay::ReplayBuffer clone_buffer(const replay::ReplayBuffer& buffer) {
    std::stringstream ss;
    buffer.serialize(ss);
    return replay::ReplayBuffer::deserialize(ss);
}

// Smallest pre-activation magnitude across both hidden layers; fixtures for
// difference-quotient checks must keep this clear of the relu kink.
double relu_margin(const detection::DetectorModel& det,
                   const std::vector<std::vector<double>>& rows) {
    const auto& cfg = det.config();
    const auto& ps = det.params();
    const NdArray& w1 = ps.value("det.fc1.W");
    const NdArray& b1 = ps.value("det.fc1.b");
    const NdArray& w2 = ps.value("det.fc2.W");
    const NdArray& b2 = ps.value("det.fc2.b");
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& x : rows) {
        std::vector<double> h1(static_cast<size_t>(cfg.hidden1));
        for (int j = 0; j < cfg.hidden1; ++j) {
            double s = b1[j];
            for (int i = 0; i < cfg.input_dim; ++i) s += x[static_cast<size_t>(i)] * w1.at(i, j);
            margin = std::min(margin, std::fabs(s));
            h1[static_cast<size_t>(j)] = s > 0.0 ? s : 0.0;
        }
        for (int j = 0; j < cfg.hidden2; ++j) {
            double s = b2[j];
            for (int i = 0; i < cfg.hidden1; ++i) s += h1[static_cast<size_t>(i)] * w2.at(i, j);
            margin = std::min(margin, std::fabs(s));
        }
    }
    return margin;
}

const std::vector<std::vector<double>> kFdInputs = {{0.3, -0.8}, {-0.5, 0.6}};
const std::vector<int> kFdLabels = {0, 1};
const std::vector<replay::BufferEntry> kFdBatch1 = {
    {{0.9, 0.2}, 1, {0.4, -0.3}},
    {{-0.7, -0.1}, 0, {-0.2, 0.5}},
};
const std::vector<replay::BufferEntry> kFdBatch2 = {
    {{0.2, 0.7}, 1, {}},
    {{-0.4, -0.9}, 0, {}},
};

detection::DetectorConfig tiny_cfg() {
    detection::DetectorConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden1 = 3;
    cfg.hidden2 = 2;
    cfg.classes = 2;
    return cfg;
}

} // namespace

TEST_CASE("learn config validation") {
    incr::LearnConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.alpha == 0.5);
    CHECK(cfg.gamma == 10.0);

    auto bad = cfg; bad.alpha = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg; bad.gamma = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg; bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg; bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg; bad.epochs_per_round = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg; bad.buffer_batch = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    CHECK(incr::mode_name(incr::Mode::kFullLoss) == "full_loss");
    CHECK(incr::mode_name(incr::Mode::kFinetuneOnly) == "finetune_only");
    CHECK(incr::mode_name(incr::Mode::kJoint) == "joint");
}

TEST_CASE("kl divergence fixtures and guards") {
    const std::vector<double> p = {0.5, 0.5};
    const std::vector<double> q = {0.51, 0.49};
    CHECK(incr::kl_divergence(p, p) == 0.0);
    CHECK(incr::kl_divergence(p, q) ==
          doctest::Approx(2.000400106698677e-4).epsilon(1e-12));
    CHECK(incr::kl_divergence(q, p) != incr::kl_divergence(p, q));

    CHECK_THROWS_AS(incr::kl_divergence({0.5, 0.5}, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(incr::kl_divergence({0.6, 0.6}, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(incr::kl_divergence({0.5, 0.5}, {0.3, 0.3, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(incr::kl_divergence({}, {}), std::invalid_argument);

    RngState rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t dim = 2 + static_cast<size_t>(rng.uniform_int(5));
        auto draw = [&] {
            std::vector<double> v(dim);
            double sum = 0.0;
            for (auto& x : v) { x = 0.1 + rng.uniform(); sum += x; }
            for (auto& x : v) x /= sum;
            return v;
        };
        auto a = draw();
        auto b = draw();
        CHECK(incr::kl_divergence(a, b) >= 0.0);
        CHECK(incr::kl_divergence(a, a) == 0.0);
    }
}

TEST_CASE("theorem1 residual fixture and scaling") {
    const std::vector<double> p = {0.5, 0.5};
    const std::vector<double> delta = {1.0, -1.0};

    auto zero = incr::theorem1_residual(p, delta, 0.0);
    CHECK(zero.kl == 0.0);
    CHECK(zero.weighted_euclid == 0.0);
    CHECK(zero.residual == 0.0);

    auto r = incr::theorem1_residual(p, delta, 0.01);
    CHECK(r.kl == doctest::Approx(2.000400106698677e-4).epsilon(1e-12));
    CHECK(r.weighted_euclid == doctest::Approx(2.0e-4).epsilon(1e-14));
    CHECK(r.residual == doctest::Approx(4.001066986769101e-8).epsilon(1e-6));
    CHECK(std::fabs(r.residual) < 1e-6);

    // o(eps^2) behaviour of the quadratic approximation
    const std::vector<double> p3 = {0.2, 0.3, 0.5};
    const std::vector<double> d3 = {0.5, -1.0, 0.5};
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        auto s = incr::theorem1_residual(p3, d3, eps);
        const double ratio = std::fabs(s.residual) / (eps * eps);
        CHECK(ratio < prev);
        prev = ratio;
        if (eps == 1e-3) {
            CHECK(std::fabs(s.kl - s.weighted_euclid) / s.weighted_euclid < 0.01);
        }
    }

    CHECK_THROWS_AS(incr::theorem1_residual(p, {1.0, -0.5}, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(incr::theorem1_residual(p, delta, 0.6), std::invalid_argument);
    CHECK_THROWS_AS(incr::theorem1_residual(p, {1.0, -1.0, 0.0}, 0.01), std::invalid_argument);
}

TEST_CASE("balance coefficient") {
    CHECK(incr::balance_coefficient(0.0, 10.0) == 1.0);
    CHECK(incr::balance_coefficient(0.1, 10.0) ==
          doctest::Approx(1.2310585786300049).epsilon(1e-12));
    CHECK(incr::balance_coefficient(1.0, 10.0) ==
          doctest::Approx(1.4999546021312976).epsilon(1e-12));

    double prev = 0.5;
    for (double l : {0.0, 1e-6, 1e-3, 0.05, 0.5, 3.0, 50.0, 1e6}) {
        const double k = incr::balance_coefficient(l, 10.0);
        CHECK(k > 0.5);
        CHECK(k < 1.5);
        CHECK(k >= prev);
        prev = k;
    }
}

TEST_CASE("distillation loss fixtures") {
    auto det = zeroed_detector(tiny_cfg());
    det.params().value("det.fc3.b")[1] = 1.0; // logits [0, 1] for every input

    Tape t;
    std::vector<replay::BufferEntry> match = {{{0.3, 0.3}, 0, {0.0, 1.0}}};
    CHECK(t.value(incr::distillation_loss(t, det, match, 0.5))[0] == 0.0);

    std::vector<replay::BufferEntry> one = {{{0.3, 0.3}, 0, {1.0, 0.0}}};
    CHECK(t.value(incr::distillation_loss(t, det, one, 0.5))[0] == 1.0);

    std::vector<replay::BufferEntry> two = {
        {{0.3, 0.3}, 0, {1.0, 0.0}},  // squared distance 2
        {{-0.2, 0.6}, 1, {2.0, 1.0}}, // squared distance 4
    };
    Var l_il = incr::distillation_loss(t, det, two, 0.5);
    CHECK(t.value(l_il)[0] == 1.5);

    t.backward(l_il);
    const NdArray& gb = det.params().grad("det.fc3.b");
    CHECK(gb[0] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(gb[1] == doctest::Approx(0.5).epsilon(1e-12));

    Tape t2;
    CHECK(t2.value(incr::distillation_loss(t2, det, {}, 0.5))[0] == 0.0);
    std::vector<replay::BufferEntry> bad = {{{0.1, 0.1}, 0, {1.0, 2.0, 3.0}}};
    CHECK_THROWS_AS(incr::distillation_loss(t2, det, bad, 0.5), std::invalid_argument);
}

TEST_CASE("buffer ce loss fixtures") {
    auto det = zeroed_detector(tiny_cfg());

    Tape t;
    std::vector<replay::BufferEntry> pair = {{{0.4, -0.4}, 0, {}}, {{1.0, 2.0}, 1, {}}};
    CHECK(t.value(incr::buffer_ce_loss(t, det, pair))[0] ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));

    det.params().value("det.fc3.b")[0] = std::log(3.0);
    std::vector<replay::BufferEntry> single = {{{0.4, -0.4}, 0, {}}};
    CHECK(t.value(incr::buffer_ce_loss(t, det, single))[0] ==
          doctest::Approx(0.2876820724517809).epsilon(1e-12));

    det.params().value("det.fc3.b")[0] = 50.0;
    CHECK(t.value(incr::buffer_ce_loss(t, det, single))[0] < 1e-12);

    CHECK(t.value(incr::buffer_ce_loss(t, det, {}))[0] == 0.0);
}

TEST_CASE("loss composition fixture") {
    incr::LearnConfig cfg;
    cfg.alpha = 0.5;
    cfg.gamma = 10.0;
    cfg.mode = incr::Mode::kFullLoss;

    auto b = incr::compose_breakdown(0.7, 1.0, 0.5, cfg);
    CHECK(b.k == doctest::Approx(1.4999546021312976).epsilon(1e-12));
    CHECK(b.l_lb == 0.25);
    CHECK(b.total == doctest::Approx(2.0749886505328244).epsilon(1e-12));
    CHECK(b.total == b.l_ce + b.l_il + b.k * b.l_lb);

    auto empty = incr::compose_breakdown(0.7, 0.0, 0.0, cfg);
    CHECK(empty.k == 1.0);
    CHECK(empty.total == 0.7);

    cfg.mode = incr::Mode::kFinetuneOnly;
    auto ft = incr::compose_breakdown(0.7, 123.0, 456.0, cfg);
    CHECK(ft.l_il == 0.0);
    CHECK(ft.l_lb == 0.0);
    CHECK(ft.k == 1.0);
    CHECK(ft.total == 0.7);
}

TEST_CASE("total loss assembles its parts") {
    RngState rng(83);
    detection::DetectorModel det(tiny_cfg(), rng);

    incr::LearnConfig cfg;
    cfg.mode = incr::Mode::kFullLoss;

    Tape t;
    auto tl = incr::total_loss(t, det, kFdInputs, kFdLabels, kFdBatch1, kFdBatch2, cfg);

    Tape ref;
    const double l_ce = ref.value(cross_entropy_loss(
        ref, det.forward(ref, ref.constant(det.to_matrix(kFdInputs))), kFdLabels))[0];
    const double l_il = ref.value(incr::distillation_loss(ref, det, kFdBatch1, cfg.alpha))[0];
    const double raw = ref.value(incr::buffer_ce_loss(ref, det, kFdBatch2))[0];

    CHECK(tl.breakdown.l_ce == l_ce);
    CHECK(tl.breakdown.l_il == l_il);
    CHECK(tl.breakdown.l_lb == cfg.alpha * raw);
    CHECK(tl.breakdown.k == incr::balance_coefficient(l_il, cfg.gamma));
    CHECK(tl.breakdown.k > 0.5);
    CHECK(tl.breakdown.k < 1.5);
    CHECK(tl.breakdown.total ==
          tl.breakdown.l_ce + tl.breakdown.l_il + tl.breakdown.k * tl.breakdown.l_lb);
    CHECK(t.value(tl.loss)[0] == tl.breakdown.total);

    for (auto mode : {incr::Mode::kFinetuneOnly, incr::Mode::kJoint}) {
        incr::LearnConfig mcfg;
        mcfg.mode = mode;
        Tape mt;
        auto mtl = incr::total_loss(mt, det, kFdInputs, kFdLabels, kFdBatch1, kFdBatch2, mcfg);
        CHECK(mtl.breakdown.total == l_ce);
        CHECK(mtl.breakdown.l_il == 0.0);
        CHECK(mtl.breakdown.l_lb == 0.0);
        CHECK(mtl.breakdown.k == 1.0);
        CHECK(mt.value(mtl.loss)[0] == l_ce);
    }

    Tape bad;
    CHECK_THROWS_AS(incr::total_loss(bad, det, {}, {}, {}, {}, cfg), std::invalid_argument);
}

TEST_CASE("full loss with empty buffer matches finetune exactly") {
    RngState rng_a(83), rng_b(83);
    detection::DetectorModel full(tiny_cfg(), rng_a);
    detection::DetectorModel ft(tiny_cfg(), rng_b);
    REQUIRE(full.params().bitwise_equal_values(ft.params()));

    incr::LearnConfig full_cfg;
    full_cfg.mode = incr::Mode::kFullLoss;
    incr::LearnConfig ft_cfg;
    ft_cfg.mode = incr::Mode::kFinetuneOnly;

    Tape ta, tb;
    auto la = incr::total_loss(ta, full, kFdInputs, kFdLabels, {}, {}, full_cfg);
    auto lb = incr::total_loss(tb, ft, kFdInputs, kFdLabels, {}, {}, ft_cfg);
    CHECK(la.breakdown.total == lb.breakdown.total);
    CHECK(la.breakdown.k == 1.0);
    CHECK(la.breakdown.l_il == 0.0);
    CHECK(la.breakdown.l_lb == 0.0);

    ta.backward(la.loss);
    tb.backward(lb.loss);
    full.params().adam_step(1e-3);
    ft.params().adam_step(1e-3);
    CHECK(full.params().bitwise_equal_values(ft.params()));
}

TEST_CASE("total loss gradients match finite differences in all modes") {
    std::vector<std::vector<double>> all_rows = kFdInputs;
    for (const auto& e : kFdBatch1) all_rows.push_back(e.x);
    for (const auto& e : kFdBatch2) all_rows.push_back(e.x);

    for (auto mode : {incr::Mode::kFullLoss, incr::Mode::kFinetuneOnly, incr::Mode::kJoint}) {
        RngState rng(83);
        detection::DetectorModel det(tiny_cfg(), rng);
        REQUIRE(relu_margin(det, all_rows) > 1e-2);

        incr::LearnConfig cfg;
        cfg.mode = mode;

        Tape base;
        auto base_loss =
            incr::total_loss(base, det, kFdInputs, kFdLabels, kFdBatch1, kFdBatch2, cfg);
        const double k_base = base_loss.breakdown.k;

        auto eval = [&](bool want_grad) {
            Tape t;
            auto tl = incr::total_loss(t, det, kFdInputs, kFdLabels, kFdBatch1, kFdBatch2,
                                       cfg, &k_base);
            if (want_grad) t.backward(tl.loss);
            return tl.breakdown.total;
        };
        auto report = gradient_check(det.params(), eval, 1e-5);
        INFO("mode ", incr::mode_name(mode), " worst ", report.worst_param, "[",
             report.worst_index, "] analytic ", report.worst_analytic, " numeric ",
             report.worst_numeric);
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("incremental round determinism, logging, and buffer growth") {
    const std::vector<std::vector<double>> xs = {
        {0.3, -0.8}, {-0.5, 0.6}, {0.9, 0.2}, {-0.7, -0.1}, {0.2, 0.7},
    };
    const std::vector<int> ys = {0, 1, 1, 0, 1};

    incr::LearnConfig cfg;
    cfg.mode = incr::Mode::kFullLoss;
    cfg.batch_size = 2;
    cfg.epochs_per_round = 4;
    cfg.buffer_batch = 2;
    cfg.lr = 1e-3;

    auto run = [&] {
        RngState rng(55);
        detection::DetectorModel det(tiny_cfg(), rng);
        replay::ReplayBuffer buffer(3);
        auto log = incr::incremental_round(det, buffer, xs, ys, cfg, rng);
        return std::tuple(std::move(det), std::move(buffer), std::move(log), rng.serialize());
    };

    auto [det_a, buf_a, log_a, rng_a] = run();
    auto [det_b, buf_b, log_b, rng_b] = run();

    CHECK(det_a.params().bitwise_equal_values(det_b.params()));
    CHECK(buf_a == buf_b);
    CHECK(rng_a == rng_b);

    const int64_t steps_per_epoch = 3; // ceil(5 / 2)
    REQUIRE(static_cast<int64_t>(log_a.size()) == cfg.epochs_per_round * steps_per_epoch);
    REQUIRE(log_a.size() == log_b.size());
    for (size_t i = 0; i < log_a.size(); ++i) {
        CHECK(log_a[i].epoch == log_b[i].epoch);
        CHECK(log_a[i].step == log_b[i].step);
        CHECK(log_a[i].loss.total == log_b[i].loss.total);
        CHECK(log_a[i].loss.k > 0.5);
        CHECK(log_a[i].loss.k < 1.5);
        CHECK(log_a[i].loss.total ==
              log_a[i].loss.l_ce + log_a[i].loss.l_il + log_a[i].loss.k * log_a[i].loss.l_lb);
    }

    // first step runs against an empty buffer
    CHECK(log_a[0].loss.l_il == 0.0);
    CHECK(log_a[0].loss.l_lb == 0.0);
    CHECK(log_a[0].loss.k == 1.0);
    CHECK(log_a[0].loss.total == log_a[0].loss.l_ce);
    // second step replays entries whose logits were stored at the current
    // parameters, so distillation is exactly zero
    CHECK(log_a[1].loss.l_il == 0.0);
    CHECK(log_a[1].loss.l_lb > 0.0);

    // every epoch streams all 5 rows through the reservoir
    CHECK(buf_a.seen() == cfg.epochs_per_round * 5);
    CHECK(buf_a.size() == 3);

    const std::string csv = incr::step_log_csv(log_a);
    CHECK(csv.rfind("epoch,step,l_ce,l_il,l_lb,k,total\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<int64_t>(log_a.size()));

    std::vector<incr::StepLog> tiny = {{1, 2, {0.5, 0.25, 0.125, 1.0, 0.875}}};
    CHECK(incr::step_log_csv(tiny) ==
          "epoch,step,l_ce,l_il,l_lb,k,total\n1,2,0.5,0.25,0.125,1,0.875\n");
}

TEST_CASE("round with capacity zero matches finetune bitwise") {
    const std::vector<std::vector<double>> xs = {
        {0.3, -0.8}, {-0.5, 0.6}, {0.9, 0.2}, {-0.7, -0.1}, {0.2, 0.7},
    };
    const std::vector<int> ys = {0, 1, 1, 0, 1};

    auto run = [&](incr::Mode mode) {
        incr::LearnConfig cfg;
        cfg.mode = mode;
        cfg.batch_size = 2;
        cfg.epochs_per_round = 3;
        RngState rng(99);
        detection::DetectorModel det(tiny_cfg(), rng);
        replay::ReplayBuffer buffer(0);
        auto log = incr::incremental_round(det, buffer, xs, ys, cfg, rng);
        return std::tuple(std::move(det), std::move(buffer), std::move(log), rng.serialize());
    };

    auto [det_full, buf_full, log_full, rng_full] = run(incr::Mode::kFullLoss);
    auto [det_ft, buf_ft, log_ft, rng_ft] = run(incr::Mode::kFinetuneOnly);

    CHECK(det_full.params().bitwise_equal_values(det_ft.params()));
    CHECK(rng_full == rng_ft);
    CHECK(buf_full.seen() == 15);
    CHECK(buf_ft.seen() == 15);
    CHECK(buf_full.size() == 0);
    REQUIRE(log_full.size() == log_ft.size());
    for (size_t i = 0; i < log_full.size(); ++i) {
        CHECK(log_full[i].loss.total == log_ft[i].loss.total);
        CHECK(log_full[i].loss.k == 1.0);
    }
}

TEST_CASE("joint mode trains on its data and leaves the buffer alone") {
    const std::vector<std::vector<double>> xs = {{0.3, -0.8}, {-0.5, 0.6}, {0.9, 0.2}};
    const std::vector<int> ys = {0, 1, 1};

    RngState rng(7);
    detection::DetectorModel det(tiny_cfg(), rng);
    replay::ReplayBuffer buffer(4);
    buffer.offer({{0.1, 0.2}, 0, {0.3, -0.3}}, rng);
    buffer.offer({{-0.6, 0.4}, 1, {-0.1, 0.8}}, rng);
    auto before = clone_buffer(buffer);

    incr::LearnConfig cfg;
    cfg.mode = incr::Mode::kJoint;
    cfg.batch_size = 2;
    cfg.epochs_per_round = 2;
    auto log = incr::incremental_round(det, buffer, xs, ys, cfg, rng);

    CHECK(buffer == before);
    CHECK(log.size() == 4);
    for (const auto& row : log) {
        CHECK(row.loss.l_il == 0.0);
        CHECK(row.loss.l_lb == 0.0);
        CHECK(row.loss.k == 1.0);
        CHECK(row.loss.total == row.loss.l_ce);
    }
}

TEST_CASE("incremental round input guards") {
    RngState rng(3);
    detection::DetectorModel det(tiny_cfg(), rng);
    replay::ReplayBuffer buffer(4);
    incr::LearnConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs_per_round = 1;

    CHECK_THROWS_AS(incr::incremental_round(det, buffer, {}, {}, cfg, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(incr::incremental_round(det, buffer, {{0.1, 0.2}}, {0, 1}, cfg, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(incr::incremental_round(det, buffer, {{0.1, 0.2}}, {2}, cfg, rng),
                    std::invalid_argument);

    // Logits [DBL_MAX, -DBL_MAX] with label 1 overflow the cross entropy.
    auto poisoned = zeroed_detector(tiny_cfg());
    poisoned.params().value("det.fc3.b")[0] = std::numeric_limits<double>::max();
    poisoned.params().value("det.fc3.b")[1] = -std::numeric_limits<double>::max();
    CHECK_THROWS_WITH_AS(
        incr::incremental_round(poisoned, buffer, {{0.5, 0.5}}, {1}, cfg, rng),
        "incremental_round: non-finite loss at epoch 0 step 0", std::runtime_error);
}

TEST_CASE("replay counters forgetting across two attack families") {
    // Round 1 separates benign from family 0 along x1. Round 2's benign sits
    // at x1 ~ 0.4, inside the region the family-0 units fire on, while its
    // attack is separable purely by x2: plain finetuning therefore unlearns
    // the x1 rule, replay keeps family-0 samples in the objective.
    RngState data_rng(71);
    auto blob = [&](int n, double cx, double cy, double sigma) {
        std::vector<std::vector<double>> out;
        out.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            out.push_back({cx + sigma * data_rng.normal(), cy + sigma * data_rng.normal(),
                           0.1 * data_rng.normal(), 0.1 * data_rng.normal()});
        }
        return out;
    };
    const auto benign1 = blob(120, -1.5, -1.5, 0.4);
    const auto attack0 = blob(120, 1.6, -1.5, 0.35);
    const auto benign2 = blob(120, 0.4, -1.5, 0.35);
    const auto attack1 = blob(120, -1.5, 1.5, 0.4);
    const auto test_benign = blob(200, -1.5, -1.5, 0.4);
    const auto test_attack0 = blob(200, 1.6, -1.5, 0.35);

    detection::DetectorConfig dcfg;
    dcfg.input_dim = 4;
    dcfg.hidden1 = 16;
    dcfg.hidden2 = 8;
    dcfg.classes = 2;

    // Shared round-1 training, then the two modes branch from identical state.
    RngState rng(929);
    detection::DetectorModel det(dcfg, rng);
    std::vector<std::vector<double>> xs1 = benign1;
    xs1.insert(xs1.end(), attack0.begin(), attack0.end());
    std::vector<int> ys1(120, 0);
    ys1.insert(ys1.end(), 120, 1);
    detection::PretrainConfig pre;
    pre.epochs = 30;
    pre.batch_size = 32;
    detection::pretrain(det, xs1, ys1, pre, rng);

    replay::ReplayBuffer buffer(200);
    for (size_t i = 0; i < xs1.size(); ++i) {
        buffer.offer({xs1[i], ys1[i], det.predict(xs1[i]).logits}, rng);
    }
    const std::string rng_mark = rng.serialize();

    std::vector<std::vector<double>> xs2 = benign2;
    xs2.insert(xs2.end(), attack1.begin(), attack1.end());
    std::vector<int> ys2(120, 0);
    ys2.insert(ys2.end(), 120, 1);

    auto family0_accuracy = [&](incr::Mode mode) {
        auto branch = clone_detector(det);
        auto buf = clone_buffer(buffer);
        RngState branch_rng = RngState::deserialize(rng_mark);
        incr::LearnConfig cfg;
        cfg.mode = mode;
        cfg.batch_size = 32;
        cfg.epochs_per_round = 25;
        cfg.buffer_batch = 32;
        cfg.lr = 2e-3;
        incr::incremental_round(branch, buf, xs2, ys2, cfg, branch_rng);

        int64_t correct = 0;
        for (const auto& x : test_benign) correct += branch.predict(x).label == 0;
        for (const auto& x : test_attack0) correct += branch.predict(x).label == 1;
        double acc = static_cast<double>(correct) / 400.0;

        int64_t new_ok = 0;
        for (const auto& x : attack1) new_ok += branch.predict(x).label == 1;
        CHECK(static_cast<double>(new_ok) / 120.0 >= 0.9);
        return acc;
    };

    const double acc_full = family0_accuracy(incr::Mode::kFullLoss);
    const double acc_ft = family0_accuracy(incr::Mode::kFinetuneOnly);
    INFO("family0 accuracy: full ", acc_full, " finetune ", acc_ft);
    CHECK(acc_full > acc_ft);
    CHECK(acc_full >= 0.8);
}
