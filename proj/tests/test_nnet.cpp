#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <omp.h>

#include "ufatd/error.hpp"
#include "ufatd/kernels.hpp"
#include "ufatd/loss.hpp"
#include "ufatd/model.hpp"
#include "ufatd/objective.hpp"
#include "ufatd/optim.hpp"
#include "ufatd/rng.hpp"
#include "ufatd/train.hpp"

using namespace ufatd;
namespace kr = ufatd::kernels::reference;
namespace kp = ufatd::kernels::parallel;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.channels = 1;
    cfg.in_h = 8;
    cfg.in_w = 16;
    cfg.stages = {{3, 2, 3}, {3, 1, 4, Activation::Relu, true}};
    cfg.feature_dim = 6;
    cfg.C = 1;
    cfg.h = 4;
    cfg.w = 8;
    cfg.n = 2;
    return cfg;
}

GridTarget random_target(const ModelConfig& cfg, Rng& rng) {
    GridTarget t{cfg.n, cfg.h, cfg.C, cfg.w, {}, static_cast<int>(rng.below(cfg.n))};
    for (int i = 0; i < cfg.n * cfg.h * cfg.C; ++i) t.cells.push_back(static_cast<int>(rng.below(cfg.w + 1)));
    return t;
}

Batch random_batch(const ModelConfig& cfg, int B, Rng& rng) {
    Batch b;
    b.images = Tensor({B, cfg.channels, cfg.in_h, cfg.in_w});
    b.images.data = random_values(b.images.size(), rng);
    for (int i = 0; i < B; ++i) {
        b.targets.push_back(random_target(cfg, rng));
        b.groups.push_back(b.targets.back().gt_group);
    }
    return b;
}

// -log softmax(v)[t] by direct summation, without max shifting.
double ce_oracle(const std::vector<double>& v, int t) {
    double z = 0.0;
    for (double x : v) z += std::exp(x);
    return std::log(z) - v[t];
}

}  // namespace

TEST_CASE("forward shapes and determinism") {
    ModelConfig cfg;
    const Model model(cfg);
    const ModelParams params = model.init(3);
    Rng rng(1);
    Tensor images({4, 1, cfg.in_h, cfg.in_w});
    images.data = random_values(images.size(), rng);
    const BatchPrediction p = model.forward(params, images);
    CHECK(p.loc_logits.shape == std::vector<int>{4, 41, 12, 2, 3});
    CHECK(p.group_logits.shape == std::vector<int>{4, 3});
    CHECK(model.forward(params, images).loc_logits == p.loc_logits);

    Tensor twins({2, 1, cfg.in_h, cfg.in_w});
    for (std::size_t i = 0; i < twins.size(); ++i) twins.data[i] = images.data[i % (twins.size() / 2)];
    const BatchPrediction q = model.forward(params, twins);
    const Prediction a = q.image(0), b = q.image(1);
    CHECK(a.loc_logits == b.loc_logits);
    CHECK(a.group_logits == b.group_logits);

    CHECK_THROWS_AS(model.forward(params, Tensor({1, 1, cfg.in_h + 1, cfg.in_w})), Error);
}

TEST_CASE("zeroed heads give zero logits") {
    const ModelConfig cfg = small_config();
    const Model model(cfg);
    ModelParams params = model.init(9);
    for (const char* name : {"hcl.weight", "hcl.bias", "pi.weight", "pi.bias"}) params.at(name).zero();
    Rng rng(2);
    const BatchPrediction p = model.forward(params, random_batch(cfg, 3, rng).images);
    for (double v : p.loc_logits.data) CHECK(v == 0.0);
    for (double v : p.group_logits.data) CHECK(v == 0.0);
}

TEST_CASE("initialisation bounds") {
    const ModelConfig cfg = small_config();
    const ModelParams params = Model(cfg).init(4);
    for (const Param& p : params.tensors) {
        if (p.value.shape.size() == 1) {
            for (double v : p.value.data) CHECK(v == 0.0);
            continue;
        }
        const int fan_out = p.value.shape[0];
        const int fan_in = static_cast<int>(p.value.size()) / fan_out;
        const int rf = p.value.shape.size() == 4 ? p.value.shape[2] * p.value.shape[3] : 1;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out * rf));
        for (double v : p.value.data) CHECK(std::abs(v) <= bound);
    }
    CHECK(Model(cfg).init(4).tensors[0].value == params.tensors[0].value);
    CHECK_FALSE(Model(cfg).init(5).tensors[0].value == params.tensors[0].value);
}

TEST_CASE("locator loss values") {
    const int w = 40, h = 12, C = 2, n = 3;
    Tensor uniform({1, w + 1, h, C, n}, 0.37);
    GridTarget t{n, h, C, w, std::vector<int>(n * h * C, 7), 0};
    const std::vector<GridTarget> targets{t};
    CHECK(std::abs(hcl_loss(uniform, targets) - C * h * n * std::log(41.0)) <= 1e-12 * C * h * n * std::log(41.0));

    Rng rng(8);
    const int w2 = 3, h2 = 2;
    Tensor logits({2, w2 + 1, h2, 1, 1});
    logits.data = random_values(logits.size(), rng, 3.0);
    std::vector<GridTarget> tt{{1, h2, 1, w2, {2, 3}, 0}, {1, h2, 1, w2, {0, 1}, 0}};
    double oracle = 0.0;
    for (int b = 0; b < 2; ++b) {
        for (int j = 0; j < h2; ++j) {
            std::vector<double> row;
            for (int c = 0; c <= w2; ++c) row.push_back(logits.data[(b * (w2 + 1) + c) * h2 + j]);
            oracle += ce_oracle(row, tt[b].cells[j]);
        }
    }
    CHECK(hcl_loss(logits, tt) == doctest::Approx(oracle / 2).epsilon(1e-13));

    Tensor sharp({1, w2 + 1, h2, 1, 1}, -400.0);
    sharp.data[2 * h2 + 0] = 400.0;
    sharp.data[3 * h2 + 1] = 400.0;
    CHECK(hcl_loss(sharp, std::vector<GridTarget>{tt[0]}) < 1e-300);

    std::vector<GridTarget> bad{{1, h2, 1, w2, {4, 0}, 0}};
    CHECK_THROWS_AS(hcl_loss(Tensor({1, w2 + 1, h2, 1, 1}), bad), Error);
}

TEST_CASE("locator gradient rows sum to zero") {
    Rng rng(3);
    const ModelConfig cfg = small_config();
    Tensor logits({2, cfg.w + 1, cfg.h, cfg.C, cfg.n});
    logits.data = random_values(logits.size(), rng, 4.0);
    const std::vector<GridTarget> targets{random_target(cfg, rng), random_target(cfg, rng)};
    Tensor grad;
    hcl_loss(logits, targets, &grad);
    const int inner = cfg.h * cfg.C * cfg.n;
    for (int b = 0; b < 2; ++b) {
        for (int r = 0; r < inner; ++r) {
            double s = 0.0;
            for (int c = 0; c <= cfg.w; ++c) s += grad.data[(b * (cfg.w + 1) + c) * inner + r];
            CHECK(std::abs(s) <= 1e-15);
        }
    }
}

TEST_CASE("group loss values") {
    const std::vector<double> uniform{0.2, 0.2, 0.2};
    CHECK(pi_loss(uniform, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    const std::vector<double> v{1.0, 2.0, 3.0};
    CHECK(pi_loss(v, 2) == doctest::Approx(ce_oracle(v, 2)).epsilon(1e-14));
    CHECK(pi_loss(v, 2) == doctest::Approx(0.40760596444437).epsilon(1e-12));
    CHECK(pi_loss(std::vector<double>{-300.0, 300.0}, 1) < 1e-200);
    CHECK_THROWS_AS(pi_loss(v, 3), Error);
    CHECK_THROWS_AS(pi_loss(v, -1), Error);

    Tensor batch({2, 3});
    batch.data = {1.0, 2.0, 3.0, 0.0, 0.0, 0.0};
    const std::vector<int> gts{2, 0};
    CHECK(pi_loss(batch, gts) == doctest::Approx((ce_oracle(v, 2) + std::log(3.0)) / 2).epsilon(1e-14));
}

TEST_CASE("total loss") {
    CHECK(total_loss(2.0, 1.0, 0.05).l_total == doctest::Approx(2.05).epsilon(1e-15));
    CHECK(total_loss(2.0, 1.0, 0.0).l_total == 2.0);
    CHECK(total_loss(2.5, 0.0, 0.05).l_total == 2.5);
    const LossBreakdown l = total_loss(1.25, 0.75, 0.05);
    CHECK(l.l_hcl == 1.25);
    CHECK(l.l_pi == 0.75);
    CHECK(l.lambda == 0.05);
}

TEST_CASE("permuting groups consistently leaves the loss unchanged") {
    const ModelConfig cfg = small_config();
    Rng rng(12);
    Tensor logits({2, cfg.w + 1, cfg.h, cfg.C, cfg.n});
    logits.data = random_values(logits.size(), rng, 2.0);
    Tensor groups({2, cfg.n});
    groups.data = random_values(groups.size(), rng, 2.0);
    std::vector<GridTarget> targets{random_target(cfg, rng), random_target(cfg, rng)};
    std::vector<int> gts{targets[0].gt_group, targets[1].gt_group};

    Tensor pl = logits, pg = groups;
    std::vector<GridTarget> pt = targets;
    std::vector<int> pgts = gts;
    const int perm[2] = {1, 0};
    for (std::size_t e = 0; e < logits.size(); e += cfg.n)
        for (int k = 0; k < cfg.n; ++k) pl.data[e + perm[k]] = logits.data[e + k];
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < cfg.n; ++k) pg.data[b * cfg.n + perm[k]] = groups.data[b * cfg.n + k];
        for (int k = 0; k < cfg.n; ++k)
            for (int j = 0; j < cfg.h; ++j)
                for (int i = 0; i < cfg.C; ++i) pt[b].at(perm[k], j, i) = targets[b].at(k, j, i);
        pgts[b] = perm[gts[b]];
    }
    CHECK(hcl_loss(pl, pt) == doctest::Approx(hcl_loss(logits, targets)).epsilon(1e-14));
    CHECK(pi_loss(pg, pgts) == doctest::Approx(pi_loss(groups, gts)).epsilon(1e-14));
}

TEST_CASE("gradient check on the two-head model") {
    const ModelConfig cfg = small_config();
    for (auto backend : {kernels::Backend::Reference, kernels::Backend::Parallel}) {
        const Model model(cfg, backend);
        const ModelParams params = model.init(21);
        Rng rng(22);
        const Batch batch = random_batch(cfg, 3, rng);
        for (double lambda : {0.0, 0.05}) {
            const GradCheckResult r = finite_diff_check(model, params, batch, lambda);
            CHECK(r.max_rel_error <= 1e-4);
            CHECK(r.checked >= 200);
        }
    }
}

TEST_CASE("gradient check with identity activations and no pooling") {
    ModelConfig cfg = small_config();
    cfg.stages = {{3, 1, 2, Activation::Identity}, {5, 2, 3}};
    cfg.feature_activation = Activation::Identity;
    const Model model(cfg);
    Rng rng(31);
    const Batch batch = random_batch(cfg, 2, rng);
    CHECK(finite_diff_check(model, model.init(32), batch, 0.05).max_rel_error <= 1e-4);
}

TEST_CASE("linear-only model matches finite differences closely") {
    ModelConfig cfg = small_config();
    cfg.stages.clear();
    cfg.feature_activation = Activation::Identity;
    const Model model(cfg);
    Rng rng(41);
    const Batch batch = random_batch(cfg, 2, rng);
    CHECK(finite_diff_check(model, model.init(42), batch, 0.05, 1e-6, 1e-4, 400).max_rel_error <= 1e-8);
}

TEST_CASE("gradient check of a fully frozen model is zero") {
    const ModelConfig cfg = small_config();
    const Model model(cfg);
    ModelParams params = model.init(1);
    for (auto g : {ParamGroup::Backbone, ParamGroup::HclHead, ParamGroup::PiHead}) params.set_frozen(g, true);
    Rng rng(5);
    const GradCheckResult r = finite_diff_check(model, params, random_batch(cfg, 2, rng), 0.05);
    CHECK(r.max_rel_error == 0.0);
    CHECK(r.checked == 0);
}

TEST_CASE("frozen groups and lambda zero give zero gradients") {
    const ModelConfig cfg = small_config();
    const Model model(cfg);
    ModelParams params = model.init(6);
    Rng rng(7);
    const Batch batch = random_batch(cfg, 2, rng);
    Gradients g;
    loss_and_gradients(model, params, batch, 0.0, g);
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (params.tensors[i].group != ParamGroup::PiHead) continue;
        for (double v : g[i].data) CHECK(v == 0.0);
    }
    params.set_frozen(ParamGroup::Backbone, true);
    loss_and_gradients(model, params, batch, 0.05, g);
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        const bool backbone = params.tensors[i].group == ParamGroup::Backbone;
        const bool any = std::any_of(g[i].data.begin(), g[i].data.end(), [](double v) { return v != 0.0; });
        CHECK(any != backbone);
    }
}

TEST_CASE("non-finite loss is a numeric error") {
    const ModelConfig cfg = small_config();
    const Model model(cfg);
    ModelParams params = model.init(6);
    params.at("hcl.bias").data[0] = std::numeric_limits<double>::infinity();
    Rng rng(7);
    Gradients g;
    try {
        loss_and_gradients(model, params, random_batch(cfg, 2, rng), 0.05, g);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("cosine learning rate") {
    CHECK(cosine_lr(0.0, 60, 4e-4) == 4e-4);
    CHECK(std::abs(cosine_lr(60.0, 60, 4e-4)) <= 1e-20);
    CHECK(cosine_lr(30.0, 60, 4e-4) == doctest::Approx(2e-4).epsilon(1e-14));
    CHECK(cosine_lr(15.0, 60, 1.0) == doctest::Approx((1.0 + std::cos(M_PI / 4.0)) / 2.0).epsilon(1e-14));
    CHECK_THROWS_AS(cosine_lr(-0.1, 60, 1.0), Error);
    CHECK_THROWS_AS(cosine_lr(60.1, 60, 1.0), Error);
}

TEST_CASE("adam updates") {
    ModelConfig cfg = small_config();
    cfg.stages.clear();
    const Model model(cfg);
    ModelParams params = model.init(2);
    const ModelParams before = params;
    AdamState state = AdamState::for_params(params);
    Gradients zero = zeros_like(params);
    adam_step(params, zero, state, {0.01, 0.01, 0.01});
    for (std::size_t i = 0; i < params.tensors.size(); ++i) CHECK(params.tensors[i].value == before.tensors[i].value);

    params = before;
    state = AdamState::for_params(params);
    Gradients g = zeros_like(params);
    g[0].data[0] = 3.0;
    g[0].data[1] = -0.5;
    adam_step(params, g, state, {0.01, 0.01, 0.01});
    const double d0 = params.tensors[0].value.data[0] - before.tensors[0].value.data[0];
    const double d1 = params.tensors[0].value.data[1] - before.tensors[0].value.data[1];
    CHECK(d0 == doctest::Approx(-0.01).epsilon(1e-8));
    CHECK(d1 == doctest::Approx(0.01).epsilon(1e-7));
    adam_step(params, g, state, {0.01, 0.01, 0.01});
    const double d0b = params.tensors[0].value.data[0] - before.tensors[0].value.data[0];
    CHECK(d0b < d0);
    CHECK(d0b == doctest::Approx(-0.02).epsilon(1e-7));

    params = before;
    state = AdamState::for_params(params);
    params.set_frozen(ParamGroup::Backbone, true);
    Rng rng(1);
    for (Tensor& t : g) t.data = random_values(t.size(), rng);
    for (int s = 0; s < 5; ++s) adam_step(params, g, state, {0.01, 0.01, 0.01});
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (params.tensors[i].group == ParamGroup::Backbone) CHECK(params.tensors[i].value == before.tensors[i].value);
        else CHECK_FALSE(params.tensors[i].value == before.tensors[i].value);
    }
}

TEST_CASE("adam rejects non-finite updates") {
    ModelConfig cfg = small_config();
    cfg.stages.clear();
    const Model model(cfg);
    ModelParams params = model.init(2);
    AdamState state = AdamState::for_params(params);
    Gradients g = zeros_like(params);
    g[1].data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(params, g, state, {0.01, 0.01, 0.01}), Error);
}

TEST_CASE("schedule milestones scale with the epoch budget") {
    TrainSchedule s;
    s.epochs = 20;
    CHECK(s.backbone_unfreeze_epoch() == 1);
    CHECK(s.pi_unfreeze_epoch() == 3);
    CHECK(s.lambda_at(2) == 0.0);
    CHECK(s.lambda_at(3) == 0.05);
    s.epochs = 60;
    CHECK(s.backbone_unfreeze_epoch() == 3);
    CHECK(s.pi_unfreeze_epoch() == 9);
    s.epochs = 100;
    CHECK(s.backbone_unfreeze_epoch() == 5);
    CHECK(s.pi_unfreeze_epoch() == 15);

    TrainSchedule bad;
    bad.unfreeze_backbone_fraction = 0.2;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = {};
    bad.lambda = -1.0;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = {};
    bad.unfreeze_pi_fraction = 1.0;
    CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("parallel kernels match the reference") {
    Rng rng(77);
    const kernels::ConvShape shapes[] = {{2, 3, 9, 11, 4, 3, 2, 1}, {1, 2, 8, 8, 5, 5, 1, 2}, {3, 1, 7, 6, 2, 1, 1, 0}};
    for (const auto& s : shapes) {
        const std::size_t in_n = static_cast<std::size_t>(s.batch) * s.in_c * s.in_h * s.in_w;
        const std::size_t out_n = static_cast<std::size_t>(s.batch) * s.out_c * s.out_h() * s.out_w();
        const auto in = random_values(in_n, rng);
        const auto wt = random_values(static_cast<std::size_t>(s.out_c) * s.in_c * s.kernel * s.kernel, rng);
        const auto bias = random_values(s.out_c, rng);
        const auto d_out = random_values(out_n, rng);
        std::vector<double> a(out_n), b(out_n);
        kr::conv2d_forward(s, in, wt, bias, a);
        kp::conv2d_forward(s, in, wt, bias, b);
        CHECK(max_abs_diff(a, b) <= 1e-12);
        std::vector<double> da(in_n, 9.0), db(in_n, -9.0);
        kr::conv2d_backward_input(s, d_out, wt, da);
        kp::conv2d_backward_input(s, d_out, wt, db);
        CHECK(max_abs_diff(da, db) <= 1e-12);
        std::vector<double> wa(wt.size(), 1.0), wb(wt.size(), 2.0), ba(bias.size(), 3.0), bb(bias.size(), 4.0);
        kr::conv2d_backward_params(s, in, d_out, wa, ba);
        kp::conv2d_backward_params(s, in, d_out, wb, bb);
        CHECK(max_abs_diff(wa, wb) <= 1e-12);
        CHECK(max_abs_diff(ba, bb) <= 1e-12);
    }

    const kernels::LinearShape ls{5, 17, 9};
    const auto x = random_values(5 * 17, rng), w = random_values(9 * 17, rng), bias = random_values(9, rng);
    const auto dy = random_values(5 * 9, rng);
    std::vector<double> ya(45), yb(45), dxa(85, 1.0), dxb(85, 2.0), dwa(153, 1.0), dwb(153), dba(9), dbb(9, 5.0);
    kr::linear_forward(ls, x, w, bias, ya);
    kp::linear_forward(ls, x, w, bias, yb);
    CHECK(max_abs_diff(ya, yb) <= 1e-12);
    kr::linear_backward_input(ls, dy, w, dxa);
    kp::linear_backward_input(ls, dy, w, dxb);
    CHECK(max_abs_diff(dxa, dxb) <= 1e-12);
    kr::linear_backward_params(ls, x, dy, dwa, dba);
    kp::linear_backward_params(ls, x, dy, dwb, dbb);
    CHECK(max_abs_diff(dwa, dwb) <= 1e-12);
    CHECK(max_abs_diff(dba, dbb) <= 1e-12);

    auto ra = random_values(200, rng), rb = ra;
    kr::relu_forward(ra);
    kp::relu_forward(rb);
    CHECK(ra == rb);
    auto ga = random_values(200, rng), gb = ga;
    kr::relu_backward(ra, ga);
    kp::relu_backward(rb, gb);
    CHECK(ga == gb);

    const auto pin = random_values(3 * 7 * 9, rng);
    std::vector<double> pa(3 * 3 * 4), pb(3 * 3 * 4);
    std::vector<std::int32_t> ia(pa.size()), ib(pb.size());
    kr::maxpool2_forward(3, 7, 9, pin, pa, ia);
    kp::maxpool2_forward(3, 7, 9, pin, pb, ib);
    CHECK(pa == pb);
    CHECK(ia == ib);
    const auto pd = random_values(pa.size(), rng);
    std::vector<double> qa(pin.size(), 1.0), qb(pin.size(), 2.0);
    kr::maxpool2_backward(3, 7, 9, pd, ia, qa);
    kp::maxpool2_backward(3, 7, 9, pd, ib, qb);
    CHECK(qa == qb);
}

TEST_CASE("parallel model results do not depend on the thread count") {
    const ModelConfig cfg = small_config();
    const Model model(cfg, kernels::Backend::Parallel);
    const ModelParams params = model.init(13);
    Rng rng(14);
    const Batch batch = random_batch(cfg, 4, rng);
    const int saved = omp_get_max_threads();
    Gradients g1, g4;
    omp_set_num_threads(1);
    const LossBreakdown l1 = loss_and_gradients(model, params, batch, 0.05, g1);
    omp_set_num_threads(4);
    const LossBreakdown l4 = loss_and_gradients(model, params, batch, 0.05, g4);
    omp_set_num_threads(saved);
    CHECK(l1.l_total == l4.l_total);
    CHECK(g1 == g4);

    const Model ref(cfg, kernels::Backend::Reference);
    Gradients gr;
    const LossBreakdown lr = loss_and_gradients(ref, params, batch, 0.05, gr);
    CHECK(lr.l_total == doctest::Approx(l1.l_total).epsilon(1e-12));
    for (std::size_t i = 0; i < gr.size(); ++i) CHECK(max_abs_diff(gr[i].data, g1[i].data) <= 1e-12);
}
