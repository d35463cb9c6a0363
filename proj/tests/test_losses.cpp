#include <doctest.h>

#include <cmath>

#include "osda/losses.hpp"
#include "scenario.hpp"
#include "support.hpp"

using namespace osda;
using namespace osda::testing;

TEST_CASE("cross_entropy_loss value and finite-difference gradient") {
    Rng rng(1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(6);
        Vec logits = random_vec(n, rng, 2.0);
        const int y = rng.uniform_int(n);

        const CeResult base = cross_entropy_loss(softmax_temp(logits, 1.0), y);
        CHECK(base.loss >= 0.0);

        const FdReport rep = fd_check(
            logits, [] {},
            [&] { return cross_entropy_loss(softmax_temp(logits, 1.0), y).loss; }, base.dlogits);
        CHECK(rep.max_rel_err <= 1e-4);
    }
}

TEST_CASE("nl_classification_loss values") {
    Rng rng(2, Stream::kComplementary);
    SUBCASE("suppressed complementary class gives zero loss") {
        // C = 2, y_bar = 0 forces y_tilde = 1.
        const NlClsResult r = nl_classification_loss({1.0, 0.0}, 0, rng);
        CHECK(r.y_tilde == 1);
        CHECK(r.loss == doctest::Approx(0.0));
    }
    SUBCASE("uniform two-class case") {
        const NlClsResult r = nl_classification_loss({0.5, 0.5}, 0, rng);
        CHECK(r.y_tilde == 1);
        CHECK(r.loss == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("complementary label never equals the pseudo-label") {
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + rng.uniform_int(8);
            const int y_bar = rng.uniform_int(n);
            const NlClsResult r = nl_classification_loss(random_prob_vec(n, rng), y_bar, rng);
            CHECK(r.y_tilde != y_bar);
            CHECK(r.y_tilde >= 0);
            CHECK(r.y_tilde < n);
        }
    }
    SUBCASE("loss depends on p_sa only through the complementary entry") {
        // Two distributions sharing p[y_tilde]; identical rng state draws the
        // same y_tilde for both calls.
        Rng rng_a(7, Stream::kComplementary);
        Rng rng_b(7, Stream::kComplementary);
        const ProbVec p1 = {0.2, 0.5, 0.3};
        const ProbVec p2 = {0.45, 0.5, 0.05};
        const NlClsResult a = nl_classification_loss(p1, 0, rng_a);
        const NlClsResult b = nl_classification_loss(p2, 0, rng_b);
        REQUIRE(a.y_tilde == b.y_tilde);
        if (a.y_tilde == 1) CHECK(a.loss == doctest::Approx(b.loss));
    }
}

TEST_CASE("nl_classification_loss gradient matches finite differences") {
    Rng rng(3, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(6);
        Vec logits = random_vec(n, rng, 2.0);
        const int y_bar = rng.uniform_int(n);

        Rng draw_rng(100 + trial, Stream::kComplementary);
        const NlClsResult base =
            nl_classification_loss(softmax_temp(logits, 1.0), y_bar, draw_rng);
        const int y_tilde = base.y_tilde;

        const FdReport rep = fd_check(
            logits, [] {},
            [&] {
                const ProbVec p = softmax_temp(logits, 1.0);
                return -std::log(std::max(1.0 - p[y_tilde], 1e-7));
            },
            base.dlogits);
        CHECK(rep.max_rel_err <= 1e-4);
    }
}

TEST_CASE("exclusion_set equals a naive double loop") {
    Rng rng(4, 1);
    TemporalQueue tq(3, 6);
    for (int id = 0; id < 25; ++id) {
        const int pushes = 1 + rng.uniform_int(5);
        for (int k = 0; k < pushes; ++k) queue_push(tq, id, rng.uniform_int(6));
    }
    std::vector<int> queue_ids;
    for (int j = 0; j < 20; ++j) queue_ids.push_back(rng.uniform_int(25));

    for (int query = 0; query < 25; ++query) {
        const std::vector<int> got = exclusion_set(queue_ids, query, tq);
        std::vector<int> naive;
        for (int j = 0; j < 20; ++j) {
            if (queue_ids[j] == query) continue;
            if (!shared_history(tq, query, queue_ids[j])) naive.push_back(j);
        }
        CHECK(got == naive);
    }

    SUBCASE("all entries sharing the query label leave the set empty") {
        TemporalQueue tq1(1, 4);
        for (int id = 0; id < 5; ++id) queue_push(tq1, id, 2);
        const std::vector<int> ids = {1, 2, 3, 4};
        CHECK(exclusion_set(ids, 0, tq1).empty());
    }
    SUBCASE("fresh queues exclude nothing but the query itself") {
        TemporalQueue tq2(3, 4);
        const std::vector<int> ids = {0, 1, 2, 3};
        CHECK(exclusion_set(ids, 0, tq2) == std::vector<int>{1, 2, 3});
    }
}

namespace {

KeyQueue make_key_queue(int n, int dim, Rng& rng) {
    KeyQueue kq;
    kq.capacity = n + 8;
    for (int i = 0; i < n; ++i) kq.push(i, l2_normalize(random_nonzero_vec(dim, rng)));
    return kq;
}

}  // namespace

TEST_CASE("nl_infonce_loss values and limits") {
    SUBCASE("two identical admissible keys give ratio 1/2") {
        KeyQueue kq;
        kq.capacity = 4;
        const Vec k = l2_normalize({1, 2, 3});
        kq.push(0, k);
        kq.push(1, k);
        Rng rng(5, Stream::kNegativeKeys);
        const NlInfoNceResult r =
            nl_infonce_loss(l2_normalize({3, 2, 1}), kq, {0, 1}, 0.07, rng);
        CHECK(!r.skipped);
        CHECK(r.loss == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("orthogonal negative with strongly aligned others drives the loss to zero") {
        KeyQueue kq;
        kq.capacity = 4;
        const Vec q = {1, 0, 0};
        kq.push(0, Vec{0, 1, 0});  // orthogonal: the chosen negative
        kq.push(1, Vec{1, 0, 0});  // aligned
        kq.push(2, Vec{1, 0, 0});
        const NlInfoNceResult r = nl_infonce_eval(q, kq, {0, 1, 2}, 0, 0.07);
        CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-5));
    }
    SUBCASE("fewer than two admissible negatives is a skip") {
        KeyQueue kq;
        kq.capacity = 4;
        kq.push(0, Vec{1, 0, 0});
        Rng rng(6, Stream::kNegativeKeys);
        CHECK(nl_infonce_loss({1, 0, 0}, kq, {0}, 0.07, rng).skipped);
        CHECK(nl_infonce_loss({1, 0, 0}, kq, {}, 0.07, rng).skipped);
    }
    SUBCASE("loss decreases as q.k_minus decreases, other products fixed") {
        // Keys orthogonal to the probe direction stay untouched while the
        // negative key rotates away from q.
        Rng rng(7, 1);
        KeyQueue kq;
        kq.capacity = 8;
        kq.push(0, Vec{1, 0, 0, 0});       // k_minus, aligned with q initially
        kq.push(1, Vec{0, 1, 0, 0});
        kq.push(2, Vec{0, 0, 1, 0});
        const Vec q = {1, 0, 0, 0};
        double prev = std::numeric_limits<double>::infinity();
        for (double c : {0.9, 0.5, 0.0, -0.5, -0.9}) {
            kq.keys[0] = Vec{c, 0, 0, std::sqrt(1.0 - c * c)};  // q.k_- = c
            const NlInfoNceResult r = nl_infonce_eval(q, kq, {0, 1, 2}, 0, 0.07);
            CHECK(r.loss < prev);
            prev = r.loss;
        }
    }
}

TEST_CASE("nl_infonce_loss gradient matches finite differences") {
    Rng rng(8, 1);
    int with_positive = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 4 + rng.uniform_int(4);
        const int n_keys = 3 + rng.uniform_int(5);
        KeyQueue kq = make_key_queue(n_keys, dim, rng);
        std::vector<int> admissible;
        for (int j = 0; j < n_keys; ++j) {
            if (rng.uniform01() < 0.8) admissible.push_back(j);
        }
        if (admissible.size() < 2) {
            admissible = {0, 1};
        }
        Vec q = l2_normalize(random_nonzero_vec(dim, rng));
        const int k_minus = rng.uniform_int(static_cast<int>(admissible.size()));
        const bool use_positive = trial % 2 == 1;
        const Vec pos_key = l2_normalize(random_nonzero_vec(dim, rng));
        const Vec* pos = use_positive ? &pos_key : nullptr;
        with_positive += use_positive;

        const NlInfoNceResult base = nl_infonce_eval(q, kq, admissible, k_minus, 0.07, pos);
        REQUIRE(!base.skipped);
        const FdReport rep = fd_check(
            q, [] {},
            [&] { return nl_infonce_eval(q, kq, admissible, k_minus, 0.07, pos).loss; },
            base.dq);
        CHECK(rep.max_rel_err <= 1e-4);
    }
    CHECK(with_positive == 50);
}

TEST_CASE("diversity_loss values") {
    SUBCASE("uniform predictions reach the global minimum -ln C") {
        const std::vector<ProbVec> batch(3, ProbVec{0.25, 0.25, 0.25, 0.25});
        CHECK(diversity_loss(batch).loss == doctest::Approx(-std::log(4.0)));
    }
    SUBCASE("identical one-hot predictions reach the collapse maximum 0") {
        const std::vector<ProbVec> batch(5, ProbVec{0, 1, 0});
        CHECK(diversity_loss(batch).loss == doctest::Approx(0.0));
    }
    SUBCASE("two opposing one-hot samples give -ln 2") {
        const std::vector<ProbVec> batch = {{1, 0}, {0, 1}};
        CHECK(diversity_loss(batch).loss == doctest::Approx(-std::log(2.0)));
    }
    SUBCASE("empty batch raises") {
        CHECK_THROWS_AS(diversity_loss({}), EmptyBatch);
    }
}

TEST_CASE("diversity_loss gradient matches finite differences") {
    Rng rng(9, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(5);
        const int b = 1 + rng.uniform_int(5);
        std::vector<Vec> logits(b);
        for (auto& l : logits) l = random_vec(n, rng, 2.0);

        auto compute = [&] {
            std::vector<ProbVec> p(b);
            for (int s = 0; s < b; ++s) p[s] = softmax_temp(logits[s], 1.0);
            return diversity_loss(p);
        };
        const DiversityResult base = compute();
        for (int s = 0; s < b; ++s) {
            const FdReport rep = fd_check(
                logits[s], [] {}, [&] { return compute().loss; }, base.dlogits[s]);
            CHECK(rep.max_rel_err <= 1e-4);
        }
    }
}

// ---------------------------------------------------------------------------
// Composite objective (shared scenario builder in scenario.hpp)

TEST_CASE("composite gradient matches finite differences through the whole network") {
    int total_selected = 0;
    int total_ctr_active = 0;
    for (uint64_t seed = 1; seed <= 8; ++seed) {
        Scenario s = make_scenario(seed);
        RngPack rngs(seed);
        const BatchPlan plan = make_batch_plan(s.live, s.momentum, s.batch, s.bank, s.queue,
                                               s.key_queue, s.cfg, 1.0, rngs);
        auto [breakdown, grads] = evaluate_plan(s.live, plan, s.cfg);
        total_selected += breakdown.n_selected;
        total_ctr_active += static_cast<int>(plan.samples.size()) - breakdown.n_ctr_skipped;

        const FdReport rep = fd_check_model(
            s.live, [&] { return evaluate_plan(s.live, plan, s.cfg).first.total; },
            flatten_grads(grads));
        CHECK(rep.max_rel_err <= 1e-4);
    }
    // The scenarios must actually exercise both loss paths.
    CHECK(total_selected > 0);
    CHECK(total_ctr_active > 0);
}

TEST_CASE("loss breakdown is linear in the gammas") {
    Scenario s = make_scenario(3);
    RngPack rngs(3);
    const BatchPlan plan = make_batch_plan(s.live, s.momentum, s.batch, s.bank, s.queue,
                                           s.key_queue, s.cfg, 1.0, rngs);

    RunConfig cfg1 = s.cfg;
    const auto [b1, g1] = evaluate_plan(s.live, plan, cfg1);
    CHECK(b1.total ==
          doctest::Approx(cfg1.gamma_cls * b1.l_cls + cfg1.gamma_ctr * b1.l_ctr +
                          cfg1.gamma_div * b1.l_div)
              .epsilon(1e-12));

    RunConfig cfg2 = s.cfg;
    cfg2.gamma_cls = 0.5;
    cfg2.gamma_ctr = 2.0;
    cfg2.gamma_div = 0.25;
    const auto [b2, g2] = evaluate_plan(s.live, plan, cfg2);
    CHECK(b2.l_cls == doctest::Approx(b1.l_cls).epsilon(1e-12));
    CHECK(b2.l_ctr == doctest::Approx(b1.l_ctr).epsilon(1e-12));
    CHECK(b2.l_div == doctest::Approx(b1.l_div).epsilon(1e-12));
    CHECK(std::abs(b2.total - (0.5 * b2.l_cls + 2.0 * b2.l_ctr + 0.25 * b2.l_div)) <= 1e-9);

    RunConfig cfg3 = s.cfg;
    cfg3.gamma_ctr = 0.0;
    cfg3.gamma_div = 0.0;
    const auto [b3, g3] = evaluate_plan(s.live, plan, cfg3);
    CHECK(b3.total == doctest::Approx(cfg3.gamma_cls * b3.l_cls).epsilon(1e-12));
}

TEST_CASE("all gammas zero gives identically zero gradients") {
    Scenario s = make_scenario(4);
    s.cfg.gamma_cls = 0.0;
    s.cfg.gamma_ctr = 0.0;
    s.cfg.gamma_div = 0.0;
    RngPack rngs(4);
    const BatchPlan plan = make_batch_plan(s.live, s.momentum, s.batch, s.bank, s.queue,
                                           s.key_queue, s.cfg, 1.0, rngs);
    const auto [breakdown, grads] = evaluate_plan(s.live, plan, s.cfg);
    CHECK(breakdown.total == 0.0);
    for (double g : flatten_grads(grads)) CHECK(g == 0.0);
}
