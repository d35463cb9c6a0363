#include <doctest.h>

#include <algorithm>
#include <set>

#include "osda/bank.hpp"
#include "support.hpp"

using namespace osda;
using namespace osda::testing;

namespace {

std::vector<BankEntry> make_seeds(int n, int dim, uint64_t seed) {
    Rng rng(seed, 1);
    std::vector<BankEntry> seeds(n);
    for (int i = 0; i < n; ++i) {
        seeds[i].sample_id = i;
        seeds[i].z = random_nonzero_vec(dim, rng, 2.0);
        seeds[i].p = random_prob_vec(4, rng);
    }
    return seeds;
}

}  // namespace

TEST_CASE("bank_create sampling contract") {
    const auto seeds = make_seeds(10, 3, 5);

    SUBCASE("M = N keeps every sample exactly once") {
        Rng rng(1, Stream::kBankInit);
        const MemoryBank bank = bank_create(seeds, 10, rng);
        std::set<int> ids;
        for (const auto& e : bank.entries) ids.insert(e.sample_id);
        CHECK(ids.size() == 10);
    }
    SUBCASE("M = 1 draws a single entry") {
        Rng rng(2, Stream::kBankInit);
        const MemoryBank bank = bank_create(seeds, 1, rng);
        CHECK(bank.size() == 1);
    }
    SUBCASE("fixed seed draws the same members every run") {
        Rng rng_a(3, Stream::kBankInit);
        Rng rng_b(3, Stream::kBankInit);
        const MemoryBank a = bank_create(seeds, 4, rng_a);
        const MemoryBank b = bank_create(seeds, 4, rng_b);
        for (int i = 0; i < 4; ++i) CHECK(a.entries[i].sample_id == b.entries[i].sample_id);
    }
    SUBCASE("M > N raises") {
        Rng rng(4, Stream::kBankInit);
        CHECK_THROWS_AS(bank_create(seeds, 11, rng), InsufficientSamples);
    }
}

TEST_CASE("bank_refresh rewrites member contents with the momentum model") {
    Rng model_rng(6, Stream::kPretrain);
    Model momentum;
    momentum.extractor = make_extractor(3, {8}, 5, model_rng);
    momentum.classifier = make_classifier(5, 4, model_rng);

    auto seeds = make_seeds(8, 3, 7);
    Rng rng(8, Stream::kBankInit);
    MemoryBank bank = bank_create(seeds, 8, rng);

    SUBCASE("empty batch leaves the bank unchanged") {
        const auto before = bank.entries;
        bank_refresh(bank, momentum, {});
        for (int i = 0; i < bank.size(); ++i) {
            CHECK(bank.entries[i].z == before[i].z);
            CHECK(bank.entries[i].p == before[i].p);
        }
    }
    SUBCASE("refreshed entries equal a direct forward pass") {
        Rng in_rng(9, 2);
        const Vec x = random_vec(3, in_rng);
        bank_refresh(bank, momentum, {{2, x}});
        const ForwardResult r = forward(momentum, x);
        CHECK(bank.entries[bank.index.at(2)].z == r.z);
        CHECK(bank.entries[bank.index.at(2)].p == r.p);
    }
    SUBCASE("non-member ids are ignored, membership never changes") {
        Rng in_rng(10, 2);
        const auto ids_before = bank.index;
        bank_refresh(bank, momentum, {{99, random_vec(3, in_rng)}});
        CHECK(bank.index == ids_before);
        CHECK(!bank.contains(99));
    }
}

TEST_CASE("neighbors retrieval") {
    const auto seeds = make_seeds(50, 4, 11);
    Rng rng(12, Stream::kBankInit);
    const MemoryBank bank = bank_create(seeds, 50, rng);

    SUBCASE("a stored feature retrieves its own entry first") {
        const auto& probe = bank.entries[17];
        const auto nn = neighbors(bank, probe.z, 1);
        CHECK(nn[0].first == probe.sample_id);
    }
    SUBCASE("n = M returns the whole bank sorted by distance") {
        Rng q_rng(13, 2);
        const Vec z = random_nonzero_vec(4, q_rng);
        const auto nn = neighbors(bank, z, 50);
        CHECK(nn.size() == 50);
        for (size_t i = 1; i < nn.size(); ++i) {
            const double d_prev = cosine_distance(z, bank.entries[bank.index.at(nn[i - 1].first)].z);
            const double d_cur = cosine_distance(z, bank.entries[bank.index.at(nn[i].first)].z);
            CHECK(d_prev <= d_cur + 1e-15);
        }
    }
    SUBCASE("matches an exhaustive scan oracle") {
        Rng q_rng(14, 2);
        for (int trial = 0; trial < 25; ++trial) {
            const Vec z = random_nonzero_vec(4, q_rng, 2.0);
            const auto nn = neighbors(bank, z, 5);
            // Oracle: full scan with (distance, id) ordering.
            std::vector<std::pair<double, int>> all;
            for (const auto& e : bank.entries) all.emplace_back(cosine_distance(z, e.z), e.sample_id);
            std::sort(all.begin(), all.end());
            for (int i = 0; i < 5; ++i) CHECK(nn[i].first == all[i].second);
        }
    }
    SUBCASE("result is invariant to bank storage order") {
        auto shuffled = seeds;
        std::reverse(shuffled.begin(), shuffled.end());
        Rng rng2(15, Stream::kBankInit);
        const MemoryBank bank2 = bank_create(shuffled, 50, rng2);
        Rng q_rng(16, 2);
        for (int trial = 0; trial < 25; ++trial) {
            const Vec z = random_nonzero_vec(4, q_rng, 2.0);
            const auto a = neighbors(bank, z, 7);
            const auto b = neighbors(bank2, z, 7);
            for (int i = 0; i < 7; ++i) CHECK(a[i].first == b[i].first);
        }
    }
    SUBCASE("n > M raises") {
        Rng q_rng(17, 2);
        CHECK_THROWS_AS(neighbors(bank, random_nonzero_vec(4, q_rng), 51), InsufficientSamples);
    }
}

TEST_CASE("temporal queue ring semantics") {
    TemporalQueue q(3, 10);
    SUBCASE("fresh queue has no history") { CHECK(q.history(0) == nullptr); }
    SUBCASE("eviction keeps the most recent tau_hist labels") {
        for (int label : {1, 2, 3, 4}) queue_push(q, 0, label);
        REQUIRE(q.history(0) != nullptr);
        CHECK(*q.history(0) == std::vector<int>{2, 3, 4});
    }
    SUBCASE("repeated pushes of one label fill the buffer with it") {
        for (int i = 0; i < 3; ++i) queue_push(q, 1, 7);
        CHECK(*q.history(1) == std::vector<int>{7, 7, 7});
    }
    SUBCASE("out-of-range labels are rejected") {
        CHECK_THROWS_AS(queue_push(q, 0, 10), InvalidLabel);
        CHECK_THROWS_AS(queue_push(q, 0, -1), InvalidLabel);
    }
}

TEST_CASE("shared_history semantics") {
    SUBCASE("intersecting histories") {
        TemporalQueue q(3, 10);
        for (int label : {1, 2, 3}) queue_push(q, 0, label);
        for (int label : {3, 5, 5}) queue_push(q, 1, label);
        CHECK(shared_history(q, 0, 1));
        CHECK(shared_history(q, 1, 0));
    }
    SUBCASE("disjoint histories") {
        TemporalQueue q(2, 10);
        for (int label : {1, 1}) queue_push(q, 0, label);
        for (int label : {2, 2}) queue_push(q, 1, label);
        CHECK(!shared_history(q, 0, 1));
    }
    SUBCASE("unknown ids have empty history") {
        TemporalQueue q(2, 10);
        queue_push(q, 0, 1);
        CHECK(!shared_history(q, 0, 42));
        CHECK(!shared_history(q, 42, 43));
    }
    SUBCASE("tau_hist = 1 reduces to current-pseudo-labels-equal") {
        TemporalQueue q(1, 10);
        for (int id = 0; id < 6; ++id) {
            queue_push(q, id, id % 3);
            queue_push(q, id, (id + 1) % 3);  // only this survives
        }
        for (int a = 0; a < 6; ++a) {
            for (int b = 0; b < 6; ++b) {
                CHECK(shared_history(q, a, b) == ((a + 1) % 3 == (b + 1) % 3));
            }
        }
    }
    SUBCASE("same_epoch mode compares positionally") {
        TemporalQueue q(3, 10, ExclusionMode::kSameEpoch);
        for (int label : {1, 2, 3}) queue_push(q, 0, label);
        for (int label : {3, 1, 2}) queue_push(q, 1, label);  // rotated: no positional match
        CHECK(!shared_history(q, 0, 1));
        for (int label : {9, 9, 3}) queue_push(q, 2, label);  // matches at the last epoch
        CHECK(shared_history(q, 0, 2));
    }
}

TEST_CASE("shared_history equals a naive double-loop oracle and is symmetric") {
    Rng rng(18, 1);
    TemporalQueue q(5, 8);
    std::vector<std::vector<int>> raw(30);
    for (int id = 0; id < 30; ++id) {
        const int pushes = 1 + rng.uniform_int(8);
        for (int k = 0; k < pushes; ++k) {
            const int label = rng.uniform_int(8);
            raw[id].push_back(label);
            queue_push(q, id, label);
        }
        while (raw[id].size() > 5) raw[id].erase(raw[id].begin());
    }
    for (int trial = 0; trial < 100; ++trial) {
        const int a = rng.uniform_int(30);
        const int b = rng.uniform_int(30);
        bool naive = false;
        for (int la : raw[a]) {
            for (int lb : raw[b]) {
                if (la == lb) naive = true;
            }
        }
        CHECK(shared_history(q, a, b) == naive);
        CHECK(shared_history(q, a, b) == shared_history(q, b, a));
    }
}
