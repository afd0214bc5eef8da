#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hoca/dataset.hpp"

using namespace hoca;

namespace {

bool datasets_equal(const SyntheticDataset& a, const SyntheticDataset& b) {
    if (a.t != b.t || a.items.size() != b.items.size()) return false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        const Item &x = a.items[i], &y = b.items[i];
        if (x.caption != y.caption || x.rule_id != y.rule_id || x.split != y.split)
            return false;
        for (std::size_t m = 0; m < x.features.size(); ++m)
            if (x.features[m].values() != y.features[m].values()) return false;
    }
    return true;
}

} // namespace

TEST_CASE("same seed and spec generate bit-identical datasets") {
    DatasetSpec spec;
    spec.n_items = 40;
    CHECK(datasets_equal(synth_dataset(7, spec), synth_dataset(7, spec)));
    CHECK_FALSE(datasets_equal(synth_dataset(7, spec), synth_dataset(8, spec)));
}

TEST_CASE("planted items are decodable by the rule") {
    DatasetSpec spec;
    spec.n_items = 60;
    spec.correlation_strength = 1.0;
    spec.caption_len = 2;
    spec.t_range = {{4, 6}};
    auto data = synth_dataset(3, spec);
    REQUIRE(data.groups == 4);
    for (const Item& item : data.items) {
        REQUIRE(item.rule_id == 1);
        CHECK(decode_by_rule(data, item) == item.caption);
    }
}

TEST_CASE("zero correlation strength makes captions independent of features") {
    DatasetSpec spec;
    spec.n_items = 1500;
    spec.correlation_strength = 0.0;
    auto data = synth_dataset(11, spec);
    std::size_t hits = 0, total = 0;
    for (const Item& item : data.items) {
        REQUIRE(item.rule_id == 0);
        auto rule = decode_by_rule(data, item);
        for (std::size_t s = 0; s < rule.size(); ++s) {
            hits += rule[s] == item.caption[s];
            ++total;
        }
    }
    // the rule's prediction matches a random caption at the majority-class
    // rate 1/K (K = 4 content symbols here)
    const double rate = static_cast<double>(hits) / static_cast<double>(total);
    CHECK(rate > 0.25 - 0.05);
    CHECK(rate < 0.25 + 0.05);
}

TEST_CASE("empty dataset is valid") {
    DatasetSpec spec;
    spec.n_items = 0;
    auto data = synth_dataset(1, spec);
    CHECK(data.items.empty());
    CHECK(data.t.size() == 3);
}

TEST_CASE("token ids stay below the vocabulary size") {
    DatasetSpec spec;
    spec.vocab = 9;
    spec.d_raw = 10;
    spec.n_items = 50;
    auto data = synth_dataset(5, spec);
    for (const Item& item : data.items)
        for (int tok : item.caption) {
            CHECK(tok >= kReservedTokens);
            CHECK(tok < static_cast<int>(spec.vocab));
        }
}

TEST_CASE("split tags follow the configured fractions") {
    DatasetSpec spec;
    spec.n_items = 100;
    spec.val_fraction = 0.2;
    spec.test_fraction = 0.1;
    auto data = synth_dataset(2, spec);
    std::size_t tr = 0, va = 0, te = 0;
    for (const Item& item : data.items) {
        tr += item.split == Split::Train;
        va += item.split == Split::Val;
        te += item.split == Split::Test;
    }
    CHECK(tr == 70);
    CHECK(va == 20);
    CHECK(te == 10);
    CHECK(data.split_items(Split::Val).size() == 20);
}

TEST_CASE("infeasible specs are rejected with configuration errors") {
    DatasetSpec tiny_vocab;
    tiny_vocab.vocab = 6; // needs 4 reserved + 4 symbols for 3 modalities
    CHECK_THROWS_AS(synth_dataset(1, tiny_vocab), ConfigError);

    DatasetSpec tiny_d;
    tiny_d.d_raw = 5; // needs 2*2 cue dims + 4 symbol dims
    CHECK_THROWS_AS(synth_dataset(1, tiny_d), ConfigError);

    DatasetSpec short_content;
    short_content.t_range = {{2, 2}, {4, 4}, {4, 4}}; // content needs >= 4 steps
    CHECK_THROWS_AS(synth_dataset(1, short_content), ConfigError);

    DatasetSpec bad_strength;
    bad_strength.correlation_strength = 1.5;
    CHECK_THROWS_AS(synth_dataset(1, bad_strength), ConfigError);

    DatasetSpec bad_range;
    bad_range.t_range = {{5, 2}};
    CHECK_THROWS_AS(synth_dataset(1, bad_range), ConfigError);
}

TEST_CASE("temporal lengths are drawn once per dataset within the ranges") {
    DatasetSpec spec;
    spec.t_range = {{4, 4}, {3, 9}, {3, 9}};
    spec.n_items = 25;
    auto data = synth_dataset(21, spec);
    REQUIRE(data.t.size() == 3);
    CHECK(data.t[0] == 4);
    CHECK(data.t[1] >= 3);
    CHECK(data.t[1] <= 9);
    for (const Item& item : data.items)
        for (std::size_t m = 0; m < 3; ++m) CHECK(item.features[m].t() == data.t[m]);
}

TEST_CASE("two modalities use a two-group layout") {
    DatasetSpec spec;
    spec.n_modalities = 2;
    spec.d_raw = 6;
    spec.vocab = 8;
    spec.t_range = {{2, 2}, {3, 3}};
    spec.n_items = 30;
    auto data = synth_dataset(9, spec);
    CHECK(data.groups == 2);
    for (const Item& item : data.items)
        CHECK(decode_by_rule(data, item) == item.caption);
}
