#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mia/errors.hpp"
#include "mia/metrics.hpp"
#include "mia/report.hpp"
#include "mia/rng.hpp"

using namespace mia;

namespace {

constexpr auto M = MembershipLabel::member;
constexpr auto N = MembershipLabel::non_member;

// Pairwise reference: P(member score > non-member score) + 0.5 P(tie).
double mann_whitney(const std::vector<LabeledScore>& s) {
    double wins = 0, pairs = 0;
    for (const auto& a : s) {
        if (a.label != M) continue;
        for (const auto& b : s) {
            if (b.label != N) continue;
            pairs += 1;
            if (a.score > b.score) wins += 1;
            else if (a.score == b.score) wins += 0.5;
        }
    }
    return wins / pairs;
}

AttackOutcome decision(std::string id, MembershipLabel label, bool predicted) {
    AttackOutcome o;
    o.chunk_id = std::move(id);
    o.method = Method::decop;
    o.variant = "options=4";
    o.model_id = "m";
    o.dataset = "d";
    o.membership_label = label;
    o.score = predicted ? 1.0 : 0.0;
    o.predicted_member = predicted;
    return o;
}

// n_m members of which tp predicted, n_n non-members of which fp predicted.
std::vector<AttackOutcome> counts(int n_m, int tp, int n_n, int fp) {
    std::vector<AttackOutcome> out;
    for (int i = 0; i < n_m; ++i) out.push_back(decision("m" + std::to_string(i), M, i < tp));
    for (int i = 0; i < n_n; ++i) out.push_back(decision("n" + std::to_string(i), N, i < fp));
    return out;
}

}  // namespace

TEST_CASE("roc_auc on hand-checked inputs") {
    std::vector<LabeledScore> perfect{{"a", 0.9, M}, {"b", 0.8, M}, {"c", 0.1, N}, {"d", 0.2, N}};
    CHECK(roc_auc(perfect) == doctest::Approx(1.0));
    std::vector<LabeledScore> inverted{{"a", 0.1, M}, {"b", 0.2, M}, {"c", 0.9, N}, {"d", 0.8, N}};
    CHECK(roc_auc(inverted) == doctest::Approx(0.0));
    std::vector<LabeledScore> all_tied{{"a", 1, M}, {"b", 1, M}, {"c", 1, N}};
    CHECK(roc_auc(all_tied) == doctest::Approx(0.5));
    std::vector<LabeledScore> mixed{{"a", 0.8, M}, {"b", 0.4, M}, {"c", 0.6, N}, {"d", 0.2, N}};
    CHECK(roc_auc(mixed) == doctest::Approx(0.75));
}

TEST_CASE("roc_auc equals the pairwise Mann-Whitney statistic, ties included") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<LabeledScore> s;
        const auto n = 2 + rng.below(40);
        for (std::size_t i = 0; i < n; ++i)
            s.push_back({std::to_string(i), static_cast<double>(rng.below(6)), i % 2 ? M : N});
        CHECK(roc_auc(s) == doctest::Approx(mann_whitney(s)).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc properties") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<LabeledScore> s, shifted, flipped;
        for (int i = 0; i < 30; ++i) {
            const double v = rng.unit();
            const auto l = rng.bernoulli(0.5) ? M : N;
            s.push_back({std::to_string(i), v, l});
            shifted.push_back({std::to_string(i), 3.0 * v + 7.0, l});  // monotone transform
            flipped.push_back({std::to_string(i), -v, l});
        }
        s[0].label = M;
        s[1].label = N;
        shifted[0].label = flipped[0].label = M;
        shifted[1].label = flipped[1].label = N;
        const double a = roc_auc(s);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        CHECK(roc_auc(shifted) == doctest::Approx(a));
        CHECK(roc_auc(flipped) == doctest::Approx(1.0 - a));
    }
}

TEST_CASE("roc_auc rejects degenerate and non-finite input") {
    std::vector<LabeledScore> only_members{{"a", 1, M}, {"b", 0, M}};
    CHECK_THROWS_AS(roc_auc(only_members), DegenerateLabels);
    CHECK_THROWS_AS(roc_auc(std::vector<LabeledScore>{}), DegenerateLabels);
    std::vector<LabeledScore> nan{{"a", std::nan(""), M}, {"b", 0, N}};
    CHECK_THROWS_AS(roc_auc(nan), FatalConfigError);
}

TEST_CASE("binary decisions: AUC is the mean of TPR and 1 - FPR") {
    // Rates from the published binary attacks and their reported AUCs.
    struct Anchor {
        int tp, n_m, fp, n_n;
        const char* auc;
    };
    // 0.612/0.500 -> 0.556, 0.745/0.688 -> 0.529, 0.459/0.323 -> 0.568
    const std::vector<Anchor> anchors = {
        {612, 1000, 500, 1000, "0.556"},
        {745, 1000, 688, 1000, "0.529"},
        {459, 1000, 323, 1000, "0.568"},
    };
    for (const auto& a : anchors) {
        auto outs = counts(a.n_m, a.tp, a.n_n, a.fp);
        auto r = confusion_rates(outs);
        CHECK(r.tpr == doctest::Approx(a.tp / 1000.0));
        CHECK(r.fpr == doctest::Approx(a.fp / 1000.0));
        auto rep = compute_report(outs);
        CHECK(rep.auc == doctest::Approx((1.0 + r.tpr - r.fpr) / 2.0));
        CHECK(format_fixed3(rep.auc) == a.auc);
    }
}

TEST_CASE("confusion_rates with a score threshold") {
    std::vector<AttackOutcome> outs = counts(2, 0, 2, 0);
    outs[0].score = 0.9;
    outs[1].score = 0.2;
    outs[2].score = 0.7;
    outs[3].score = 0.1;
    outs[3].error = "NullAnswer";
    auto r = confusion_rates(outs, 0.5);
    CHECK(r.tpr == doctest::Approx(0.5));
    CHECK(r.fpr == doctest::Approx(0.5));
}

TEST_CASE("accuracy and ranking values") {
    AttackOutcome probe;
    probe.method = Method::probing;
    probe.score = 6;
    probe.reference_tokens = 12;
    probe.predicted_member = false;
    CHECK(accuracy_value(probe) == doctest::Approx(0.5));
    CHECK(ranking_value(probe) == 0.0);
    probe.score = 40;
    CHECK(accuracy_value(probe) == 1.0);

    AttackOutcome mask;
    mask.method = Method::ncq;
    mask.variant = "mask=all";
    mask.score = 0.25;
    CHECK(accuracy_value(mask) == doctest::Approx(0.25));
    CHECK(ranking_value(mask) == doctest::Approx(0.25));
    CHECK_FALSE(outcome_predicts(mask));
    mask.error = "CacheMiss";
    CHECK(accuracy_value(mask) == 0.0);
    CHECK(ranking_value(mask) == 0.0);
}

TEST_CASE("group accuracy and half-up rounding") {
    auto outs = counts(4, 3, 4, 1);
    auto g = group_accuracy(outs);
    CHECK(g.member == doctest::Approx(0.75));
    CHECK(g.non_member == doctest::Approx(0.25));
    CHECK(round_half_up(2.5) == 3);
    CHECK(round_half_up(2.49) == 2);
    CHECK(round_half_up(0.5) == 1);
    CHECK(round_half_up(3.0) == 3);
}

TEST_CASE("lcs_summary averages raw LCS per class") {
    std::vector<AttackOutcome> outs;
    for (double s : {3.0, 4.0}) {
        AttackOutcome o;
        o.chunk_id = "m" + std::to_string(s);
        o.method = Method::probing;
        o.membership_label = M;
        o.score = s;
        outs.push_back(o);
    }
    AttackOutcome n;
    n.chunk_id = "n";
    n.method = Method::probing;
    n.membership_label = N;
    n.score = 2.0;
    outs.push_back(n);
    auto l = lcs_summary(outs);
    CHECK(l.mean_member == doctest::Approx(3.5));
    CHECK(l.rounded_member == 4);
    CHECK(l.mean_nonmember == doctest::Approx(2.0));
    CHECK(l.rounded_nonmember == 2);
}

TEST_CASE("compute_report counts and rejects mixed groups") {
    auto outs = counts(3, 2, 3, 1);
    outs[5].error = "NullAnswer";
    outs[5].predicted_member.reset();
    auto r = compute_report(outs);
    CHECK(r.n_member == 3);
    CHECK(r.n_nonmember == 3);
    CHECK(r.n_errors == 1);
    REQUIRE(r.tpr.has_value());
    CHECK(*r.tpr == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(r.lcs.has_value());
    outs[1].model_id = "other";
    CHECK_THROWS_AS(compute_report(outs), MisalignedOutcomes);
}

TEST_CASE("consensus requires every method to predict member") {
    auto a = counts(2, 2, 2, 1);  // m0 m1 n0 predicted
    auto b = counts(2, 1, 2, 2);  // m0 n0 n1 predicted
    auto flags = consensus({a, b});
    CHECK(flags == std::vector<bool>{true, false, true, false});

    // alignment is by chunk id, not position
    auto shuffled = b;
    std::swap(shuffled[0], shuffled[3]);
    CHECK(consensus({a, shuffled}) == flags);

    auto missing = b;
    missing.pop_back();
    CHECK_THROWS_AS(consensus({a, missing}), MisalignedOutcomes);
    auto renamed = b;
    renamed[0].chunk_id = "zz";
    CHECK_THROWS_AS(consensus({a, renamed}), MisalignedOutcomes);
}

TEST_CASE("agreement_matrix lays out one column per model") {
    std::map<std::string, std::vector<std::vector<AttackOutcome>>> per_model;
    per_model["gpt"] = {counts(2, 2, 2, 0), counts(2, 1, 2, 0)};
    per_model["claude"] = {counts(2, 2, 2, 2)};
    auto g = agreement_matrix(per_model);
    CHECK(g.models == std::vector<std::string>{"claude", "gpt"});
    REQUIRE(g.flags.size() == 4);
    CHECK(g.chunk_ids[0] == "m0");
    CHECK(g.labels[2] == N);
    CHECK(g.flags[0] == std::vector<bool>{true, true});
    CHECK(g.flags[1] == std::vector<bool>{true, false});
    CHECK(g.flags[2] == std::vector<bool>{true, false});
    CHECK(g.flags[3] == std::vector<bool>{true, false});
}
