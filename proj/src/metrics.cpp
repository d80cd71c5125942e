#include "mia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mia/errors.hpp"

namespace mia {

double roc_auc(std::span<const LabeledScore> scores) {
    std::vector<std::pair<double, bool>> v;
    v.reserve(scores.size());
    std::size_t pos = 0;
    for (const auto& s : scores) {
        if (!std::isfinite(s.score)) throw FatalConfigError("non-finite score for " + s.chunk_id);
        const bool member = s.label == MembershipLabel::member;
        pos += member;
        v.emplace_back(s.score, member);
    }
    const std::size_t neg = v.size() - pos;
    if (pos == 0 || neg == 0) throw DegenerateLabels("ROC needs both member and non-member items");

    // Sweep thresholds from high to low; each group of equal scores is one step.
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double area = 0.0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i, dtp = 0, dfp = 0;
        while (j < v.size() && v[j].first == v[i].first) {
            (v[j].second ? dtp : dfp)++;
            ++j;
        }
        // trapezoid in count units: dfp * (tp + tp + dtp) / 2
        area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
        tp += dtp;
        i = j;
    }
    return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

template <typename Pred>
Rates rates_by(std::span<const AttackOutcome> outcomes, Pred predicted) {
    std::size_t m = 0, nm = 0, tp = 0, fp = 0;
    for (const auto& o : outcomes) {
        const bool p = !o.error && predicted(o);
        if (o.membership_label == MembershipLabel::member) {
            ++m;
            tp += p;
        } else {
            ++nm;
            fp += p;
        }
    }
    if (m == 0 || nm == 0) throw DegenerateLabels("rates need both member and non-member outcomes");
    return {static_cast<double>(tp) / static_cast<double>(m), static_cast<double>(fp) / static_cast<double>(nm)};
}

Variant variant_of(const AttackOutcome& o) { return Variant::parse(o.method, o.variant); }

}  // namespace

Rates confusion_rates(std::span<const AttackOutcome> outcomes) {
    return rates_by(outcomes, [](const AttackOutcome& o) { return o.predicted_member.value_or(false); });
}

Rates confusion_rates(std::span<const AttackOutcome> outcomes, double threshold) {
    return rates_by(outcomes, [threshold](const AttackOutcome& o) { return o.score >= threshold; });
}

bool outcome_predicts(const AttackOutcome& o) { return variant_predicts(o.method, variant_of(o)); }

double accuracy_value(const AttackOutcome& o) {
    if (o.error) return 0.0;
    if (o.method == Method::probing) {
        if (o.reference_tokens == 0) return 0.0;
        return std::min(1.0, o.score / static_cast<double>(o.reference_tokens));
    }
    if (o.predicted_member) return *o.predicted_member ? 1.0 : 0.0;
    return o.score;
}

double ranking_value(const AttackOutcome& o) {
    if (o.error) return 0.0;
    if (outcome_predicts(o)) return o.predicted_member.value_or(false) ? 1.0 : 0.0;
    return o.score;
}

GroupAccuracy group_accuracy(std::span<const AttackOutcome> outcomes) {
    double sm = 0.0, snm = 0.0;
    std::size_t m = 0, nm = 0;
    for (const auto& o : outcomes) {
        if (o.membership_label == MembershipLabel::member) {
            sm += accuracy_value(o);
            ++m;
        } else {
            snm += accuracy_value(o);
            ++nm;
        }
    }
    return {m ? sm / static_cast<double>(m) : 0.0, nm ? snm / static_cast<double>(nm) : 0.0};
}

long long round_half_up(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

LcsSummary lcs_summary(std::span<const AttackOutcome> outcomes) {
    double sm = 0.0, snm = 0.0;
    std::size_t m = 0, nm = 0;
    for (const auto& o : outcomes) {
        const double v = o.error ? 0.0 : o.score;
        if (o.membership_label == MembershipLabel::member) {
            sm += v;
            ++m;
        } else {
            snm += v;
            ++nm;
        }
    }
    LcsSummary s;
    s.mean_member = m ? sm / static_cast<double>(m) : 0.0;
    s.mean_nonmember = nm ? snm / static_cast<double>(nm) : 0.0;
    s.rounded_member = round_half_up(s.mean_member);
    s.rounded_nonmember = round_half_up(s.mean_nonmember);
    return s;
}

MetricsReport compute_report(std::span<const AttackOutcome> outcomes) {
    if (outcomes.empty()) throw DegenerateLabels("no outcomes to evaluate");
    const auto& first = outcomes.front();
    for (const auto& o : outcomes)
        if (o.method != first.method || o.variant != first.variant || o.model_id != first.model_id ||
            o.dataset != first.dataset)
            throw MisalignedOutcomes("outcomes mix methods, variants, models or datasets");

    MetricsReport r;
    r.method = first.method;
    r.variant = first.variant;
    r.model_id = first.model_id;
    r.dataset = first.dataset;

    std::vector<LabeledScore> scores;
    scores.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        scores.push_back({o.chunk_id, ranking_value(o), o.membership_label});
        (o.membership_label == MembershipLabel::member ? r.n_member : r.n_nonmember)++;
        r.n_errors += o.error.has_value();
    }
    r.auc = roc_auc(scores);
    if (outcome_predicts(first)) {
        auto rates = confusion_rates(outcomes);
        r.tpr = rates.tpr;
        r.fpr = rates.fpr;
    }
    auto acc = group_accuracy(outcomes);
    r.acc_member = acc.member;
    r.acc_nonmember = acc.non_member;
    if (first.method == Method::probing) r.lcs = lcs_summary(outcomes);
    return r;
}

std::vector<bool> consensus(const std::vector<std::vector<AttackOutcome>>& per_method) {
    if (per_method.empty()) return {};
    const auto& base = per_method.front();
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < base.size(); ++i)
        if (!row.emplace(base[i].chunk_id, i).second)
            throw MisalignedOutcomes("chunk " + base[i].chunk_id + " appears twice");

    std::vector<bool> flags(base.size(), true);
    for (const auto& set : per_method) {
        if (set.size() != base.size()) throw MisalignedOutcomes("outcome sets cover different chunks");
        std::vector<bool> seen(base.size(), false);
        for (const auto& o : set) {
            auto it = row.find(o.chunk_id);
            if (it == row.end() || seen[it->second])
                throw MisalignedOutcomes("chunk " + o.chunk_id + " is not in every outcome set");
            seen[it->second] = true;
            flags[it->second] = flags[it->second] && !o.error && o.predicted_member.value_or(false);
        }
    }
    return flags;
}

AgreementGrid agreement_matrix(
    const std::map<std::string, std::vector<std::vector<AttackOutcome>>>& per_model) {
    AgreementGrid g;
    std::unordered_map<std::string, std::size_t> row;
    for (const auto& [model, sets] : per_model) {
        if (sets.empty()) throw MisalignedOutcomes("model " + model + " has no outcome sets");
        auto flags = consensus(sets);
        const auto& rows = sets.front();
        if (g.models.empty()) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                g.chunk_ids.push_back(rows[i].chunk_id);
                g.labels.push_back(rows[i].membership_label);
                row.emplace(rows[i].chunk_id, i);
            }
            g.flags.assign(rows.size(), {});
        } else if (rows.size() != g.chunk_ids.size()) {
            throw MisalignedOutcomes("model " + model + " covers a different chunk set");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto it = row.find(rows[i].chunk_id);
            if (it == row.end()) throw MisalignedOutcomes("model " + model + " covers a different chunk set");
            g.flags[it->second].push_back(flags[i]);
        }
        g.models.push_back(model);
    }
    return g;
}

}  // namespace mia
