#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/attacks.hpp"
#include "mia/corpus.hpp"

namespace mia {

struct LabeledScore {
    std::string chunk_id;
    double score = 0.0;
    MembershipLabel label = MembershipLabel::member;
};

/// Trapezoidal area under the ROC curve with equal scores grouped into one
/// step, i.e. Mann-Whitney with half credit for ties. Members are positives.
/// Throws DegenerateLabels when a class is absent, FatalConfigError on a
/// non-finite score.
double roc_auc(std::span<const LabeledScore> scores);

struct Rates {
    double tpr = 0.0;
    double fpr = 0.0;
};

/// From predicted_member; an absent prediction counts as non-member.
Rates confusion_rates(std::span<const AttackOutcome> outcomes);
/// From score >= threshold; error outcomes count as non-member.
Rates confusion_rates(std::span<const AttackOutcome> outcomes, double threshold);

/// Per-chunk task score in [0, 1]: decision correctness, fractional mask
/// accuracy, or LCS over suffix length for probing. Errors score 0.
double accuracy_value(const AttackOutcome& o);
/// Value ranked by roc_auc: the 0/1 decision for predicting variants, the
/// score otherwise. Errors rank as 0.
double ranking_value(const AttackOutcome& o);
bool outcome_predicts(const AttackOutcome& o);

struct GroupAccuracy {
    double member = 0.0;
    double non_member = 0.0;
};

GroupAccuracy group_accuracy(std::span<const AttackOutcome> outcomes);

/// Half-up rounding to an integer, as used for table views.
long long round_half_up(double x);

struct LcsSummary {
    double mean_member = 0.0;
    double mean_nonmember = 0.0;
    long long rounded_member = 0;
    long long rounded_nonmember = 0;
};

LcsSummary lcs_summary(std::span<const AttackOutcome> outcomes);

struct MetricsReport {
    Method method = Method::ncq;
    std::string variant;
    std::string model_id;
    std::string dataset;
    double auc = 0.0;
    std::optional<double> tpr;  // predicting variants only
    std::optional<double> fpr;
    double acc_member = 0.0;
    double acc_nonmember = 0.0;
    std::optional<LcsSummary> lcs;  // probing only
    std::size_t n_member = 0;
    std::size_t n_nonmember = 0;
    std::size_t n_errors = 0;
};

/// Outcomes must share method, variant, model and dataset.
MetricsReport compute_report(std::span<const AttackOutcome> outcomes);

/// Per-chunk flag: every supplied method predicts member. Throws
/// MisalignedOutcomes when the sets cover different chunk ids.
std::vector<bool> consensus(const std::vector<std::vector<AttackOutcome>>& per_method);

struct AgreementGrid {
    std::vector<std::string> chunk_ids;  // dataset order
    std::vector<MembershipLabel> labels;
    std::vector<std::string> models;
    std::vector<std::vector<bool>> flags;  // [row][model]
};

/// Columns are models in key order; each model's outcome sets must align
/// with every other model's.
AgreementGrid agreement_matrix(
    const std::map<std::string, std::vector<std::vector<AttackOutcome>>>& per_model);

}  // namespace mia
