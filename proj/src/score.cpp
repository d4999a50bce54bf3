#include "cacmc/score.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cacmc {

using nlohmann::json;

double soft_mask(double hu, double tau) {
    if (tau <= 0.0) throw ValidationError("soft_mask: tau must be positive");
    return 1.0 / (1.0 + std::exp(-(hu - kCalciumThresholdHu) / tau));
}

double volume_score(const VoxelGrid& v, double tau) {
    if (tau <= 0.0) throw ValidationError("volume_score: tau must be positive");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) sum += soft_mask(v.values[i], tau);
    return v.voxel_volume() * sum;
}

double calcium_consistency_loss(const VoxelGrid& x0, const VoxelGrid& xhat,
                                double tau, Eigen::ArrayXd* grad_xhat) {
    if (!x0.same_shape(xhat))
        throw ValidationError("calcium_consistency_loss: geometry mismatch");
    const double s_ref = volume_score(x0, tau);
    const double s_hat = volume_score(xhat, tau);
    const double diff = std::log1p(s_hat) - std::log1p(s_ref);
    if (grad_xhat) {
        // d/dx_i = 2 diff * 1/(1+S) * v_voxel * sigma'((x_i-130)/tau)/tau
        grad_xhat->resize(xhat.size());
        const double outer = 2.0 * diff / (1.0 + s_hat) * xhat.voxel_volume() / tau;
        for (Eigen::Index i = 0; i < xhat.size(); ++i) {
            const double s = soft_mask(xhat.values[i], tau);
            (*grad_xhat)[i] = outer * s * (1.0 - s);
        }
    }
    return diff * diff;
}

const char* grade_name(RiskGrade g) {
    switch (g) {
        case RiskGrade::None: return "none";
        case RiskGrade::Minimal: return "minimal";
        case RiskGrade::Mild: return "mild";
        case RiskGrade::Moderate: return "moderate";
        case RiskGrade::Severe: return "severe";
    }
    return "?";
}

RiskGrade grade(double score) {
    if (score < 0.0) throw ValidationError("grade: negative score");
    if (score == 0.0) return RiskGrade::None;
    if (score <= 10.0) return RiskGrade::Minimal;
    if (score <= 100.0) return RiskGrade::Mild;
    if (score <= 400.0) return RiskGrade::Moderate;
    return RiskGrade::Severe;
}

int agatston_weight(double max_hu) {
    if (max_hu < 200.0) return 1;
    if (max_hu < 300.0) return 2;
    if (max_hu < 400.0) return 3;
    return 4;
}

ScoreReport agatston(const VoxelGrid& v, const AgatstonParams& params) {
    if (v.spacing[0] <= 0.0 || v.spacing[1] <= 0.0)
        throw ValidationError("agatston: in-plane spacing unknown");
    const double pixel_area = v.spacing[0] * v.spacing[1];
    ScoreReport report;

    const Eigen::Index nx = v.nx(), ny = v.ny();
    std::vector<int> labels(std::size_t(nx * ny));
    std::deque<Eigen::Index> queue;
    for (Eigen::Index z = 0; z < v.nz(); ++z) {
        auto plane = v.slice(z);
        std::fill(labels.begin(), labels.end(), 0);
        int next = 0;
        for (Eigen::Index start = 0; start < nx * ny; ++start) {
            if (plane(start % nx, start / nx) < params.threshold_hu ||
                labels[std::size_t(start)])
                continue;
            ++next;
            labels[std::size_t(start)] = next;
            queue.push_back(start);
            Lesion lesion;
            lesion.slice = int(z);
            while (!queue.empty()) {
                const Eigen::Index i = queue.front();
                queue.pop_front();
                const Eigen::Index x = i % nx, y = i / nx;
                lesion.max_hu = std::max(lesion.max_hu, plane(x, y));
                ++lesion.voxels;
                for (Eigen::Index dy = -1; dy <= 1; ++dy)
                    for (Eigen::Index dx = -1; dx <= 1; ++dx) {
                        const Eigen::Index X = x + dx, Y = y + dy;
                        if (X < 0 || Y < 0 || X >= nx || Y >= ny) continue;
                        const Eigen::Index j = X + nx * Y;
                        if (plane(X, Y) >= params.threshold_hu && !labels[std::size_t(j)]) {
                            labels[std::size_t(j)] = next;
                            queue.push_back(j);
                        }
                    }
            }
            lesion.area_mm2 = double(lesion.voxels) * pixel_area;
            if (lesion.area_mm2 < params.min_area_mm2) continue;
            lesion.weight = agatston_weight(lesion.max_hu);
            lesion.score = lesion.area_mm2 * double(lesion.weight);
            report.agatston += lesion.score;
            report.lesions.push_back(lesion);
        }
    }
    report.volume_score_mm3 = volume_score(v, kDefaultTau);
    report.risk = grade(report.agatston);
    return report;
}

BinaryMask threshold_mask(const VoxelGrid& v, double threshold_hu) {
    BinaryMask m(v.dims, v.spacing);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        m.values[i] = v.values[i] >= threshold_hu ? 1 : 0;
    return m;
}

double dice_loss_masks(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw ValidationError("dice: geometry mismatch");
    Eigen::Index na = 0, nb = 0, inter = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        na += a.values[i] ? 1 : 0;
        nb += b.values[i] ? 1 : 0;
        inter += (a.values[i] && b.values[i]) ? 1 : 0;
    }
    if (na + nb == 0) return 0.0;
    return 1.0 - 2.0 * double(inter) / double(na + nb);
}

double dice_loss(const VoxelGrid& pred, const BinaryMask& ref) {
    return dice_loss_masks(threshold_mask(pred), ref);
}

std::optional<double> pearson_correlation(const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("pearson: need two equally sized samples");
    const Eigen::VectorXd da = a.array() - a.mean();
    const Eigen::VectorXd db = b.array() - b.mean();
    const double va = da.squaredNorm(), vb = db.squaredNorm();
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return da.dot(db) / std::sqrt(va * vb);
}

EvalReport evaluate(const std::vector<EvalPair>& pairs, const AgatstonParams& params) {
    if (pairs.size() < 2)
        throw ValidationError("evaluate: need at least two pairs for Pearson");
    EvalReport r;
    r.n_pairs = int(pairs.size());
    r.confusion_counts.setZero();
    r.confusion_pct.setZero();

    Eigen::VectorXd pred_scores(r.n_pairs), truth_scores(r.n_pairs);
    double mae = 0.0, dice_sum = 0.0;
    int correct = 0;
    for (int i = 0; i < r.n_pairs; ++i) {
        const auto& p = pairs[std::size_t(i)];
        const double sp = agatston(p.pred, params).agatston;
        const double st = agatston(p.truth, params).agatston;
        pred_scores[i] = sp;
        truth_scores[i] = st;
        mae += std::abs(sp - st);
        const auto gp = grade(sp), gt = grade(st);
        correct += gp == gt ? 1 : 0;
        r.confusion_counts(int(gt), int(gp)) += 1;
        dice_sum += dice_loss(p.pred, threshold_mask(p.truth, params.threshold_hu));
    }
    r.agatston_mae = mae / double(r.n_pairs);
    r.grade_accuracy_pct = 100.0 * double(correct) / double(r.n_pairs);
    r.mean_dice_loss = dice_sum / double(r.n_pairs);
    const auto rho = pearson_correlation(pred_scores, truth_scores);
    r.pearson_defined = rho.has_value();
    r.pearson = rho.value_or(std::numeric_limits<double>::quiet_NaN());

    for (int g = 0; g < kGradeCount; ++g) {
        const int row_total = r.confusion_counts.row(g).sum();
        if (row_total > 0)
            r.confusion_pct.row(g) =
                100.0 * r.confusion_counts.row(g).cast<double>() / double(row_total);
        const int tp = r.confusion_counts(g, g);
        const int pred_total = r.confusion_counts.col(g).sum();
        r.precision[std::size_t(g)] = pred_total > 0 ? double(tp) / pred_total : 0.0;
        r.recall[std::size_t(g)] = row_total > 0 ? double(tp) / row_total : 0.0;
        const double pr = r.precision[std::size_t(g)] + r.recall[std::size_t(g)];
        r.f1[std::size_t(g)] =
            pr > 0.0 ? 2.0 * r.precision[std::size_t(g)] * r.recall[std::size_t(g)] / pr
                     : 0.0;
    }
    return r;
}

json score_report_json(const ScoreReport& r) {
    json lesions = json::array();
    for (const auto& l : r.lesions)
        lesions.push_back({{"slice", l.slice},
                           {"area_mm2", l.area_mm2},
                           {"max_hu", l.max_hu},
                           {"weight", l.weight},
                           {"score", l.score},
                           {"voxels", l.voxels}});
    return json{{"agatston", r.agatston},
                {"volume_score_mm3", r.volume_score_mm3},
                {"grade", grade_name(r.risk)},
                {"lesions", lesions}};
}

json eval_report_json(const EvalReport& r) {
    json confusion_counts = json::array(), confusion_pct = json::array();
    for (int g = 0; g < kGradeCount; ++g) {
        json row_c = json::array(), row_p = json::array();
        for (int h = 0; h < kGradeCount; ++h) {
            row_c.push_back(r.confusion_counts(g, h));
            row_p.push_back(r.confusion_pct(g, h));
        }
        confusion_counts.push_back(row_c);
        confusion_pct.push_back(row_p);
    }
    json per_class = json::array();
    for (int g = 0; g < kGradeCount; ++g)
        per_class.push_back({{"grade", grade_name(RiskGrade(g))},
                             {"precision", r.precision[std::size_t(g)]},
                             {"recall", r.recall[std::size_t(g)]},
                             {"f1", r.f1[std::size_t(g)]}});
    return json{{"n_pairs", r.n_pairs},
                {"agatston_mae", r.agatston_mae},
                {"grade_accuracy_pct", r.grade_accuracy_pct},
                {"mean_dice_loss", r.mean_dice_loss},
                {"pearson", r.pearson_defined ? json(r.pearson) : json(nullptr)},
                {"pearson_defined", r.pearson_defined},
                {"confusion_counts", confusion_counts},
                {"confusion_pct", confusion_pct},
                {"per_class", per_class}};
}

std::string eval_report_table(const EvalReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "Metric                     Value\n";
    os << "-------------------------  --------\n";
    os << "Agatston MAE               " << r.agatston_mae << "\n";
    os << "Grade accuracy (%)         " << r.grade_accuracy_pct << "\n";
    os << "Avg. Dice loss             " << r.mean_dice_loss << "\n";
    os << "Agatston Pearson corr.     ";
    if (r.pearson_defined)
        os << r.pearson << "\n";
    else
        os << "undefined\n";
    os << "\nPer-grade precision / recall / F1\n";
    for (int g = 0; g < kGradeCount; ++g) {
        os << "  " << grade_name(RiskGrade(g));
        for (std::size_t pad = std::string(grade_name(RiskGrade(g))).size(); pad < 10;
             ++pad)
            os << ' ';
        os << r.precision[std::size_t(g)] << " / " << r.recall[std::size_t(g)] << " / "
           << r.f1[std::size_t(g)] << "\n";
    }
    os << "\nConfusion matrix (% of truth row)\n";
    for (int g = 0; g < kGradeCount; ++g) {
        os << "  ";
        for (int h = 0; h < kGradeCount; ++h) {
            os.width(7);
            os << r.confusion_pct(g, h);
            os << (h + 1 < kGradeCount ? " " : "\n");
        }
    }
    return os.str();
}

} // namespace cacmc
