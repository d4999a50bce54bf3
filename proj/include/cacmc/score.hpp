#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cacmc/grid.hpp"

namespace cacmc {

/// Clinical calcium threshold in HU.
inline constexpr double kCalciumThresholdHu = 130.0;
/// Default softness of the thresholded membership, in HU.
inline constexpr double kDefaultTau = 60.0;

/// sigmoid((hu - 130) / tau).
double soft_mask(double hu, double tau = kDefaultTau);

/// Differentiable volume score: voxel volume times the summed soft
/// memberships, in mm^3.
double volume_score(const VoxelGrid& v, double tau = kDefaultTau);

/// Squared difference of log(1 + S_vol) between reference and reconstruction.
/// If `grad_xhat` is non-null it receives dLoss/dxhat per voxel (in 1/HU).
double calcium_consistency_loss(const VoxelGrid& x0, const VoxelGrid& xhat,
                                double tau = kDefaultTau,
                                Eigen::ArrayXd* grad_xhat = nullptr);

enum class RiskGrade { None = 0, Minimal, Mild, Moderate, Severe };

const char* grade_name(RiskGrade g);

/// 0 -> none; (0,10] -> minimal; (10,100] -> mild; (100,400] -> moderate;
/// >400 -> severe.
RiskGrade grade(double score);

struct Lesion {
    int slice = 0;
    double area_mm2 = 0.0;
    double max_hu = 0.0;
    int weight = 0;
    double score = 0.0;
    int voxels = 0;
};

struct AgatstonParams {
    double threshold_hu = kCalciumThresholdHu;
    double min_area_mm2 = 1.0;
};

struct ScoreReport {
    double agatston = 0.0;
    double volume_score_mm3 = 0.0;
    RiskGrade risk = RiskGrade::None;
    std::vector<Lesion> lesions;
};

/// Standard clinical rule: per axial slice, 8-connected components of voxels
/// >= 130 HU with area >= 1 mm^2 score area * weight(max HU), weights
/// 1:[130,200) 2:[200,300) 3:[300,400) 4:[400,inf).
ScoreReport agatston(const VoxelGrid& v, const AgatstonParams& params = {});

int agatston_weight(double max_hu);

/// Voxels >= threshold as a binary mask.
BinaryMask threshold_mask(const VoxelGrid& v, double threshold_hu = kCalciumThresholdHu);

/// 1 - Dice coefficient between pred thresholded at 130 HU and the reference
/// mask; 0 when both masks are empty.
double dice_loss(const VoxelGrid& pred, const BinaryMask& ref);
double dice_loss_masks(const BinaryMask& a, const BinaryMask& b);

struct EvalPair {
    VoxelGrid pred;
    VoxelGrid truth;
};

inline constexpr int kGradeCount = 5;

struct EvalReport {
    int n_pairs = 0;
    double agatston_mae = 0.0;
    double grade_accuracy_pct = 0.0;
    double mean_dice_loss = 0.0;
    double pearson = 0.0;
    bool pearson_defined = true;
    // Rows: truth grade, columns: predicted grade.
    Eigen::Matrix<int, kGradeCount, kGradeCount> confusion_counts;
    Eigen::Matrix<double, kGradeCount, kGradeCount> confusion_pct;
    std::array<double, kGradeCount> precision{}, recall{}, f1{};
};

/// Dataset-level metrics over (prediction, ground-truth) volume pairs.
/// Needs at least two pairs so the Pearson correlation is meaningful.
EvalReport evaluate(const std::vector<EvalPair>& pairs,
                    const AgatstonParams& params = {});

/// Pearson correlation; empty optional when either vector has zero variance.
std::optional<double> pearson_correlation(const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& b);

nlohmann::json score_report_json(const ScoreReport& r);
nlohmann::json eval_report_json(const EvalReport& r);
/// Aligned text table with the four headline metrics plus the per-grade block.
std::string eval_report_table(const EvalReport& r);

} // namespace cacmc
