#pragma once

#include <iosfwd>

#include "hsissl_cli/run_config.hpp"

namespace hsissl::cli {

/// Writes scene.hdr/.raw and labels.hdr/.raw into config.out.
void cmd_synth(const RunConfig& config, std::ostream& log);
/// Writes encoder.ckpt and pretrain_loss.csv.
void cmd_pretrain(const RunConfig& config, std::ostream& log);
/// Writes metrics_<protocol>_K<k>_seed<s>.json and a classifier checkpoint per
/// cell, then summary.csv.
void cmd_classify(const RunConfig& config, std::ostream& log);
/// Writes ablation_matrix.csv and ablation_no_augmentation.csv.
void cmd_ablate(const RunConfig& config, std::ostream& log);
/// Writes metrics_eval.json and prediction_map.pgm.
void cmd_eval(const RunConfig& config, std::ostream& log);

/// One summary row per (protocol, metric) with the seed-mean per K:
///   method,metric,K5,K10
///   linear,oa,0.912345,0.934567
struct SummaryCell {
  Protocol protocol;
  std::size_t shots;
  double oa;
  double kappa;
};
std::string summary_csv(const std::vector<SummaryCell>& cells,
                        const std::vector<Protocol>& protocols,
                        const std::vector<std::size_t>& shots);

/// Symmetric matrix with transform names as header row and column.
std::string ablation_matrix_csv(const std::vector<std::string>& names,
                                const std::vector<std::vector<double>>& values);

}  // namespace hsissl::cli
