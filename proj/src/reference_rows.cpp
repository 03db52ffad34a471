#include <cmath>

#include "kgcn/experiments.hpp"

namespace kgcn {

namespace {

// Published means (percent) with the hyperparameters that produced them.
// Splits with a validation set come first, then the no-validation grid.
// PubMed no-validation truncated Krylov at 0.05% lists lr = 2.3342E+04, far
// outside the searched range; kept verbatim but never used for acceptance.
constexpr ReferenceRow kRows[] = {
    {"linear_snowball", "cora", SplitMode::percent, 0.005, 69.99, 60.8, 0.0010689, 0.014759, 128, 6, 0.66987, OptimizerKind::rmsprop},
    {"linear_snowball", "cora", SplitMode::percent, 0.01, 73.10, 67.5, 0.0014795, 0.023764, 128, 9, 0.64394, OptimizerKind::rmsprop},
    {"linear_snowball", "cora", SplitMode::percent, 0.03, 80.96, 77.7, 0.0026847, 0.0051442, 64, 9, 0.23648, OptimizerKind::rmsprop},
    {"linear_snowball", "cora", SplitMode::public_split, 0.052, 83.19, 83.0, 0.00016577, 0.018606, 1024, 3, 0.65277, OptimizerKind::rmsprop},
    {"linear_snowball", "citeseer", SplitMode::percent, 0.005, 59.41, 53.8, 0.00049284, 0.006942, 512, 11, 0.90071, OptimizerKind::rmsprop},
    {"linear_snowball", "citeseer", SplitMode::percent, 0.01, 65.85, 63.3, 0.0032628, 0.016374, 512, 3, 0.97331, OptimizerKind::rmsprop},
    {"linear_snowball", "citeseer", SplitMode::public_split, 0.036, 73.54, 72.5, 0.0028218, 0.019812, 5000, 1, 0.98327, OptimizerKind::adam},
    {"linear_snowball", "pubmed", SplitMode::percent, 0.0003, 68.12, 61.0, 0.0021124, 0.044161, 128, 7, 0.78683, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::percent, 0.0005, 70.04, 68.8, 0.0049982, 0.02646, 128, 4, 0.86788, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::percent, 0.001, 73.83, 73.4, 0.0012462, 0.049303, 128, 6, 0.3299, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::public_split, 0.003, 79.23, 79.0, 0.0024044, 0.023157, 4000, 1, 0.98842, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent, 0.005, 72.96, 60.8, 0.00023228, 0.02131, 950, 7, 0.88945, OptimizerKind::rmsprop},
    {"snowball", "cora", SplitMode::percent, 0.01, 76.76, 67.5, 0.00015483, 0.013963, 250, 15, 0.55385, OptimizerKind::rmsprop},
    {"snowball", "cora", SplitMode::percent, 0.03, 80.72, 77.7, 0.0016772, 0.010725, 64, 14, 0.80611, OptimizerKind::rmsprop},
    {"snowball", "cora", SplitMode::public_split, 0.052, 83.60, 83.0, 1.2994e-05, 0.0094469, 5000, 3, 0.025052, OptimizerKind::rmsprop},
    {"snowball", "citeseer", SplitMode::percent, 0.005, 62.05, 53.8, 0.0020055, 0.03134, 512, 5, 0.88866, OptimizerKind::rmsprop},
    {"snowball", "citeseer", SplitMode::percent, 0.01, 64.23, 63.3, 0.0018759, 0.0093636, 128, 7, 0.77334, OptimizerKind::rmsprop},
    {"snowball", "citeseer", SplitMode::public_split, 0.036, 72.61, 72.5, 0.0025527, 0.0062812, 256, 1, 0.56755, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent, 0.0003, 70.78, 61.0, 0.0011029, 0.018661, 100, 15, 0.83381, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent, 0.0005, 73.23, 68.8, 0.0037159, 0.022088, 400, 9, 0.9158, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent, 0.001, 76.52, 73.4, 0.0049106, 0.030777, 100, 15, 0.79133, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::public_split, 0.003, 79.54, 79.0, 0.0049867, 0.0035816, 3550, 1, 0.98968, OptimizerKind::adam},
    {"truncated_krylov", "cora", SplitMode::percent, 0.005, 73.89, 60.8, 0.00016552, 0.04433, 4950, 27, 0.97726, OptimizerKind::adam},
    {"truncated_krylov", "cora", SplitMode::percent, 0.01, 77.38, 67.5, 0.00028845, 0.048469, 4950, 30, 0.93928, OptimizerKind::adam},
    {"truncated_krylov", "cora", SplitMode::percent, 0.03, 82.23, 77.7, 0.00086406, 0.0040126, 2950, 16, 0.98759, OptimizerKind::adam},
    {"truncated_krylov", "cora", SplitMode::public_split, 0.052, 83.51, 83.0, 0.0010922, 0.035966, 1950, 10, 0.98403, OptimizerKind::adam},
    {"truncated_krylov", "citeseer", SplitMode::percent, 0.005, 63.65, 53.8, 0.0028208, 0.043395, 1150, 30, 0.92821, OptimizerKind::adam},
    {"truncated_krylov", "citeseer", SplitMode::percent, 0.01, 68.36, 63.3, 0.0039898, 0.0038525, 100, 27, 0.71951, OptimizerKind::adam},
    {"truncated_krylov", "citeseer", SplitMode::public_split, 0.036, 73.89, 72.5, 0.0018292, 0.042295, 600, 11, 0.98865, OptimizerKind::adam},
    {"truncated_krylov", "pubmed", SplitMode::percent, 0.0003, 71.11, 61.0, 0.0036759, 0.012628, 512, 8, 0.95902, OptimizerKind::rmsprop},
    {"truncated_krylov", "pubmed", SplitMode::percent, 0.0005, 72.86, 68.8, 0.0040135, 0.048831, 4250, 5, 0.95911, OptimizerKind::adam},
    {"truncated_krylov", "pubmed", SplitMode::percent, 0.001, 75.68, 73.4, 0.0047562, 0.037134, 950, 7, 0.96569, OptimizerKind::adam},
    {"truncated_krylov", "pubmed", SplitMode::public_split, 0.003, 79.88, 79.0, 0.00039673, 0.022931, 1900, 4, 0.000127, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.005, 69.53, 61.5, 4.4438e-05, 0.017409, 550, 12, 0.007753, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.01, 74.12, 69.9, 0.0010826, 0.0033462, 1250, 3, 0.50426, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.02, 79.43, 75.9, 2.4594e-06, 0.0096734, 1650, 12, 0.34073, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.03, 80.41, 78.5, 2.8597e-05, 0.034732, 900, 15, 0.039034, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.04, 81.3, 80.4, 3.683e-05, 0.015664, 3750, 4, 0.93797, OptimizerKind::adam},
    {"linear_snowball", "cora", SplitMode::percent_no_validation, 0.05, 82.19, 81.7, 5.8323e-06, 0.008594, 2850, 5, 0.14701, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.005, 56.76, 56.1, 0.0045629, 0.0020106, 300, 3, 0.038225, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.01, 65.44, 62.1, 3.553e-05, 0.049935, 600, 6, 0.03556, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.02, 68.78, 68.6, 6.1176e-06, 0.030101, 1950, 3, 0.040484, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.03, 71, 70.3, 2.1956e-05, 0.043569, 3350, 3, 0.30207, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.04, 72.23, 70.8, 9.1952e-05, 0.046407, 3350, 2, 0.018231, OptimizerKind::adam},
    {"linear_snowball", "citeseer", SplitMode::percent_no_validation, 0.05, 72.21, 71.3, 0.0037173, 0.0019605, 2950, 1, 0.96958, OptimizerKind::adam},
    {"linear_snowball", "pubmed", SplitMode::percent_no_validation, 0.0003, 64.133, 62.2, 0.0010724, 0.0081097, 64, 4, 0.8022, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::percent_no_validation, 0.0005, 69.48, 68.3, 0.0015936, 0.0030236, 6, 10, 0.73067, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::percent_no_validation, 0.001, 72.93, 72.7, 0.0049733, 0.0013744, 128, 3, 0.91214, OptimizerKind::rmsprop},
    {"linear_snowball", "pubmed", SplitMode::percent_no_validation, 0.003, 79.33, 79.2, 0.0017998, 0.00096753, 512, 1, 0.97483, OptimizerKind::rmsprop},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.005, 67.15, 61.5, 0.00098649, 0.010305, 1600, 3, 0.92785, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.01, 73.47, 69.9, 0.00014228, 0.013472, 100, 13, 0.68601, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.02, 78.54, 75.9, 5.7111e-06, 0.015544, 600, 13, 0.022622, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.03, 79.97, 78.5, 4.0278e-05, 0.027287, 4350, 5, 0.57173, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.04, 81.49, 80.4, 1.4152e-05, 0.023359, 2500, 13, 0.018578, OptimizerKind::adam},
    {"snowball", "cora", SplitMode::percent_no_validation, 0.05, 81.82, 81.7, 0.0012621, 0.015323, 3550, 2, 0.87352, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.005, 56.39, 56.1, 0.0026983, 0.02537, 300, 6, 0.82964, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.01, 65.04, 62.1, 0.0016982, 0.015473, 2150, 2, 0.98611, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.02, 69.48, 68.6, 9.7299e-05, 0.049675, 2150, 3, 0.71216, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.03, 71.09, 70.3, 0.00017839, 0.030874, 2150, 2, 0.16549, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.04, 72.32, 70.8, 5.6575e-05, 0.035949, 4800, 2, 0.012576, OptimizerKind::adam},
    {"snowball", "citeseer", SplitMode::percent_no_validation, 0.05, 72.8, 71.3, 0.00028643, 0.016399, 2000, 2, 0.37308, OptimizerKind::adam},
    {"snowball", "pubmed", SplitMode::percent_no_validation, 0.0003, 62.94, 62.2, 0.00127, 0.0014159, 128, 4, 0.76848, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent_no_validation, 0.0005, 68.31, 68.3, 0.0011224, 9.9166e-05, 256, 3, 0.85496, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent_no_validation, 0.001, 73.29, 72.7, 0.00060506, 0.0010303, 256, 2, 0.97988, OptimizerKind::rmsprop},
    {"snowball", "pubmed", SplitMode::percent_no_validation, 0.003, 79.63, 79.2, 0.0011416, 0.00061543, 128, 1, 0.989, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.005, 72.96, 61.5, 0.0033276, 0.00010496, 128, 18, 0.76012, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.01, 75.52, 69.9, 0.00074797, 0.0091736, 2048, 20, 0.98941, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.02, 80.31, 75.9, 0.00017894, 0.011079, 4096, 16, 0.97091, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.03, 81.54, 78.5, 0.00043837, 0.0026958, 512, 17, 0.96643, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.04, 82.47, 80.4, 0.0036117, 0.0004104, 64, 25, 0.021987, OptimizerKind::rmsprop},
    {"truncated_krylov", "cora", SplitMode::percent_no_validation, 0.05, 83.36, 81.7, 0.0010294, 0.00053882, 256, 23, 0.028392, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.005, 59.6, 56.1, 0.001979, 0.00040283, 16, 20, 0.007761, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.01, 65.95, 62.1, 0.00078506, 0.0082432, 64, 24, 0.28159, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.02, 70.23, 68.6, 0.00054517, 0.010818, 256, 12, 0.27027, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.03, 71.81, 70.3, 0.00014107, 0.0050062, 1024, 9, 0.57823, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.04, 72.36, 70.8, 4.8864e-06, 0.018038, 4096, 12, 0.11164, OptimizerKind::rmsprop},
    {"truncated_krylov", "citeseer", SplitMode::percent_no_validation, 0.05, 72.24, 71.3, 0.0021761, 0.011753, 5000, 8, 0.71473, OptimizerKind::adam},
    {"truncated_krylov", "pubmed", SplitMode::percent_no_validation, 0.0003, 69.07, 62.2, 0.00068475, 0.028822, 4096, 7, 0.97245, OptimizerKind::rmsprop},
    {"truncated_krylov", "pubmed", SplitMode::percent_no_validation, 0.0005, 71.77, 68.3, 23342.0, 0.0022189, 1024, 8, 0.93694, OptimizerKind::rmsprop},
    {"truncated_krylov", "pubmed", SplitMode::percent_no_validation, 0.001, 76.07, 72.7, 0.00042629, 0.0041339, 2048, 8, 0.98914, OptimizerKind::rmsprop},
    {"truncated_krylov", "pubmed", SplitMode::percent_no_validation, 0.003, 80.04, 79.2, 0.00022602, 0.033626, 2000, 7, 0.070573, OptimizerKind::adam},
};

}  // namespace

std::span<const ReferenceRow> reference_rows() { return kRows; }

std::optional<ReferenceRow> find_reference(std::string_view preset, std::string_view dataset,
                                           SplitMode mode, double percent) {
  for (const auto& r : kRows) {
    if (preset == r.preset && dataset == r.dataset && mode == r.mode &&
        (mode == SplitMode::public_split || std::abs(percent - r.percent) < 1e-9)) {
      return r;
    }
  }
  return std::nullopt;
}

Hyperparams to_hyperparams(const ReferenceRow& row, std::size_t width_cap) {
  Hyperparams hp;
  hp.lr = row.lr;
  hp.weight_decay = row.weight_decay;
  hp.hidden = row.hidden;
  hp.layers_or_blocks = row.layers_or_blocks;
  hp.dropout = row.dropout;
  hp.optimizer = row.optimizer;
  hp.width_cap = width_cap;
  return hp;
}

}  // namespace kgcn
