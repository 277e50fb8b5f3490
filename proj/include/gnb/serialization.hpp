#pragma once

// JSON encodings for checkpoints. Doubles are written with round-trip
// precision, so save -> load reproduces every parameter bit-exactly.

#include <nlohmann/json.hpp>

#include "gnb/gnn.hpp"
#include "gnb/numerics.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json vector_to_json(const Eigen::Ref<const VectorXd>& v);
VectorXd vector_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::Ref<const MatrixXd>& m);
MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json fc_to_json(const FcParamsD& p);
FcParamsD fc_from_json(const nlohmann::json& j);

nlohmann::json gnn_to_json(const GnnParams& p);
GnnParams gnn_from_json(const nlohmann::json& j);

nlohmann::json user_to_json(const UserModel& u);
UserModel user_from_json(const nlohmann::json& j);

// FNV-1a over the raw bytes of a dense matrix.
std::uint64_t fingerprint(const Eigen::Ref<const MatrixXd>& m);

}  // namespace gnb
