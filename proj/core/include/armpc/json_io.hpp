#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>

namespace armpc {

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);

/// `path` is used in ValidationError messages.
Eigen::VectorXd json_to_vector(const nlohmann::json& j, const std::string& path);
/// Accepts a list of rows. An empty list gives a 0 x 0 matrix.
Eigen::MatrixXd json_to_matrix(const nlohmann::json& j, const std::string& path);

} // namespace armpc
