#include "armpc/json_io.hpp"

#include "armpc/errors.hpp"

#include <cmath>

namespace armpc {

nlohmann::json vector_to_json(const Eigen::VectorXd& v)
{
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        j.push_back(v(i));
    }
    return j;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M)
{
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        j.push_back(vector_to_json(M.row(r).transpose()));
    }
    return j;
}

Eigen::VectorXd json_to_vector(const nlohmann::json& j, const std::string& path)
{
    if (j.is_number()) {
        return Eigen::VectorXd::Constant(1, j.get<double>());
    }
    if (!j.is_array()) {
        throw ValidationError(path, "expected an array of numbers");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ValidationError(path + "/" + std::to_string(i), "expected a number");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        if (!std::isfinite(v(static_cast<Eigen::Index>(i)))) {
            throw ValidationError(path + "/" + std::to_string(i), "must be finite");
        }
    }
    return v;
}

Eigen::MatrixXd json_to_matrix(const nlohmann::json& j, const std::string& path)
{
    if (j.is_number()) {
        return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    }
    if (!j.is_array()) {
        throw ValidationError(path, "expected a list of rows");
    }
    if (j.empty()) {
        return Eigen::MatrixXd(0, 0);
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd M;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string row_path = path + "/" + std::to_string(r);
        const Eigen::VectorXd row = json_to_vector(j[static_cast<std::size_t>(r)], row_path);
        if (r == 0) {
            M.resize(rows, row.size());
        } else if (row.size() != M.cols()) {
            throw ValidationError(row_path, "row length differs from row 0");
        }
        M.row(r) = row.transpose();
    }
    return M;
}

} // namespace armpc
