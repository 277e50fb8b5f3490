#include "gnb/serialization.hpp"

#include <cstring>

namespace gnb {

nlohmann::json vector_to_json(const Eigen::Ref<const VectorXd>& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

nlohmann::json matrix_to_json(const Eigen::Ref<const MatrixXd>& m) {
  const MatrixXd dense = m;
  return {{"rows", dense.rows()},
          {"cols", dense.cols()},
          {"data", std::vector<double>(dense.data(), dense.data() + dense.size())}};
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols) throw shape_error("matrix json: data length mismatch");
  return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

nlohmann::json fc_to_json(const FcParamsD& p) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : p.dims()) dims.push_back({d.in, d.out});
  return {{"dims", dims}, {"data", vector_to_json(p.flatten())}};
}

FcParamsD fc_from_json(const nlohmann::json& j) {
  std::vector<LayerDim> dims;
  for (const auto& d : j.at("dims")) dims.push_back({d.at(0).get<Index>(), d.at(1).get<Index>()});
  return FcParamsD::unflatten(std::move(dims), vector_from_json(j.at("data")));
}

nlohmann::json gnn_to_json(const GnnParams& p) {
  return {{"users", p.users}, {"input_dim", p.input_dim}, {"width", p.width}, {"depth", p.depth()},
          {"data", vector_to_json(p.flatten())}};
}

GnnParams gnn_from_json(const nlohmann::json& j) {
  return GnnParams::unflatten(j.at("users").get<Index>(), j.at("input_dim").get<Index>(), j.at("width").get<Index>(),
                              j.at("depth").get<int>(), vector_from_json(j.at("data")));
}

nlohmann::json user_to_json(const UserModel& u) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : u.history)
    history.push_back({{"x", vector_to_json(h.context)},
                       {"r", h.reward},
                       {"pred", h.served_prediction},
                       {"grad", vector_to_json(h.served_gradient)}});
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : u.snapshots) snaps.push_back({fc_to_json(s.exploit), fc_to_json(s.explore)});
  return {{"user_id", u.user_id},
          {"pool_size", u.pool_size},
          {"exploit", fc_to_json(u.exploit)},
          {"explore", fc_to_json(u.explore)},
          {"initial", {fc_to_json(u.initial.exploit), fc_to_json(u.initial.explore)}},
          {"history", history},
          {"snapshots", snaps}};
}

UserModel user_from_json(const nlohmann::json& j) {
  UserModel u;
  u.user_id = j.at("user_id").get<Index>();
  u.pool_size = j.at("pool_size").get<Index>();
  u.exploit = fc_from_json(j.at("exploit"));
  u.explore = fc_from_json(j.at("explore"));
  u.initial = {fc_from_json(j.at("initial").at(0)), fc_from_json(j.at("initial").at(1))};
  for (const auto& h : j.at("history"))
    u.history.push_back({vector_from_json(h.at("x")), h.at("r").get<double>(), h.at("pred").get<double>(),
                         vector_from_json(h.at("grad"))});
  for (const auto& s : j.at("snapshots")) u.snapshots.push_back({fc_from_json(s.at(0)), fc_from_json(s.at(1))});
  return u;
}

std::uint64_t fingerprint(const Eigen::Ref<const MatrixXd>& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const Index r = m.rows(), c = m.cols();
  mix(&r, sizeof r);
  mix(&c, sizeof c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) {
      const double v = m(i, k);
      mix(&v, sizeof v);
    }
  return h;
}

}  // namespace gnb
