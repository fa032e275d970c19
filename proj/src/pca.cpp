#include "gbdomain/pca.hpp"

#include "json.hpp"

#include <algorithm>

namespace gbdomain {

Index default_pca_dim(Index n, Index dim) { return std::max<Index>(1, std::min<Index>({32, dim, n - 1})); }

PcaModel pca_fit(const Eigen::Ref<const Points>& x, Index d) {
  const Index n = x.rows();
  const Index D = x.cols();
  require(n >= 2, ErrorCode::Precondition, "PCA needs at least two samples");
  require(d >= 1 && d <= std::min(n, D), ErrorCode::InvalidArgument,
          "PCA dimension " + std::to_string(d) + " out of range [1, " + std::to_string(std::min(n, D)) + "]");
  require(x.allFinite(), ErrorCode::NonFinite, "non-finite PCA input");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - model.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);

  // Eigenvalues come back ascending; take them from the top.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::Numeric, "covariance eigendecomposition failed");

  const double scale = std::max(cov.trace(), 0.0);
  const double floor = 1e-12 * std::max(scale, 1e-300);
  model.components.resize(d, D);
  model.explained_variance.resize(d);
  for (Index k = 0; k < d; ++k) {
    const Index src = D - 1 - k;
    double lambda = solver.eigenvalues()(src);
    if (lambda <= floor) {
      lambda = 0.0;
      model.rank_deficient = true;
    }
    Vector v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(k) = v.transpose();
    model.explained_variance(k) = lambda;
  }
  return model;
}

Points pca_transform(const PcaModel& model, const Eigen::Ref<const Points>& x) {
  require(x.cols() == model.input_dim(), ErrorCode::InvalidArgument,
          "PCA input has " + std::to_string(x.cols()) + " columns, model expects " + std::to_string(model.input_dim()));
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Points pca_inverse_transform(const PcaModel& model, const Eigen::Ref<const Points>& y) {
  require(y.cols() == model.output_dim(), ErrorCode::InvalidArgument, "reduced dimension mismatch");
  return (y * model.components).rowwise() + model.mean.transpose();
}

std::string pca_to_json(const PcaModel& model) {
  nlohmann::ordered_json j;
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["rows"] = model.components.rows();
  j["cols"] = model.components.cols();
  std::vector<double> comp;
  comp.reserve(static_cast<std::size_t>(model.components.size()));
  for (Index r = 0; r < model.components.rows(); ++r)
    for (Index c = 0; c < model.components.cols(); ++c) comp.push_back(model.components(r, c));
  j["components"] = comp;
  j["explained_variance"] =
      std::vector<double>(model.explained_variance.data(), model.explained_variance.data() + model.explained_variance.size());
  j["rank_deficient"] = model.rank_deficient;
  return j.dump();
}

PcaModel pca_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PcaModel m;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto comp = j.at("components").get<std::vector<double>>();
    const auto ev = j.at("explained_variance").get<std::vector<double>>();
    require(static_cast<Index>(mean.size()) == cols && static_cast<Index>(comp.size()) == rows * cols &&
                static_cast<Index>(ev.size()) == rows,
            ErrorCode::HeaderMismatch, "inconsistent PCA model shapes");
    m.mean = Eigen::Map<const Vector>(mean.data(), cols);
    m.components = Eigen::Map<const Points>(comp.data(), rows, cols);
    m.explained_variance = Eigen::Map<const Vector>(ev.data(), rows);
    m.rank_deficient = j.value("rank_deficient", false);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, std::string("malformed PCA model: ") + e.what());
  }
}

}  // namespace gbdomain
