#include "gbdomain/losses.hpp"

#include "gbdomain/rng.hpp"

#include "json.hpp"

#include <cmath>
#include <map>

namespace gbdomain {

namespace {

// Members of each pseudo-domain present in the batch, keyed by label.
std::map<int, std::vector<Index>> group(const Labels& labels, Index rows) {
  require(static_cast<Index>(labels.size()) == rows, ErrorCode::InvalidArgument,
          "label count does not match batch size");
  std::map<int, std::vector<Index>> g;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0, ErrorCode::InvalidArgument, "pseudo-domain labels must be nonnegative");
    g[labels[i]].push_back(static_cast<Index>(i));
  }
  return g;
}

Eigen::RowVectorXd group_mean(const Eigen::Ref<const Matrix>& x, const std::vector<Index>& idx) {
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(x.cols());
  for (Index i : idx) m += x.row(i);
  return m / static_cast<double>(idx.size());
}

}  // namespace

CodebookState::CodebookState(Matrix codes) : e(std::move(codes)) {
  require(e.cols() >= 1 && e.rows() >= 1, ErrorCode::InvalidArgument, "codebook needs at least one code");
  require(e.allFinite(), ErrorCode::NonFinite, "non-finite codebook");
}

CodebookState random_codebook(Index dim, std::uint64_t rng_seed, Index size) {
  require(dim >= 1 && size >= 1, ErrorCode::InvalidArgument, "codebook needs positive dim and size");
  Rng rng(rng_seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix e(dim, size);
  for (Index c = 0; c < size; ++c)
    for (Index r = 0; r < dim; ++r) e(r, c) = rng.normal(0.0, sd);
  return CodebookState(std::move(e));
}

Matrix codebook_assign(const Eigen::Ref<const Matrix>& s, const CodebookState& cb) {
  require(s.rows() == cb.dim(), ErrorCode::InvalidArgument, "feature dimension does not match the codebook");
  Matrix logits = (cb.e.transpose() * s) / std::sqrt(static_cast<double>(cb.dim()));
  for (Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return logits;
}

Matrix reencode(const CodebookState& cb, const Eigen::Ref<const Matrix>& a) {
  require(a.rows() == cb.size(), ErrorCode::InvalidArgument, "assignment rows do not match the codebook size");
  return cb.e * a;
}

Vector gap(const Eigen::Ref<const Matrix>& x) {
  require(x.cols() >= 1, ErrorCode::InvalidArgument, "cannot pool an empty map");
  return x.rowwise().mean();
}

LossTerm loss_sem(const Eigen::Ref<const Matrix>& p, const Labels& labels) {
  require(p.rows() >= 1, ErrorCode::InvalidArgument, "empty batch");
  const auto groups = group(labels, p.rows());
  const Eigen::RowVectorXd nu = p.colwise().mean();
  const double kb = static_cast<double>(groups.size());

  LossTerm out;
  out.grad = Matrix::Zero(p.rows(), p.cols());
  Eigen::RowVectorXd gap_sum = Eigen::RowVectorXd::Zero(p.cols());
  for (const auto& [label, idx] : groups) {
    const Eigen::RowVectorXd g = group_mean(p, idx) - nu;
    out.value += g.squaredNorm();
    gap_sum += g;
    for (Index i : idx) out.grad.row(i) += (2.0 / kb) * g / static_cast<double>(idx.size());
  }
  out.value /= kb;
  out.grad.rowwise() -= (2.0 / kb) * gap_sum / static_cast<double>(p.rows());
  return out;
}

LossTerm loss_sty(const Eigen::Ref<const Matrix>& t, const Labels& labels) {
  require(t.rows() >= 1, ErrorCode::InvalidArgument, "empty batch");
  const auto groups = group(labels, t.rows());
  const double kb = static_cast<double>(groups.size());

  LossTerm out;
  out.grad = Matrix::Zero(t.rows(), t.cols());
  for (const auto& [label, idx] : groups) {
    const Eigen::RowVectorXd center = group_mean(t, idx);
    const double nk = static_cast<double>(idx.size());
    double spread = 0.0;
    for (Index i : idx) {
      const Eigen::RowVectorXd dev = t.row(i) - center;
      spread += dev.squaredNorm();
      // the center's own dependence on t_i cancels because deviations sum to zero
      out.grad.row(i) = (2.0 / (kb * nk)) * dev;
    }
    out.value += spread / nk;
  }
  out.value /= kb;
  return out;
}

LossTerm loss_orth(const Eigen::Ref<const Matrix>& s_flat, const Eigen::Ref<const Matrix>& t_flat, double eps) {
  require(s_flat.rows() == t_flat.rows() && s_flat.cols() == t_flat.cols(), ErrorCode::InvalidArgument,
          "semantic and style maps differ in shape");
  require(s_flat.cols() >= 1, ErrorCode::InvalidArgument, "empty feature maps");
  require(eps > 0.0, ErrorCode::InvalidArgument, "eps must be positive");
  const double p = static_cast<double>(s_flat.cols());

  LossTerm out;
  out.grad = Matrix::Zero(t_flat.rows(), t_flat.cols());
  for (Index j = 0; j < s_flat.cols(); ++j) {
    const auto s = s_flat.col(j);
    const auto tau = t_flat.col(j);
    const double dot = tau.dot(s);
    const double nt = tau.norm();
    const double ns = s.norm();
    const double den = nt * ns + eps;
    const double c = dot / den;
    out.value += c * c;
    Vector dc = s / den;
    if (nt > 0.0) dc -= (dot * ns / (den * den * nt)) * tau;
    out.grad.col(j) = (2.0 * c / p) * dc;
  }
  out.value /= p;
  return out;
}

LossTerm loss_den(const Eigen::Ref<const Matrix>& pred, const Eigen::Ref<const Matrix>& gt) {
  require(pred.rows() == gt.rows() && pred.cols() == gt.cols(), ErrorCode::InvalidArgument,
          "prediction and ground truth differ in shape");
  require(pred.rows() >= 1, ErrorCode::InvalidArgument, "empty batch");
  const double b = static_cast<double>(pred.rows());
  const Matrix diff = pred - gt;
  return LossTerm{diff.squaredNorm() / b, (2.0 / b) * diff};
}

LossReport total_loss(const LossParts& parts, const LossWeights& weights, Index s_rows, Index s_cols) {
  require(weights.sem >= 0.0 && weights.sty >= 0.0 && weights.orth >= 0.0, ErrorCode::InvalidArgument,
          "loss weights must be nonnegative");
  for (double v : {parts.den.value, parts.sem.value, parts.sty.value, parts.orth.value})
    require(std::isfinite(v), ErrorCode::NonFinite, "non-finite loss component");
  LossReport r;
  r.weights = weights;
  r.den = parts.den.value;
  r.sem = parts.sem.value;
  r.sty = parts.sty.value;
  r.orth = parts.orth.value;
  r.total = r.den + weights.sem * r.sem + weights.sty * r.sty + weights.orth * r.orth;
  r.grad_pred = parts.den.grad;
  r.grad_p = weights.sem * parts.sem.grad;
  r.grad_t = weights.sty * parts.sty.grad;
  r.grad_t_flat = weights.orth * parts.orth.grad;
  r.grad_s_flat = Matrix::Zero(s_rows > 0 ? s_rows : parts.orth.grad.rows(), s_cols > 0 ? s_cols : parts.orth.grad.cols());
  return r;
}

std::string loss_report_to_json(const LossReport& r, bool include_grads) {
  nlohmann::ordered_json j;
  j["den"] = r.den;
  j["sem"] = r.sem;
  j["sty"] = r.sty;
  j["orth"] = r.orth;
  j["total"] = r.total;
  j["weights"] = {{"sem", r.weights.sem}, {"sty", r.weights.sty}, {"orth", r.weights.orth}};
  if (include_grads) {
    auto mat = [](const Matrix& m) {
      auto rows = nlohmann::ordered_json::array();
      for (Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(i, c);
        rows.push_back(row);
      }
      return rows;
    };
    j["grads"] = {{"pred", mat(r.grad_pred)},
                  {"p", mat(r.grad_p)},
                  {"t", mat(r.grad_t)},
                  {"T_flat", mat(r.grad_t_flat)},
                  {"S_flat", mat(r.grad_s_flat)}};
  }
  return j.dump(2);
}

}  // namespace gbdomain
