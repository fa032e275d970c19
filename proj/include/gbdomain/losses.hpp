#pragma once

#include "gbdomain/types.hpp"

#include <cstdint>
#include <string>

namespace gbdomain {

/// Codebook columns e_1..e_M (dim x M).
struct CodebookState {
  Matrix e;

  explicit CodebookState(Matrix codes);
  Index dim() const { return e.rows(); }
  Index size() const { return e.cols(); }
};

/// Gaussian codes with variance 1/dim, deterministic per seed.
CodebookState random_codebook(Index dim, std::uint64_t rng_seed, Index size = 64);

/// Softmax over codes of E^T s_j / sqrt(dim), one column per spatial location.
Matrix codebook_assign(const Eigen::Ref<const Matrix>& s, const CodebookState& cb);

/// s~_j = E a_j
Matrix reencode(const CodebookState& cb, const Eigen::Ref<const Matrix>& a);

/// Global average pooling of a dim x P map.
Vector gap(const Eigen::Ref<const Matrix>& x);

/// A scalar loss and its gradient with respect to one input.
struct LossTerm {
  double value = 0.0;
  Matrix grad;
};

/// Mean over present pseudo-domains of ||nu_k - nu||^2. `p` is B x dim.
LossTerm loss_sem(const Eigen::Ref<const Matrix>& p, const Labels& labels);

/// Mean over present pseudo-domains of the within-domain mean squared deviation. `t` is B x dim.
LossTerm loss_sty(const Eigen::Ref<const Matrix>& t, const Labels& labels);

/// Mean squared cosine between matching columns of S and T (dim x P). The
/// gradient is with respect to T; S is treated as a constant.
LossTerm loss_orth(const Eigen::Ref<const Matrix>& s_flat, const Eigen::Ref<const Matrix>& t_flat, double eps = 1e-8);

/// (1/B) sum_i ||pred_i - gt_i||^2 over rows (one flattened map per row).
LossTerm loss_den(const Eigen::Ref<const Matrix>& pred, const Eigen::Ref<const Matrix>& gt);

struct LossWeights {
  double sem = 0.1;
  double sty = 0.1;
  double orth = 0.1;
};

struct LossParts {
  LossTerm den, sem, sty, orth;
};

struct LossReport {
  double den = 0.0, sem = 0.0, sty = 0.0, orth = 0.0;
  double total = 0.0;
  LossWeights weights;
  Matrix grad_pred;    // d total / d pred
  Matrix grad_p;       // d total / d p
  Matrix grad_t;       // d total / d t
  Matrix grad_t_flat;  // d total / d T_flat
  Matrix grad_s_flat;  // always zero: S is held constant in the orthogonality term
};

/// total = den + w.sem*sem + w.sty*sty + w.orth*orth, gradients scaled alike.
/// `s_rows` x `s_cols` sizes the (zero) semantic-map gradient.
LossReport total_loss(const LossParts& parts, const LossWeights& weights, Index s_rows = 0, Index s_cols = 0);

std::string loss_report_to_json(const LossReport& r, bool include_grads = false);

}  // namespace gbdomain
