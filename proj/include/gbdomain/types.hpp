#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbdomain {

using Index = Eigen::Index;

/// Samples are rows. Row-major so that per-sample access is contiguous.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Points = PointsT<double>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Labels = std::vector<int>;
using IndexList = std::vector<Index>;

enum class ErrorCode {
  InvalidArgument,
  Precondition,
  Numeric,
  Io,
  HeaderMismatch,
  PayloadSize,
  RowArity,
  NonFinite,
  DuplicateId,
  ClusterCountChanged,
};

/// Every failure in the library is reported as a gbdomain::Error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace gbdomain
