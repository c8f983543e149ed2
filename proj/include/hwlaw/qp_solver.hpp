#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hwlaw {

/// minimize 0.5 z'Hz + g'z  subject to  A z <= b.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  [[nodiscard]] int num_vars() const { return static_cast<int>(g.size()); }
  [[nodiscard]] int num_rows() const { return static_cast<int>(b.size()); }
  [[nodiscard]] double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + g.dot(z); }
};

struct QpSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  std::vector<int> active;  ///< rows at their bound
  Eigen::VectorXd multipliers;  ///< one per row, zero when inactive
  int iterations = 0;
};

class QpError : public std::runtime_error {
 public:
  QpError(const std::string& what, QpSolution best) : std::runtime_error(what), best_(std::move(best)) {}
  [[nodiscard]] const QpSolution& best_iterate() const { return best_; }

 private:
  QpSolution best_;
};

struct QpOptions {
  int max_iterations = 0;  ///< 0 picks a bound from the problem size
  double feasibility_tol = 1e-9;
};

/// Dual active-set method for strictly convex QPs. Throws QpError on an
/// infeasible problem or when the iteration limit is hit, and
/// std::invalid_argument on malformed input or a non positive definite H.
QpSolution solve_qp(const QpProblem& qp, const QpOptions& options = {});

}  // namespace hwlaw
