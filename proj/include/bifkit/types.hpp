#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace bifkit {

using Index = Eigen::Index;
using complex = std::complex<double>;

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Hermitian inner product, conjugate-linear in the first argument.
inline complex inner(const CVec& a, const CVec& b) { return a.dot(b); }

/// Ordered, named parameter vector with one distinguished continuation parameter.
class Parameters {
 public:
  Parameters() = default;
  Parameters(std::vector<std::string> names, Vec values, Index active = 0);

  [[nodiscard]] Index size() const { return values_.size(); }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] const Vec& values() const { return values_; }
  [[nodiscard]] Index active_index() const { return active_; }
  [[nodiscard]] const std::string& active_name() const { return names_[active_]; }

  /// Throws invalid_configuration for unknown names.
  [[nodiscard]] Index index_of(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const;

  [[nodiscard]] double operator[](Index i) const { return values_[i]; }
  [[nodiscard]] double get(const std::string& name) const { return values_[index_of(name)]; }
  [[nodiscard]] double active_value() const { return values_[active_]; }

  void set(Index i, double v) { values_[i] = v; }
  void set(const std::string& name, double v) { values_[index_of(name)] = v; }
  void set_active_value(double v) { values_[active_] = v; }
  void set_active(Index i);
  void set_active(const std::string& name) { set_active(index_of(name)); }

  /// Copy with one entry replaced.
  [[nodiscard]] Parameters with(Index i, double v) const;

 private:
  std::vector<std::string> names_;
  Vec values_;
  Index active_ = 0;
};

}  // namespace bifkit
