#pragma once
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedsim {

// Dense model vector. Every arithmetic member re-checks that all entries are
// finite and throws DivergenceError otherwise.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, double fill = 0.0);
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  std::size_t size() const { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> span() const { return data_; }
  std::span<double> span() { return data_; }
  const std::vector<double>& values() const { return data_; }

  ParamVector& operator+=(const ParamVector& o);
  ParamVector& operator-=(const ParamVector& o);
  ParamVector& operator*=(double alpha);
  // this += alpha * x
  ParamVector& axpy(double alpha, const ParamVector& x);
  ParamVector& axpy(double alpha, std::span<const double> x);

  double norm2() const;  // squared Euclidean norm
  double norm() const;
  bool all_finite() const;
  void require_finite(const char* where) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> data_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double alpha, ParamVector a);
double dot(const ParamVector& a, const ParamVector& b);
double distance(const ParamVector& a, const ParamVector& b);

}  // namespace fedsim
