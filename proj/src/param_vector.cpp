#include "fedsim/param_vector.hpp"

#include <cmath>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"

namespace fedsim {
namespace {

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b)
    throw ConfigError("ParamVector dimension mismatch: " + std::to_string(a) + " vs " +
                      std::to_string(b));
}

}  // namespace

ParamVector::ParamVector(std::size_t d, double fill) : data_(d, fill) { require_finite("ctor"); }

ParamVector::ParamVector(std::vector<double> values) : data_(std::move(values)) {
  require_finite("ctor");
}

ParamVector::ParamVector(std::initializer_list<double> values) : data_(values) {
  require_finite("ctor");
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
  check_same_size(size(), o.size());
  kernels::add(data_, o.data_, data_);
  require_finite("+=");
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& o) {
  check_same_size(size(), o.size());
  kernels::sub(data_, o.data_, data_);
  require_finite("-=");
  return *this;
}

ParamVector& ParamVector::operator*=(double alpha) {
  kernels::scale(alpha, data_, data_);
  require_finite("*=");
  return *this;
}

ParamVector& ParamVector::axpy(double alpha, const ParamVector& x) { return axpy(alpha, x.span()); }

ParamVector& ParamVector::axpy(double alpha, std::span<const double> x) {
  check_same_size(size(), x.size());
  kernels::axpy(alpha, x, data_);
  require_finite("axpy");
  return *this;
}

double ParamVector::norm2() const { return kernels::sum_sq(data_); }
double ParamVector::norm() const { return std::sqrt(norm2()); }

bool ParamVector::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void ParamVector::require_finite(const char* where) const {
  if (!all_finite()) throw DivergenceError(std::string("non-finite ParamVector entry after ") + where);
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double alpha, ParamVector a) { return a *= alpha; }

double dot(const ParamVector& a, const ParamVector& b) {
  check_same_size(a.size(), b.size());
  return kernels::dot(a.span(), b.span());
}

double distance(const ParamVector& a, const ParamVector& b) { return (a - b).norm(); }

}  // namespace fedsim
