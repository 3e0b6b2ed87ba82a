#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace ilab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error hierarchy. Every library failure derives from Error so callers can
// catch broadly; the CLI maps ParameterError to a configuration failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class LinalgError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// n x d states together with the time and seed that produced them.
struct SampleBatch {
  RowMatrix states;
  double t = 0.0;
  std::uint64_t seed = 0;

  SampleBatch() = default;
  SampleBatch(Eigen::Index n, Eigen::Index d, double time, std::uint64_t s)
      : states(RowMatrix::Zero(n, d)), t(time), seed(s) {}

  Eigen::Index size() const { return states.rows(); }
  Eigen::Index dim() const { return states.cols(); }

  std::span<double> row(Eigen::Index i) {
    return {states.data() + i * states.cols(), static_cast<std::size_t>(states.cols())};
  }
  std::span<const double> row(Eigen::Index i) const {
    return {states.data() + i * states.cols(), static_cast<std::size_t>(states.cols())};
  }
};

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

inline Eigen::Map<Eigen::VectorXd> as_vector(std::span<double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace ilab
