#include "i2o/respoly.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace i2o::respoly {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Runs the residual recursion up to `degree` and returns every P_k. `one` is
// the multiplicative identity, `arg` the scalar or matrix argument.
template <class T>
std::vector<T> recurse(const GradientMethod& method, std::size_t degree, const T& one,
                       const T& arg) {
  std::vector<T> p;
  p.reserve(degree + 1);
  p.push_back(one);
  std::visit(
      Overloaded{
          [&](const PlainGd& gd) {
            const T step = one - gd.eta * arg;
            for (std::size_t k = 0; k < degree; ++k) p.push_back(step * p.back());
          },
          [&](const Momentum& hb) {
            if (degree == 0) return;
            p.push_back(one - (hb.eta / (1.0 + hb.m)) * arg);
            const T step = one - hb.eta * arg;
            for (std::size_t k = 1; k < degree; ++k) {
              T next = step * p[k];
              next += hb.m * (p[k] - p[k - 1]);
              p.push_back(std::move(next));
            }
          },
          [&](const CustomSchedule& s) {
            for (std::size_t k = 0; k < degree; ++k) {
              const auto& c = s.coefficients[k];
              T next = (one + c[k] * arg) * p[k];
              for (std::size_t i = 0; i < k; ++i) {
                if (c[i] != 0.0) next += c[i] * (p[i + 1] - p[i]);
              }
              p.push_back(std::move(next));
            }
          }},
      method);
  return p;
}

void check_degree(const GradientMethod& method, std::size_t degree) {
  if (const auto* s = std::get_if<CustomSchedule>(&method); s && s->coefficients.size() < degree) {
    throw std::invalid_argument("residual_poly: custom schedule has " +
                                std::to_string(s->coefficients.size()) + " steps, need " +
                                std::to_string(degree));
  }
}

// Largest eigenvalue of a symmetric positive semi-definite matrix.
double lambda_max(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

void require_convergent(const GradientMethod& method, double l_max) {
  std::visit(Overloaded{[&](const PlainGd& gd) {
                          if (!(gd.eta * l_max < 2.0)) {
                            throw std::invalid_argument(
                                "procedure_from_quadratic: gradient descent diverges, need eta < 2 / "
                                "lambda_max");
                          }
                        },
                        [&](const Momentum& hb) {
                          if (!(hb.eta * l_max < 2.0 * (1.0 + hb.m))) {
                            throw std::invalid_argument(
                                "procedure_from_quadratic: momentum diverges, need eta < 2 (1 + m) / "
                                "lambda_max");
                          }
                        },
                        [](const CustomSchedule&) {}},
             method);
}

}  // namespace

void validate_method(const GradientMethod& method) {
  std::visit(
      Overloaded{
          [](const PlainGd& gd) {
            if (!(gd.eta > 0.0) || !std::isfinite(gd.eta)) {
              throw std::invalid_argument("gradient method: eta must be positive");
            }
          },
          [](const Momentum& hb) {
            if (!(hb.eta > 0.0) || !std::isfinite(hb.eta)) {
              throw std::invalid_argument("gradient method: eta must be positive");
            }
            if (!(hb.m >= 0.0 && hb.m < 1.0)) {
              throw std::invalid_argument("gradient method: momentum must lie in [0, 1)");
            }
          },
          [](const CustomSchedule& s) {
            for (std::size_t k = 0; k < s.coefficients.size(); ++k) {
              if (s.coefficients[k].size() != k + 1) {
                throw std::invalid_argument("custom schedule: step " + std::to_string(k) +
                                            " needs " + std::to_string(k + 1) + " coefficients");
              }
              for (double c : s.coefficients[k]) {
                if (!std::isfinite(c)) throw std::invalid_argument("custom schedule: non-finite coefficient");
              }
            }
          }},
      method);
}

std::vector<double> step_coefficients(const GradientMethod& method, std::size_t step) {
  std::vector<double> c(step + 1, 0.0);
  std::visit(Overloaded{[&](const PlainGd& gd) { c[step] = -gd.eta; },
                        [&](const Momentum& hb) {
                          c[step] = step == 0 ? -hb.eta / (1.0 + hb.m) : -hb.eta;
                          if (step >= 1) c[step - 1] = hb.m;
                        },
                        [&](const CustomSchedule& s) {
                          if (step >= s.coefficients.size()) {
                            throw std::out_of_range("custom schedule: no coefficients for step " +
                                                    std::to_string(step));
                          }
                          c = s.coefficients[step];
                        }},
             method);
  return c;
}

ResidualPolynomial::ResidualPolynomial(GradientMethod method, std::size_t degree)
    : method_(std::move(method)), degree_(degree) {
  validate_method(method_);
  check_degree(method_, degree_);
}

double ResidualPolynomial::operator()(double lambda) const {
  if (const auto* gd = std::get_if<PlainGd>(&method_)) {
    return std::pow(1.0 - gd->eta * lambda, static_cast<double>(degree_));
  }
  return recurse<double>(method_, degree_, 1.0, lambda).back();
}

Matrix ResidualPolynomial::operator()(const Matrix& h) const {
  if (h.rows() != h.cols()) throw std::invalid_argument("residual polynomial: non-square argument");
  const Matrix identity = Matrix::Identity(h.rows(), h.cols());
  if (const auto* gd = std::get_if<PlainGd>(&method_)) {
    return linops::matrix_power(identity - gd->eta * h, degree_);
  }
  return recurse<Matrix>(method_, degree_, identity, h).back();
}

std::vector<double> ResidualPolynomial::trajectory(double lambda) const {
  return recurse<double>(method_, degree_, 1.0, lambda);
}

ResidualPolynomial residual_poly(const GradientMethod& method, std::size_t n) {
  return ResidualPolynomial(method, n);
}

Vector quadratic_iterate(const Matrix& k, const Vector& c, const Vector& z0,
                         const ResidualPolynomial& poly) {
  if (c.size() != k.rows() || z0.size() != k.cols()) {
    throw std::invalid_argument("quadratic_iterate: dimension mismatch");
  }
  const Matrix h = k.transpose() * k;
  const Matrix p = poly(h);
  const Matrix identity = Matrix::Identity(h.rows(), h.cols());
  return p * z0 + (p - identity) * (linops::pinv(h) * (k.transpose() * c));
}

bool momentum_condition(double m, std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::pow(m, nn / 2.0) * (1.0 + (1.0 - m) / (1.0 + m * nn)) < 1.0;
}

std::size_t momentum_n0(double m) {
  if (!(m > 0.0 && m < 1.0)) throw std::invalid_argument("momentum_n0: m must lie in (0, 1)");
  // m^{N/2} -> 0 geometrically, so the scan terminates.
  std::size_t n = 0;
  while (!momentum_condition(m, n)) ++n;
  return n;
}

inner::LinearProcedure procedure_from_quadratic(const Matrix& k_in, const Matrix& u,
                                                const Vector& c, const GradientMethod& method,
                                                const Vector& z0, std::size_t n) {
  if (u.rows() != k_in.rows() || c.size() != k_in.rows() || z0.size() != k_in.cols()) {
    throw std::invalid_argument("procedure_from_quadratic: dimension mismatch");
  }
  if (linops::numerical_rank(k_in) != static_cast<std::size_t>(k_in.rows())) {
    throw inner::InvalidProblem("procedure_from_quadratic: k_in is not surjective");
  }
  const ResidualPolynomial poly(method, n);
  const Matrix h_bar = k_in * k_in.transpose();
  require_convergent(method, lambda_max(h_bar));

  const Matrix h = k_in.transpose() * k_in;
  const Matrix p_h = poly(h);
  const Matrix i_z = Matrix::Identity(h.rows(), h.cols());
  const Matrix i_x = Matrix::Identity(h_bar.rows(), h_bar.cols());

  inner::LinearProcedure proc;
  proc.e_n = (poly(h_bar) - i_x) * h_bar.llt().solve(i_x);
  proc.r_n = p_h * z0 + (p_h - i_z) * (linops::pinv(h) * (k_in.transpose() * c));
  proc.n = n;
  proc.problem = {k_in, k_in, u, c};
  std::visit(Overloaded{[&](const PlainGd& gd) { proc.eta = gd.eta; },
                        [&](const Momentum& hb) { proc.eta = hb.eta; },
                        [&](const CustomSchedule& s) {
                          proc.eta = s.coefficients.empty() ? 0.0 : -s.coefficients[0][0];
                        }},
             method);
  return proc;
}

}  // namespace i2o::respoly
