#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "segdyn/common.hpp"

namespace segdyn {

enum class ModelId { LinearDiagonal, Lorenz, QuadraticGeneric };

std::string to_string(ModelId id);
ModelId model_id_from_string(const std::string& name);

/// dx_i/dt = -rate_i * x_i
struct LinearDiagonalParams {
  std::vector<double> rates;
};

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

/// dx_i/dt = sum_j L_ij x_j + sum_jk Q_ijk x_j x_k + f_i, all arrays row-major.
/// Galerkin truncations of quadratic PDEs fit this form.
struct QuadraticParams {
  std::vector<double> linear;     // d*d
  std::vector<double> quadratic;  // d*d*d
  std::vector<double> forcing;    // d
};

class FlowModel {
 public:
  static FlowModel linear_diagonal(std::vector<double> rates);
  static FlowModel lorenz(LorenzParams params = {});
  static FlowModel quadratic(std::size_t dimension, QuadraticParams params);

  ModelId id() const { return id_; }
  std::size_t dimension() const { return dimension_; }

  const LinearDiagonalParams& linear_diagonal_params() const;
  const LorenzParams& lorenz_params() const;
  const QuadraticParams& quadratic_params() const;

  /// Vector field at x, written into dx. Both spans have length dimension().
  void rhs(std::span<const double> x, std::span<double> dx) const;

 private:
  FlowModel(ModelId id, std::size_t dim,
            std::variant<LinearDiagonalParams, LorenzParams, QuadraticParams> p);

  ModelId id_;
  std::size_t dimension_;
  std::variant<LinearDiagonalParams, LorenzParams, QuadraticParams> params_;
  // Nonzero quadratic terms, so sparse Galerkin tensors stay cheap.
  struct QuadTerm {
    std::uint32_t i, j, k;
    double c;
  };
  std::vector<QuadTerm> quad_terms_;
};

enum class Scheme { RK4 };

struct IntegratorConfig {
  double step = 1e-3;
  Scheme scheme = Scheme::RK4;
};

/// Number of full steps of size h plus the length of a trailing partial step.
/// Horizons within 1e-9 relative of a multiple of h get no partial step, so
/// advancing window by window reproduces a single pass bit for bit.
struct StepPlan {
  std::int64_t full_steps = 0;
  double partial = 0.0;
};
StepPlan plan_steps(double t, double h);

/// Classical RK4 with reusable scratch space. Not thread-safe; make one per worker.
class Rk4Stepper {
 public:
  Rk4Stepper(const FlowModel& model, const IntegratorConfig& cfg);

  /// Advances x in place by t >= 0. `t_offset` only labels blow-up errors.
  void advance(std::span<double> x, double t, double t_offset = 0.0);

  const FlowModel& model() const { return model_; }
  const IntegratorConfig& config() const { return cfg_; }

 private:
  void step(std::span<double> x, double h);

  const FlowModel& model_;
  IntegratorConfig cfg_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

struct TrajectorySample {
  std::vector<double> times;
  std::vector<StateVector> states;
};

void validate(const FlowModel& model, const StateVector& x);
void validate(const IntegratorConfig& cfg);

/// Numerical F^t(x). t = 0 returns x unchanged.
StateVector advance(const FlowModel& model, const StateVector& x, double t,
                    const IntegratorConfig& cfg);

/// n_samples states on the uniform grid over [0, horizon], one continuous pass.
TrajectorySample sample_trajectory(const FlowModel& model, const StateVector& x,
                                   double horizon, int n_samples,
                                   const IntegratorConfig& cfg);

/// Operator 2-norm of the central-difference Jacobian of y -> F^T(y) at x.
double jacobian_norm(const FlowModel& model, const StateVector& x, double T,
                     const IntegratorConfig& cfg, double fd_step);

}  // namespace segdyn
