#include "segdyn/flow.hpp"

#include <Eigen/Dense>
#include <sstream>

namespace segdyn {

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::LinearDiagonal:
      return "LinearDiagonal";
    case ModelId::Lorenz:
      return "Lorenz";
    case ModelId::QuadraticGeneric:
      return "QuadraticGeneric";
  }
  return "?";
}

ModelId model_id_from_string(const std::string& name) {
  if (name == "LinearDiagonal") return ModelId::LinearDiagonal;
  if (name == "Lorenz") return ModelId::Lorenz;
  if (name == "QuadraticGeneric") return ModelId::QuadraticGeneric;
  throw ValidationError("unknown model_id '" + name + "'");
}

FlowModel::FlowModel(ModelId id, std::size_t dim,
                     std::variant<LinearDiagonalParams, LorenzParams, QuadraticParams> p)
    : id_(id), dimension_(dim), params_(std::move(p)) {
  if (dimension_ == 0) throw ValidationError("model dimension must be positive");
}

FlowModel FlowModel::linear_diagonal(std::vector<double> rates) {
  for (double r : rates)
    if (!std::isfinite(r)) throw ValidationError("LinearDiagonal rates must be finite");
  const std::size_t d = rates.size();
  return FlowModel(ModelId::LinearDiagonal, d, LinearDiagonalParams{std::move(rates)});
}

FlowModel FlowModel::lorenz(LorenzParams params) {
  if (!std::isfinite(params.sigma) || !std::isfinite(params.rho) ||
      !std::isfinite(params.beta))
    throw ValidationError("Lorenz parameters must be finite");
  return FlowModel(ModelId::Lorenz, 3, params);
}

FlowModel FlowModel::quadratic(std::size_t d, QuadraticParams params) {
  if (params.linear.empty()) params.linear.assign(d * d, 0.0);
  if (params.quadratic.empty()) params.quadratic.assign(d * d * d, 0.0);
  if (params.forcing.empty()) params.forcing.assign(d, 0.0);
  if (params.linear.size() != d * d || params.quadratic.size() != d * d * d ||
      params.forcing.size() != d) {
    std::ostringstream os;
    os << "QuadraticGeneric shapes inconsistent with dimension " << d << ": L has "
       << params.linear.size() << ", Q has " << params.quadratic.size() << ", f has "
       << params.forcing.size() << " entries";
    throw ValidationError(os.str());
  }
  for (const auto* arr : {&params.linear, &params.quadratic, &params.forcing})
    if (!all_finite(*arr)) throw ValidationError("QuadraticGeneric coefficients must be finite");

  FlowModel m(ModelId::QuadraticGeneric, d, params);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const double c = params.quadratic[(i * d + j) * d + k];
        if (c != 0.0)
          m.quad_terms_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                   static_cast<std::uint32_t>(k), c});
      }
  return m;
}

const LinearDiagonalParams& FlowModel::linear_diagonal_params() const {
  return std::get<LinearDiagonalParams>(params_);
}
const LorenzParams& FlowModel::lorenz_params() const { return std::get<LorenzParams>(params_); }
const QuadraticParams& FlowModel::quadratic_params() const {
  return std::get<QuadraticParams>(params_);
}

void FlowModel::rhs(std::span<const double> x, std::span<double> dx) const {
  switch (id_) {
    case ModelId::LinearDiagonal: {
      const auto& rates = std::get<LinearDiagonalParams>(params_).rates;
      for (std::size_t i = 0; i < dimension_; ++i) dx[i] = -rates[i] * x[i];
      return;
    }
    case ModelId::Lorenz: {
      const auto& p = std::get<LorenzParams>(params_);
      dx[0] = p.sigma * (x[1] - x[0]);
      dx[1] = x[0] * (p.rho - x[2]) - x[1];
      dx[2] = x[0] * x[1] - p.beta * x[2];
      return;
    }
    case ModelId::QuadraticGeneric: {
      const auto& p = std::get<QuadraticParams>(params_);
      const std::size_t d = dimension_;
      for (std::size_t i = 0; i < d; ++i) {
        double acc = p.forcing[i];
        const double* row = &p.linear[i * d];
        for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
        dx[i] = acc;
      }
      for (const auto& t : quad_terms_) dx[t.i] += t.c * x[t.j] * x[t.k];
      return;
    }
  }
}

StepPlan plan_steps(double t, double h) {
  StepPlan plan;
  if (t <= 0.0) return plan;
  const double ratio = t / h;
  const double nearest = std::round(ratio);
  if (nearest >= 1.0 && std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
    plan.full_steps = static_cast<std::int64_t>(nearest);
    return plan;
  }
  plan.full_steps = static_cast<std::int64_t>(std::floor(ratio));
  plan.partial = t - static_cast<double>(plan.full_steps) * h;
  if (plan.partial < 0.0) plan.partial = 0.0;
  return plan;
}

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step))
    throw ValidationError("integrator step must be a positive finite number");
}

void validate(const FlowModel& model, const StateVector& x) {
  if (x.size() != model.dimension()) {
    std::ostringstream os;
    os << "state has " << x.size() << " coordinates, model " << to_string(model.id())
       << " expects " << model.dimension();
    throw ValidationError(os.str());
  }
  if (!all_finite(x)) throw ValidationError("state contains non-finite coordinates");
}

Rk4Stepper::Rk4Stepper(const FlowModel& model, const IntegratorConfig& cfg)
    : model_(model), cfg_(cfg) {
  validate(cfg_);
  const std::size_t d = model.dimension();
  k1_.resize(d);
  k2_.resize(d);
  k3_.resize(d);
  k4_.resize(d);
  tmp_.resize(d);
}

void Rk4Stepper::step(std::span<double> x, double h) {
  const std::size_t d = x.size();
  model_.rhs(x, k1_);
  for (std::size_t i = 0; i < d; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
  model_.rhs(tmp_, k2_);
  for (std::size_t i = 0; i < d; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
  model_.rhs(tmp_, k3_);
  for (std::size_t i = 0; i < d; ++i) tmp_[i] = x[i] + h * k3_[i];
  model_.rhs(tmp_, k4_);
  for (std::size_t i = 0; i < d; ++i)
    x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
}

void Rk4Stepper::advance(std::span<double> x, double t, double t_offset) {
  if (t < 0.0 || !std::isfinite(t)) throw ValidationError("advance requires finite t >= 0");
  const StepPlan plan = plan_steps(t, cfg_.step);
  const auto blow_up = [&](double reached) {
    std::ostringstream os;
    os << "blow-up: non-finite state at t=" << reached;
    throw NumericsError(os.str());
  };
  for (std::int64_t s = 0; s < plan.full_steps; ++s) {
    step(x, cfg_.step);
    if (!all_finite(x)) blow_up(t_offset + static_cast<double>(s + 1) * cfg_.step);
  }
  if (plan.partial > 0.0) {
    step(x, plan.partial);
    if (!all_finite(x)) blow_up(t_offset + t);
  }
}

StateVector advance(const FlowModel& model, const StateVector& x, double t,
                    const IntegratorConfig& cfg) {
  validate(model, x);
  if (t < 0.0 || !std::isfinite(t)) throw ValidationError("advance requires finite t >= 0");
  StateVector y = x;
  if (t == 0.0) return y;
  Rk4Stepper stepper(model, cfg);
  stepper.advance(y, t);
  return y;
}

TrajectorySample sample_trajectory(const FlowModel& model, const StateVector& x,
                                   double horizon, int n_samples,
                                   const IntegratorConfig& cfg) {
  validate(model, x);
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("sample_trajectory requires horizon > 0");
  if (n_samples < 2) throw ValidationError("sample_trajectory requires n_samples >= 2");

  TrajectorySample out;
  out.times.resize(static_cast<std::size_t>(n_samples));
  out.states.reserve(static_cast<std::size_t>(n_samples));
  const double dt = horizon / static_cast<double>(n_samples - 1);
  Rk4Stepper stepper(model, cfg);
  StateVector y = x;
  out.times[0] = 0.0;
  out.states.push_back(y);
  for (int k = 1; k < n_samples; ++k) {
    stepper.advance(y, dt, dt * (k - 1));
    out.times[static_cast<std::size_t>(k)] =
        k == n_samples - 1 ? horizon : dt * static_cast<double>(k);
    out.states.push_back(y);
  }
  return out;
}

double jacobian_norm(const FlowModel& model, const StateVector& x, double T,
                     const IntegratorConfig& cfg, double fd_step) {
  validate(model, x);
  if (!(fd_step > 0.0)) throw ValidationError("jacobian_norm requires fd_step > 0");
  const std::size_t d = model.dimension();
  Eigen::MatrixXd jac(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    StateVector plus = x, minus = x;
    plus[j] += fd_step;
    minus[j] -= fd_step;
    const StateVector fp = advance(model, plus, T, cfg);
    const StateVector fm = advance(model, minus, T, cfg);
    const double width = plus[j] - minus[j];
    for (std::size_t i = 0; i < d; ++i) jac(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / width;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  return svd.singularValues()(0);
}

}  // namespace segdyn
