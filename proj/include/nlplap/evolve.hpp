#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nlplap/graph.hpp"
#include "nlplap/mesh.hpp"
#include "nlplap/plaplacian.hpp"

namespace nlplap {

struct ZeroSource {};

struct TimeConstantSource {
    GridFunction f;
};

/// f(x, t) = a(x) b(t). `b_integral(t0, t1)` = int_{t0}^{t1} b; when empty the
/// integral falls back to 4-point Gauss quadrature.
struct SeparableSource {
    std::function<double(double)> a;
    std::function<double(double)> b;
    std::function<double(double, double)> b_integral;
};

/// Snapshots f(., t_m), linearly interpolated in time and held constant
/// outside [t_0, t_M].
struct TabulatedSource {
    std::vector<double> times;
    std::vector<GridFunction> values;
};

/// Second member f of the evolution problem.
class SourceTerm {
public:
    using Variant = std::variant<ZeroSource, TimeConstantSource, SeparableSource, TabulatedSource>;

    SourceTerm() : variant_(ZeroSource{}) {}
    static SourceTerm zero() { return {}; }
    static SourceTerm time_constant(GridFunction f);
    /// Projects f onto the mesh.
    static SourceTerm time_constant(const std::function<double(double)>& f, const MeshPtr& mesh);
    static SourceTerm separable(std::function<double(double)> a, std::function<double(double)> b,
                                std::function<double(double, double)> b_integral = {});
    static SourceTerm tabulated(std::vector<double> times, std::vector<GridFunction> values);

    const Variant& variant() const noexcept { return variant_; }
    bool is_zero() const noexcept { return std::holds_alternative<ZeroSource>(variant_); }
    bool is_time_independent() const noexcept {
        return is_zero() || std::holds_alternative<TimeConstantSource>(variant_);
    }

    /// P_n f(., t).
    GridFunction at(const MeshPtr& mesh, double t) const;
    /// (1/(t1 - t0)) int_{t0}^{t1} P_n f(., t) dt.
    GridFunction step_average(const MeshPtr& mesh, double t0, double t1) const;

private:
    explicit SourceTerm(Variant v) : variant_(std::move(v)) {}
    Variant variant_;
};

/// Evolution problem u' = -Delta_p u + f, u(0) = g on [0, T], driven either by a
/// discrete kernel or by a sampled graph (Lambda_ij = 1/rho on edges, h = 1/n).
class Problem {
public:
    static Problem kernelized(std::shared_ptr<const DiscreteKernel> k, double p, GridFunction g, SourceTerm f, double T);
    static Problem graph(std::shared_ptr<const GraphSample> graph, double p, GridFunction g, SourceTerm f, double T);

    bool is_graph() const noexcept { return graph_ != nullptr; }
    const DiscreteKernel& kernel() const;
    const GraphSample& graph_sample() const;
    const SparseKernel& graph_kernel() const;

    double p() const noexcept { return p_; }
    const GridFunction& g() const noexcept { return g_; }
    const SourceTerm& f() const noexcept { return f_; }
    double T() const noexcept { return T_; }
    const MeshPtr& mesh_ptr() const noexcept { return g_.mesh_ptr(); }
    std::size_t size() const noexcept { return g_.size(); }

    /// L^{inf,1} norm of the injected operator weights.
    double k_inf1() const;

private:
    Problem(double p, GridFunction g, SourceTerm f, double T) : p_(p), g_(std::move(g)), f_(std::move(f)), T_(T) {}

    std::shared_ptr<const DiscreteKernel> kernel_;
    std::shared_ptr<const GraphSample> graph_;
    std::shared_ptr<const SparseKernel> graph_kernel_;
    double p_;
    GridFunction g_;
    SourceTerm f_;
    double T_;
};

/// Delta_p u for the problem's operator (the graph case sums over neighbors only).
GridFunction apply_operator(const Problem& prob, const GridFunction& u);

enum class Scheme { ForwardEuler, SubgradientP1, BackwardEuler };

std::string scheme_name(Scheme s);

struct StepInfo {
    double tau = 0.0;
    /// alpha_k for the subgradient scheme, 0 otherwise.
    double alpha = 0.0;
    /// Resolvent iterations and final residual for backward Euler, 0 otherwise.
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Time partition t_0 = 0 < ... < t_N = T with the iterates u^0..u^N. In thin
/// storage mode only every `checkpoint_every`-th state (and the last) is kept.
class Trajectory {
public:
    Trajectory(Scheme scheme, MeshPtr mesh, std::size_t checkpoint_every = 1);

    Scheme scheme() const noexcept { return scheme_; }
    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    std::size_t steps() const noexcept { return info_.size(); }
    double final_time() const { return times_.back(); }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<StepInfo>& step_info() const noexcept { return info_; }
    bool is_thin() const noexcept { return every_ > 1; }
    std::size_t checkpoint_every() const noexcept { return every_; }

    bool has_state(std::size_t k) const;
    /// u^k; throws InvalidArgument if the state was not kept.
    const GridFunction& state(std::size_t k) const;
    const GridFunction& final_state() const { return state(steps()); }

    void push_initial(GridFunction g);
    /// Appends u^k; u^{k-1} is dropped unless it is a checkpoint.
    void push_step(double t, GridFunction u, const StepInfo& info);

private:
    Scheme scheme_;
    MeshPtr mesh_;
    std::size_t every_;
    std::vector<double> times_;
    std::vector<StepInfo> info_;
    std::vector<std::optional<GridFunction>> states_;
};

struct ForwardEulerOptions {
    double tau_max = 1e-2;
    double safety = 0.9;
    double residual_floor = 1e-8;
    std::size_t checkpoint_every = 1;
};

/// u^k = u^{k-1} + tau_k (-Delta_p u^{k-1} + f), p in (1, 2], f independent of t,
/// with tau_k = min(tau_max, safety 2C r^((2-p)/(p-1)), T - t_{k-1}) and
/// r = ||Delta_p u^{k-1} - f||_{h,2}. For p < 2 and r <= residual_floor the
/// state counts as stationary and tau_k = min(tau_max, T - t_{k-1}).
Trajectory forward_euler(const Problem& prob, const ForwardEulerOptions& opts = {});

struct SubgradientOptions {
    double alpha0 = 0.1;
    /// alpha_k = alpha0 / (k+1)^decay; decay in (1/2, 1] keeps sum alpha_k^2
    /// finite and sum alpha_k infinite.
    double decay = 1.0;
    std::size_t max_steps = 1000000;
    std::size_t checkpoint_every = 1;
};

/// p = 1: u^k = u^{k-1} + tau_k (-eta^{k-1} + f), tau_k = alpha_k / max(||eta^{k-1} - f||_{h,2}, 1).
/// Throws HorizonUnreachable when max_steps is reached before T.
Trajectory subgradient_p1(const Problem& prob, const SubgradientOptions& opts = {});

struct BackwardEulerOptions {
    /// <= 0: default resolvent tolerance for each step's right-hand side.
    double solve_tol = -1.0;
    std::size_t max_iters = 500;
    std::size_t checkpoint_every = 1;
};

/// Equispaced partition of [0, T] into N steps (t_N = T exactly).
std::vector<double> uniform_partition(double T, std::size_t N);

/// u^k = J_{tau_k Delta_p}(u^{k-1} + tau_k f^k) with f^k the step average of P_n f.
Trajectory backward_euler(const Problem& prob, const std::vector<double>& partition,
                          const BackwardEulerOptions& opts = {});

/// Linear-in-time extension at (x, t).
double extend_linear(const Trajectory& traj, double x, double t);
/// Piecewise-constant extension: u^{k-1} on (t_{k-1}, t_k] for the explicit
/// schemes, u^k for backward Euler; u^0 at t = 0.
double extend_const(const Trajectory& traj, double x, double t);

/// Whole-state versions of the two extensions.
GridFunction linear_state(const Trajectory& traj, double t);
GridFunction const_state(const Trajectory& traj, double t);

/// One row per kept state: "t,u_1,...,u_n", after a header "t,u1,...,un".
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Scheme tag, step sizes and solver metadata.
std::string trajectory_json(const Trajectory& traj);

}  // namespace nlplap
