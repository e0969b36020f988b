#include "nlplap/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"
#include "nlplap/quadrature.hpp"

namespace nlplap {
namespace {

void require_mesh(const GridFunction& f, const MeshPtr& mesh) {
    if (!same_mesh(f.mesh_ptr(), mesh)) throw MeshMismatch("source term lives on a different mesh");
}

GridFunction scaled(const GridFunction& f, double s) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (auto& x : v) x *= s;
    return GridFunction(f.mesh_ptr(), std::move(v));
}

// 4-point Gauss average of a time-dependent grid function over [t0, t1].
template <class F>
GridFunction gauss_time_average(const MeshPtr& mesh, double t0, double t1, F&& at) {
    const auto& rule = gauss_legendre(4);
    std::vector<double> acc(mesh->size(), 0.0);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * rule.nodes[q];
        const GridFunction v = at(t);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += 0.5 * rule.weights[q] * v[i];
    }
    return GridFunction(mesh, std::move(acc));
}

double norm_h2_diff(std::span<const double> a, std::span<const double> b, std::span<const double> h) {
    std::vector<double> t(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) t[i] = h[i] * (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(ordered_sum(t));
}

// Takes the whole remaining interval when the proposed step would leave a sliver.
double clip_to_horizon(double tau, double t, double T) {
    const double remaining = T - t;
    return tau >= remaining * (1.0 - 1e-9) ? remaining : tau;
}

GridFunction operator_eta(const Problem& prob, const GridFunction& u) {
    return prob.is_graph() ? one_lap_eta(prob.graph_kernel(), u) : one_lap_eta(prob.kernel(), u);
}

}  // namespace

SourceTerm SourceTerm::time_constant(GridFunction f) { return SourceTerm(TimeConstantSource{std::move(f)}); }

SourceTerm SourceTerm::time_constant(const std::function<double(double)>& f, const MeshPtr& mesh) {
    return SourceTerm(TimeConstantSource{project_function(f, mesh)});
}

SourceTerm SourceTerm::separable(std::function<double(double)> a, std::function<double(double)> b,
                                 std::function<double(double, double)> b_integral) {
    if (!a || !b) throw InvalidArgument("separable source needs a(x) and b(t)");
    return SourceTerm(SeparableSource{std::move(a), std::move(b), std::move(b_integral)});
}

SourceTerm SourceTerm::tabulated(std::vector<double> times, std::vector<GridFunction> values) {
    if (times.empty() || times.size() != values.size()) throw InvalidArgument("tabulated source needs one snapshot per time");
    for (std::size_t m = 1; m < times.size(); ++m) {
        if (!(times[m] > times[m - 1])) throw InvalidArgument("tabulated source times must increase strictly");
        require_mesh(values[m], values[0].mesh_ptr());
    }
    return SourceTerm(TabulatedSource{std::move(times), std::move(values)});
}

GridFunction SourceTerm::at(const MeshPtr& mesh, double t) const {
    return std::visit(
        [&](const auto& s) -> GridFunction {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, ZeroSource>) {
                return GridFunction(mesh, 0.0);
            } else if constexpr (std::is_same_v<S, TimeConstantSource>) {
                require_mesh(s.f, mesh);
                return s.f;
            } else if constexpr (std::is_same_v<S, SeparableSource>) {
                return scaled(project_function(s.a, mesh), s.b(t));
            } else {
                require_mesh(s.values.front(), mesh);
                if (t <= s.times.front()) return s.values.front();
                if (t >= s.times.back()) return s.values.back();
                const auto m = static_cast<std::size_t>(std::upper_bound(s.times.begin(), s.times.end(), t) - s.times.begin());
                const double w = (t - s.times[m - 1]) / (s.times[m] - s.times[m - 1]);
                std::vector<double> v(mesh->size());
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - w) * s.values[m - 1][i] + w * s.values[m][i];
                return GridFunction(mesh, std::move(v));
            }
        },
        variant_);
}

GridFunction SourceTerm::step_average(const MeshPtr& mesh, double t0, double t1) const {
    if (!(t1 > t0)) throw InvalidArgument("step average needs t1 > t0");
    if (is_time_independent()) return at(mesh, t0);
    if (const auto* s = std::get_if<SeparableSource>(&variant_)) {
        if (s->b_integral) return scaled(project_function(s->a, mesh), s->b_integral(t0, t1) / (t1 - t0));
        const auto& rule = gauss_legendre(4);
        double avg = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q)
            avg += 0.5 * rule.weights[q] * s->b(0.5 * (t0 + t1) + 0.5 * (t1 - t0) * rule.nodes[q]);
        return scaled(project_function(s->a, mesh), avg);
    }
    return gauss_time_average(mesh, t0, t1, [&](double t) { return at(mesh, t); });
}

Problem Problem::kernelized(std::shared_ptr<const DiscreteKernel> k, double p, GridFunction g, SourceTerm f, double T) {
    if (!k) throw InvalidArgument("kernelized problem needs a kernel");
    if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidP("p must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("horizon T must be positive");
    if (!same_mesh(k->mesh_ptr(), g.mesh_ptr())) throw MeshMismatch("kernel and initial data live on different meshes");
    Problem prob(p, std::move(g), std::move(f), T);
    prob.kernel_ = std::move(k);
    return prob;
}

Problem Problem::graph(std::shared_ptr<const GraphSample> graph, double p, GridFunction g, SourceTerm f, double T) {
    if (!graph) throw InvalidArgument("graph problem needs a graph");
    if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidP("p must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("horizon T must be positive");
    auto sk = std::make_shared<const SparseKernel>(graph->operator_kernel());
    if (!same_mesh(sk->mesh_ptr(), g.mesh_ptr())) throw MeshMismatch("graph problems need data on the uniform mesh of size n");
    Problem prob(p, std::move(g), std::move(f), T);
    prob.graph_ = std::move(graph);
    prob.graph_kernel_ = std::move(sk);
    return prob;
}

const DiscreteKernel& Problem::kernel() const {
    if (!kernel_) throw InvalidArgument("problem is graph-driven");
    return *kernel_;
}

const GraphSample& Problem::graph_sample() const {
    if (!graph_) throw InvalidArgument("problem is kernel-driven");
    return *graph_;
}

const SparseKernel& Problem::graph_kernel() const {
    if (!graph_kernel_) throw InvalidArgument("problem is kernel-driven");
    return *graph_kernel_;
}

double Problem::k_inf1() const {
    return is_graph() ? matrix_norm_linf_q(*graph_kernel_, 1.0) : matrix_norm_linf_q(*kernel_, 1.0);
}

GridFunction apply_operator(const Problem& prob, const GridFunction& u) {
    return prob.is_graph() ? apply(prob.graph_kernel(), prob.p(), u) : apply(prob.kernel(), prob.p(), u);
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::ForwardEuler: return "forward_euler";
        case Scheme::SubgradientP1: return "subgradient_p1";
        case Scheme::BackwardEuler: return "backward_euler";
    }
    return "unknown";
}

Trajectory::Trajectory(Scheme scheme, MeshPtr mesh, std::size_t checkpoint_every)
    : scheme_(scheme), mesh_(std::move(mesh)), every_(checkpoint_every) {
    if (every_ == 0) throw InvalidArgument("checkpoint_every must be >= 1");
}

bool Trajectory::has_state(std::size_t k) const { return k < states_.size() && states_[k].has_value(); }

const GridFunction& Trajectory::state(std::size_t k) const {
    if (!has_state(k)) throw InvalidArgument("state " + std::to_string(k) + " was not kept");
    return *states_[k];
}

void Trajectory::push_initial(GridFunction g) {
    if (!states_.empty()) throw InvalidArgument("trajectory already started");
    if (!same_mesh(g.mesh_ptr(), mesh_)) throw MeshMismatch("state on a different mesh");
    times_.push_back(0.0);
    states_.emplace_back(std::move(g));
}

void Trajectory::push_step(double t, GridFunction u, const StepInfo& info) {
    if (states_.empty()) throw InvalidArgument("push_initial must come first");
    if (!(t > times_.back())) throw InvalidArgument("trajectory times must increase strictly");
    if (!same_mesh(u.mesh_ptr(), mesh_)) throw MeshMismatch("state on a different mesh");
    const std::size_t prev = states_.size() - 1;
    if (prev % every_ != 0) states_[prev].reset();
    times_.push_back(t);
    info_.push_back(info);
    states_.emplace_back(std::move(u));
}

Trajectory forward_euler(const Problem& prob, const ForwardEulerOptions& opts) {
    const double p = prob.p();
    if (!(p > 1.0 && p <= 2.0)) throw InvalidP("forward Euler needs p in (1, 2]");
    if (!prob.f().is_time_independent()) throw TimeDependentSource("forward Euler needs a time-independent source");
    if (!(opts.tau_max > 0.0) || !(opts.safety > 0.0 && opts.safety <= 1.0) || !(opts.residual_floor > 0.0))
        throw InvalidArgument("forward Euler needs tau_max > 0, safety in (0, 1], residual_floor > 0");
    const auto& mesh = prob.mesh_ptr();
    const auto h = mesh->cell_sizes();
    const GridFunction f = prob.f().at(mesh, 0.0);
    const double k1 = prob.k_inf1();
    // an empty operator never restricts the step
    const double C = k1 > 0.0 ? cfl_constant(p, k1) : kInfinity;
    const double expo = (2.0 - p) / (p - 1.0);
    const double T = prob.T();

    Trajectory traj(Scheme::ForwardEuler, mesh, opts.checkpoint_every);
    traj.push_initial(prob.g());
    GridFunction u = prob.g();
    double t = 0.0;
    while (t < T) {
        const GridFunction lu = apply_operator(prob, u);
        const double r = norm_h2_diff(lu.values(), f.values(), h);
        // Below the floor the state is treated as stationary and only tau_max applies.
        const bool restricted = expo == 0.0 || r > opts.residual_floor;
        double tau = restricted ? std::min(opts.tau_max, opts.safety * 2.0 * C * std::pow(r, expo)) : opts.tau_max;
        if (tau < 1e-14) throw StepUnderflow("forward Euler step fell below 1e-14 at t = " + format_double(t));
        tau = clip_to_horizon(tau, t, T);
        std::vector<double> next(u.size());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] = u[i] + tau * (f[i] - lu[i]);
        t = tau == T - t ? T : t + tau;
        u = GridFunction(mesh, std::move(next));
        traj.push_step(t, u, StepInfo{tau, 0.0, 0, 0.0});
    }
    return traj;
}

Trajectory subgradient_p1(const Problem& prob, const SubgradientOptions& opts) {
    if (prob.p() != 1.0) throw InvalidP("the subgradient scheme is for p = 1");
    if (!prob.f().is_time_independent()) throw TimeDependentSource("the subgradient scheme needs a time-independent source");
    if (!(opts.alpha0 > 0.0) || !(opts.decay > 0.0)) throw InvalidArgument("alpha0 and decay must be positive");
    const auto& mesh = prob.mesh_ptr();
    const auto h = mesh->cell_sizes();
    const GridFunction f = prob.f().at(mesh, 0.0);
    const double T = prob.T();

    Trajectory traj(Scheme::SubgradientP1, mesh, opts.checkpoint_every);
    traj.push_initial(prob.g());
    GridFunction u = prob.g();
    double t = 0.0;
    for (std::size_t k = 1; t < T; ++k) {
        if (k > opts.max_steps)
            throw HorizonUnreachable("step cap " + std::to_string(opts.max_steps) + " reached at t = " + format_double(t) +
                                         " < T = " + format_double(T),
                                     t);
        const GridFunction eta = operator_eta(prob, u);
        const double r = norm_h2_diff(eta.values(), f.values(), h);
        const double alpha = opts.alpha0 / std::pow(static_cast<double>(k + 1), opts.decay);
        const double tau = clip_to_horizon(alpha / std::max(r, 1.0), t, T);
        std::vector<double> next(u.size());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] = u[i] + tau * (f[i] - eta[i]);
        t = tau == T - t ? T : t + tau;
        u = GridFunction(mesh, std::move(next));
        traj.push_step(t, u, StepInfo{tau, alpha, 0, 0.0});
    }
    return traj;
}

std::vector<double> uniform_partition(double T, std::size_t N) {
    if (!(T > 0.0) || N == 0) throw InvalidArgument("uniform partition needs T > 0 and N >= 1");
    std::vector<double> t(N + 1);
    for (std::size_t k = 0; k <= N; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(N);
    t[N] = T;
    return t;
}

Trajectory backward_euler(const Problem& prob, const std::vector<double>& partition, const BackwardEulerOptions& opts) {
    if (!(prob.p() > 1.0)) throw InvalidP("backward Euler needs p > 1");
    const double T = prob.T();
    if (partition.size() < 2 || partition.front() != 0.0 || std::abs(partition.back() - T) > 1e-12 * std::max(1.0, T))
        throw InvalidArgument("time partition must run from 0 to T");
    for (std::size_t k = 1; k < partition.size(); ++k)
        if (!(partition[k] > partition[k - 1])) throw InvalidArgument("time partition must increase strictly");
    const auto& mesh = prob.mesh_ptr();
    const ResolventOptions ropts{opts.solve_tol, opts.max_iters};

    Trajectory traj(Scheme::BackwardEuler, mesh, opts.checkpoint_every);
    traj.push_initial(prob.g());
    GridFunction u = prob.g();
    for (std::size_t k = 1; k < partition.size(); ++k) {
        const double t0 = partition[k - 1];
        const double t1 = k + 1 == partition.size() ? T : partition[k];
        const double tau = t1 - t0;
        std::vector<double> b(u.values().begin(), u.values().end());
        if (!prob.f().is_zero()) {
            const GridFunction fk = prob.f().step_average(mesh, t0, t1);
            for (std::size_t i = 0; i < b.size(); ++i) b[i] += tau * fk[i];
        }
        const GridFunction rhs(mesh, std::move(b));
        try {
            auto res = prob.is_graph() ? resolvent(prob.graph_kernel(), prob.p(), tau, rhs, ropts)
                                       : resolvent(prob.kernel(), prob.p(), tau, rhs, ropts);
            u = std::move(res.u);
            traj.push_step(t1, u, StepInfo{tau, 0.0, res.iterations, res.residual});
        } catch (const NoConvergence& e) {
            throw NoConvergence("backward Euler step " + std::to_string(k) + ": " + e.what(), e.iterations(), e.residual(),
                                static_cast<long>(k));
        }
    }
    return traj;
}

namespace {

// Index k >= 1 with t in (t_{k-1}, t_k]; 0 for t = 0.
std::size_t locate(const Trajectory& traj, double t) {
    const auto& times = traj.times();
    const double T = times.back();
    if (!(t >= 0.0) || t > T * (1.0 + 1e-12) + 1e-300) throw InvalidArgument("extension time outside [0, T]");
    if (t == 0.0) return 0;
    if (t >= T) return times.size() - 1;
    return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
}

}  // namespace

double extend_linear(const Trajectory& traj, double x, double t) {
    const std::size_t k = locate(traj, t);
    if (k == 0) return inject_eval(traj.state(0), x);
    const double t0 = traj.times()[k - 1], t1 = traj.times()[k];
    const double tau = t1 - t0;
    return ((t1 - t) / tau) * inject_eval(traj.state(k - 1), x) + ((t - t0) / tau) * inject_eval(traj.state(k), x);
}

double extend_const(const Trajectory& traj, double x, double t) {
    const std::size_t k = locate(traj, t);
    if (k == 0) return inject_eval(traj.state(0), x);
    return inject_eval(traj.state(traj.scheme() == Scheme::BackwardEuler ? k : k - 1), x);
}

GridFunction linear_state(const Trajectory& traj, double t) {
    const std::size_t k = locate(traj, t);
    if (k == 0) return traj.state(0);
    const double t0 = traj.times()[k - 1], t1 = traj.times()[k];
    const double tau = t1 - t0;
    const double a = (t1 - t) / tau, b = (t - t0) / tau;
    const auto& u0 = traj.state(k - 1);
    const auto& u1 = traj.state(k);
    std::vector<double> v(u0.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * u0[i] + b * u1[i];
    return GridFunction(traj.mesh_ptr(), std::move(v));
}

GridFunction const_state(const Trajectory& traj, double t) {
    const std::size_t k = locate(traj, t);
    if (k == 0) return traj.state(0);
    return traj.state(traj.scheme() == Scheme::BackwardEuler ? k : k - 1);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const std::size_t n = traj.mesh_ptr()->size();
    out << 't';
    for (std::size_t i = 1; i <= n; ++i) out << ",u" << i;
    out << '\n';
    for (std::size_t k = 0; k < traj.times().size(); ++k) {
        if (!traj.has_state(k)) continue;
        out << format_double(traj.times()[k]);
        for (double v : traj.state(k).values()) out << ',' << format_double(v);
        out << '\n';
    }
}

std::string trajectory_json(const Trajectory& traj) {
    nlohmann::ordered_json j;
    j["scheme"] = scheme_name(traj.scheme());
    j["n"] = traj.mesh_ptr()->size();
    j["steps"] = traj.steps();
    j["final_time"] = traj.final_time();
    j["checkpoint_every"] = traj.checkpoint_every();
    std::vector<double> tau, alpha, residual;
    std::vector<std::size_t> iterations;
    for (const auto& s : traj.step_info()) {
        tau.push_back(s.tau);
        alpha.push_back(s.alpha);
        iterations.push_back(s.iterations);
        residual.push_back(s.residual);
    }
    j["tau"] = tau;
    if (traj.scheme() == Scheme::SubgradientP1) j["alpha"] = alpha;
    if (traj.scheme() == Scheme::BackwardEuler) {
        j["solver_iterations"] = iterations;
        j["solver_residual"] = residual;
    }
    return j.dump(2);
}

}  // namespace nlplap
