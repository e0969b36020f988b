#include "nlplap/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"

namespace nlplap {

GridFunction linear_oracle_p2(const DiscreteKernel& k, const GridFunction& g, const SourceTerm& f, double t) {
    if (!f.is_time_independent()) throw TimeDependentSource("the linear oracle needs a time-independent source");
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("oracle time must be >= 0");
    if (!same_mesh(k.mesh_ptr(), g.mesh_ptr())) throw MeshMismatch("kernel and data live on different meshes");
    if (t == 0.0) return g;
    const std::size_t n = k.size();
    const auto h = k.mesh().cell_sizes();
    const GridFunction fv = f.at(g.mesh_ptr(), 0.0);

    Eigen::VectorXd sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = std::sqrt(h[i]);
    Eigen::MatrixXd S(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            diag += h[j] * k(i, j);
            S(i, j) = -sq[i] * sq[j] * k(i, j);
        }
        S(i, i) = diag;
    }
    const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw EigenFailure("eigendecomposition of the p = 2 operator failed");
    const auto& Q = es.eigenvectors();
    const auto& lam = es.eigenvalues();

    Eigen::VectorXd v0(n), src(n);
    for (std::size_t i = 0; i < n; ++i) {
        v0[i] = sq[i] * g[i];
        src[i] = sq[i] * fv[i];
    }
    const Eigen::VectorXd c = Q.transpose() * v0;
    const Eigen::VectorXd d = Q.transpose() * src;
    Eigen::VectorXd coef(n);
    for (Eigen::Index m = 0; m < static_cast<Eigen::Index>(n); ++m) {
        const double l = lam[m];
        const double phi = l != 0.0 ? -std::expm1(-l * t) / l : t;  // int_0^t e^(-l s) ds
        coef[m] = std::exp(-l * t) * c[m] + phi * d[m];
    }
    const Eigen::VectorXd v = Q * coef;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = v[static_cast<Eigen::Index>(i)] / sq[i];
    return GridFunction(g.mesh_ptr(), std::move(u));
}

double two_node_closed_form(double p, double K, double w0, double t) {
    if (!(p > 1.0)) throw InvalidP("two-node closed form needs p > 1");
    if (!(K > 0.0)) throw InvalidArgument("two-node closed form needs K > 0");
    if (!(t >= 0.0)) throw InvalidArgument("time must be >= 0");
    if (w0 == 0.0) return 0.0;
    const double a = std::abs(w0);
    double w;
    if (p == 2.0) {
        w = a * std::exp(-K * t);
    } else {
        const double base = std::pow(a, 2.0 - p) - (2.0 - p) * K * t;
        w = base > 0.0 ? std::pow(base, 1.0 / (2.0 - p)) : 0.0;
    }
    return std::copysign(w, w0);
}

namespace {

void require_nested(const Mesh& m, std::size_t n_common) {
    const double N = static_cast<double>(n_common);
    for (double x : m.boundaries()) {
        const double s = x * N;
        if (std::abs(s - std::round(s)) > 1e-9 * N) throw NonNestedMeshes("mesh is not refined by the common uniform mesh");
    }
}

double l2_distance(const GridFunction& a, const GridFunction& b, const MeshPtr& common) {
    const GridFunction ta = same_mesh(a.mesh_ptr(), common) ? a : transfer(a, common);
    const GridFunction tb = same_mesh(b.mesh_ptr(), common) ? b : transfer(b, common);
    const auto h = common->cell_sizes();
    std::vector<double> sq(ta.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = h[i] * (ta[i] - tb[i]) * (ta[i] - tb[i]);
    return std::sqrt(ordered_sum(sq));
}

std::vector<double> time_grid(const std::vector<double>& a, const std::vector<double>& b, double T, std::size_t samples) {
    std::vector<double> t(a);
    t.insert(t.end(), b.begin(), b.end());
    for (std::size_t s = 1; s <= samples; ++s) t.push_back(T * static_cast<double>(s) / static_cast<double>(samples + 1));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    while (!t.empty() && t.back() > T) t.pop_back();
    return t;
}

// Shared sweep: `state_b(t, left_end)` yields the comparison state on (s_{m-1}, s_m].
template <class StateB>
double sweep(const Trajectory& a, const std::vector<double>& grid, std::size_t n_common, ErrorExtension ext,
             StateB&& state_b) {
    const MeshPtr common = uniform_mesh(n_common);
    double worst = l2_distance(a.state(0), state_b(0.0, 0.0), common);
    for (std::size_t m = 1; m < grid.size(); ++m) {
        const double t = grid[m];
        if (t <= 0.0) continue;
        if (ext == ErrorExtension::Linear) {
            worst = std::max(worst, l2_distance(linear_state(a, t), state_b(t, t), common));
        } else {
            const GridFunction ua = const_state(a, t);
            worst = std::max(worst, l2_distance(ua, state_b(t, t), common));
            if (grid[m - 1] < t) worst = std::max(worst, l2_distance(ua, state_b(grid[m - 1], t), common));
        }
    }
    return worst;
}

}  // namespace

double traj_error_c0l2(const Trajectory& a, const Trajectory& b, std::size_t n_common, std::size_t time_samples,
                       ErrorExtension ext) {
    require_nested(*a.mesh_ptr(), n_common);
    require_nested(*b.mesh_ptr(), n_common);
    const double T = a.final_time();
    if (std::abs(b.final_time() - T) > 1e-12 * std::max(1.0, T)) throw InvalidArgument("trajectories end at different times");
    const auto grid = time_grid(a.times(), b.times(), T, time_samples);
    // both extensions of b are piecewise in time, so (s_{m-1}, s_m] is described by its right end
    return sweep(a, grid, n_common, ext, [&](double, double right) -> GridFunction {
        if (right == 0.0) return b.state(0);
        return ext == ErrorExtension::Linear ? linear_state(b, std::min(right, b.final_time()))
                                             : const_state(b, std::min(right, b.final_time()));
    });
}

double traj_error_c0l2(const Trajectory& a, const TimeOracle& b, std::size_t n_common, std::size_t time_samples,
                       ErrorExtension ext) {
    require_nested(*a.mesh_ptr(), n_common);
    const double T = a.final_time();
    const auto grid = time_grid(a.times(), {}, T, time_samples);
    // the oracle is continuous: compare at both ends of each constant piece
    return sweep(a, grid, n_common, ext, [&](double at, double) {
        GridFunction v = b(at);
        require_nested(v.mesh(), n_common);
        return v;
    });
}

RateStudyResult fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw InvalidArgument("a rate fit needs at least 3 points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, e] : points) {
        if (!(x > 0.0) || !(e > 0.0)) throw InvalidArgument("rate fit points must be positive");
        mx += std::log(x);
        my += std::log(e);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, e] : points) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(e) - my);
    }
    if (sxx == 0.0) throw DegenerateFit("all rate-fit parameters are equal");
    RateStudyResult r;
    r.fitted = true;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    for (const auto& [x, e] : points) {
        r.parameters.push_back(x);
        r.errors.push_back(e);
        r.max_residual = std::max(r.max_residual, std::abs(std::log(e) - (r.intercept + r.slope * std::log(x))));
    }
    r.max_errors = r.errors;
    return r;
}

Trajectory run_scheme(const Problem& prob, const SchemeSettings& s) {
    switch (s.scheme) {
        case Scheme::ForwardEuler:
            return forward_euler(prob, ForwardEulerOptions{s.tau, s.safety, s.residual_floor, 1});
        case Scheme::SubgradientP1:
            return subgradient_p1(prob, SubgradientOptions{s.alpha0, s.decay, s.max_steps, 1});
        case Scheme::BackwardEuler: {
            if (!(s.tau > 0.0)) throw InvalidArgument("backward Euler step must be positive");
            const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(prob.T() / s.tau)));
            return backward_euler(prob, uniform_partition(prob.T(), steps), BackwardEulerOptions{s.solve_tol, s.max_iters, 1});
        }
    }
    throw InvalidArgument("unknown scheme");
}

Problem discretize(const StudyProblem& sp, std::size_t n) {
    const MeshPtr mesh = uniform_mesh(n);
    auto k = std::make_shared<const DiscreteKernel>(project_kernel(sp.kernel, mesh));
    GridFunction g = project_function(sp.g, mesh);
    SourceTerm f = sp.f ? sp.f(mesh) : SourceTerm::zero();
    return Problem::kernelized(std::move(k), sp.p, std::move(g), std::move(f), sp.T);
}

namespace {

// Runs jobs concurrently (nested loops inside each job then stay serial).
std::vector<Trajectory> run_all(std::size_t count, const std::function<Trajectory(std::size_t)>& job) {
    std::vector<std::optional<Trajectory>> out(count);
    parallel_for(
        count,
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) out[i] = job(i);
        },
        1);
    std::vector<Trajectory> res;
    res.reserve(count);
    for (auto& t : out) res.push_back(std::move(*t));
    return res;
}

void finish_fit(RateStudyResult& r) {
    bool positive = r.parameters.size() >= 3;
    for (double e : r.errors) positive = positive && e > 0.0;
    if (!positive) return;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < r.parameters.size(); ++i) pts.emplace_back(r.parameters[i], r.errors[i]);
    const auto fit = fit_rate(pts);
    r.fitted = true;
    r.slope = fit.slope;
    r.intercept = fit.intercept;
    r.max_residual = fit.max_residual;
}

}  // namespace

RateStudyResult study_space(const StudyProblem& sp, const std::vector<std::size_t>& n_list, std::size_t n_ref,
                            const SchemeSettings& s, bool check_time_error) {
    if (n_list.empty()) throw InvalidArgument("space study needs mesh sizes");
    for (std::size_t n : n_list)
        if (n == 0 || n_ref % n != 0) throw NonNestedMeshes("every n must divide n_ref");
    std::vector<std::size_t> sizes(n_list);
    sizes.push_back(n_ref);
    auto trajs = run_all(sizes.size(), [&](std::size_t i) { return run_scheme(discretize(sp, sizes[i]), s); });

    RateStudyResult r;
    r.parameter_name = "delta_n";
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        r.sizes.push_back(n_list[i]);
        r.parameters.push_back(1.0 / static_cast<double>(n_list[i]));
        r.errors.push_back(traj_error_c0l2(trajs[i], trajs.back(), n_ref, 64, sp.extension));
    }
    r.max_errors = r.errors;
    finish_fit(r);

    if (check_time_error) {
        const auto finest = static_cast<std::size_t>(std::max_element(n_list.begin(), n_list.end()) - n_list.begin());
        SchemeSettings half = s;
        half.tau *= 0.5;
        half.alpha0 *= 0.5;
        const std::vector<std::size_t> pair{n_list[finest], n_ref};
        auto again = run_all(2, [&](std::size_t i) { return run_scheme(discretize(sp, pair[i]), half); });
        const double e = traj_error_c0l2(again[0], again[1], n_ref, 64, sp.extension);
        r.time_error_check = std::abs(e - r.errors[finest]) <= 0.1 * r.errors[finest];
    }
    return r;
}

RateStudyResult study_time(const StudyProblem& sp, std::size_t n, const std::vector<double>& tau_list,
                           const SchemeSettings& s, double ref_divisor) {
    if (tau_list.empty()) throw InvalidArgument("time study needs step sizes");
    if (!(ref_divisor > 1.0)) throw InvalidArgument("reference divisor must exceed 1");
    const Problem prob = discretize(sp, n);
    const bool by_alpha = s.scheme == Scheme::SubgradientP1;
    std::vector<double> values(tau_list);
    values.push_back(*std::min_element(tau_list.begin(), tau_list.end()) / ref_divisor);
    auto trajs = run_all(values.size(), [&](std::size_t i) {
        SchemeSettings si = s;
        (by_alpha ? si.alpha0 : si.tau) = values[i];
        return run_scheme(prob, si);
    });

    RateStudyResult r;
    r.parameter_name = by_alpha ? "alpha0" : "tau";
    for (std::size_t i = 0; i < tau_list.size(); ++i) {
        r.sizes.push_back(n);
        r.parameters.push_back(tau_list[i]);
        r.errors.push_back(traj_error_c0l2(trajs[i], trajs.back(), n, 64, sp.extension));
    }
    r.max_errors = r.errors;
    finish_fit(r);
    return r;
}

RateStudyResult study_graph(const StudyProblem& sp, const std::vector<std::size_t>& n_list, const SchemeSettings& s,
                            const GraphStudySettings& gs) {
    if (n_list.empty() || gs.seeds.empty()) throw InvalidArgument("graph study needs mesh sizes and seeds");
    RateStudyResult r;
    r.parameter_name = "rho_n*n";
    for (std::size_t n : n_list) {
        const MeshPtr mesh = uniform_mesh(n);
        const double rho = gs.rho(n);
        if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho_n must lie in (0, 1]");
        const DiscreteKernel kd = project_kernel(sp.kernel, mesh);
        const TruncatedWeights w = truncate(kd, rho);
        const GridFunction g = project_function(sp.g, mesh);
        const SourceTerm f = sp.f ? sp.f(mesh) : SourceTerm::zero();
        auto ref_kernel = std::make_shared<const DiscreteKernel>(gs.truncated_reference ? w.as_kernel() : kd);
        const Trajectory ref = run_scheme(Problem::kernelized(ref_kernel, sp.p, g, f, sp.T), s);

        std::vector<double> errs(gs.seeds.size());
        parallel_for(
            gs.seeds.size(),
            [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    auto graph = std::make_shared<const GraphSample>(sample(w, rho, gs.seeds[i]));
                    const Problem prob = Problem::graph(graph, sp.p, g, f, sp.T);
                    errs[i] = traj_error_c0l2(run_scheme(prob, s), ref, n, 64, sp.extension);
                }
            },
            1);
        r.sizes.push_back(n);
        r.parameters.push_back(rho * static_cast<double>(n));
        r.errors.push_back(ordered_sum(errs) / static_cast<double>(errs.size()));
        r.max_errors.push_back(*std::max_element(errs.begin(), errs.end()));
    }
    finish_fit(r);
    return r;
}

}  // namespace nlplap
