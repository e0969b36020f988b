#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlplap/evolve.hpp"
#include "nlplap/kernel.hpp"

namespace nlplap {

/// Exact solution of u' = -L u + f at time t for the p = 2 operator
/// (L u)_i = sum_j h_j K_ij (u_i - u_j), f zero or time-constant. Uses the
/// eigendecomposition of the symmetrized operator H^(1/2) L H^(-1/2).
GridFunction linear_oracle_p2(const DiscreteKernel& k, const GridFunction& g, const SourceTerm& f, double t);

/// w(t) solving w' = -K Psi(w), w(0) = w0: finite extinction for p < 2,
/// w0 e^(-Kt) for p = 2, algebraic decay for p > 2.
double two_node_closed_form(double p, double K, double w0, double t);

enum class ErrorExtension { Constant, Linear };

/// Reference solution evaluated at time t (on any mesh nested in the common one).
using TimeOracle = std::function<GridFunction(double)>;

/// sup_t ||a(., t) - b(., t)||_{L^2} over the union of both time partitions plus
/// `time_samples` equispaced extra times, after transferring both to the
/// uniform mesh of size n_common. The constant extension is the scheme's own
/// (u^{k-1} explicit, u^k implicit). Throws NonNestedMeshes unless both meshes
/// are refined by the common mesh.
double traj_error_c0l2(const Trajectory& a, const Trajectory& b, std::size_t n_common, std::size_t time_samples = 64,
                       ErrorExtension ext = ErrorExtension::Constant);
double traj_error_c0l2(const Trajectory& a, const TimeOracle& b, std::size_t n_common, std::size_t time_samples = 64,
                       ErrorExtension ext = ErrorExtension::Constant);

struct RateStudyResult {
    /// "delta_n", "tau" or "rho_n*n".
    std::string parameter_name;
    std::vector<double> parameters;
    /// Mean error per parameter (over seeds for graph studies).
    std::vector<double> errors;
    /// Max error per parameter (equal to `errors` without seeds).
    std::vector<double> max_errors;
    /// Mesh size of each row.
    std::vector<std::size_t> sizes;
    /// False when fewer than three positive errors are available.
    bool fitted = false;
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
    /// Space studies: true when halving the step changed the finest-mesh error by <= 10%.
    std::optional<bool> time_error_check;
};

/// Ordinary least squares on (log x, log e). Needs >= 3 positive points;
/// throws DegenerateFit when all x are equal.
RateStudyResult fit_rate(const std::vector<std::pair<double, double>>& points);

/// How one discretization is advanced in time.
struct SchemeSettings {
    Scheme scheme = Scheme::BackwardEuler;
    /// Backward Euler: uniform step. Forward Euler: tau_max.
    double tau = 1e-3;
    double safety = 0.9;
    double residual_floor = 1e-8;
    double alpha0 = 0.1;
    double decay = 1.0;
    std::size_t max_steps = 1000000;
    double solve_tol = -1.0;
    std::size_t max_iters = 500;
};

Trajectory run_scheme(const Problem& prob, const SchemeSettings& s);

/// Continuum data of a study; discretized on each mesh by projection.
struct StudyProblem {
    KernelSpec kernel;
    std::function<double(double)> g;
    /// Empty: zero source.
    std::function<SourceTerm(const MeshPtr&)> f;
    double p = 2.0;
    double T = 1.0;
    ErrorExtension extension = ErrorExtension::Constant;
};

/// Kernelized problem on the uniform mesh of size n.
Problem discretize(const StudyProblem& sp, std::size_t n);

/// Errors of the scheme on each n in n_list against the same scheme on n_ref
/// (each n must divide n_ref), fitted against delta_n = 1/n.
RateStudyResult study_space(const StudyProblem& sp, const std::vector<std::size_t>& n_list, std::size_t n_ref,
                            const SchemeSettings& s, bool check_time_error = false);

/// Errors for each step size in tau_list at fixed n against the same scheme
/// with step min(tau_list) / ref_divisor, fitted against tau. For the
/// subgradient scheme the listed values are alpha0.
RateStudyResult study_time(const StudyProblem& sp, std::size_t n, const std::vector<double>& tau_list,
                           const SchemeSettings& s, double ref_divisor = 16.0);

struct GraphStudySettings {
    /// rho_n as a function of n.
    std::function<double(std::size_t)> rho = [](std::size_t n) { return std::pow(static_cast<double>(n), -0.25); };
    std::vector<std::uint64_t> seeds;
    /// Compare against the truncated kernel min(K, 1/rho) (the sampling mean);
    /// false compares against the untruncated projection.
    bool truncated_reference = true;
};

/// Per n: backward Euler on sampled graphs (one per seed) against the kernelized
/// solution at the same n; mean and max error fitted against rho_n n.
RateStudyResult study_graph(const StudyProblem& sp, const std::vector<std::size_t>& n_list, const SchemeSettings& s,
                            const GraphStudySettings& gs);

}  // namespace nlplap
