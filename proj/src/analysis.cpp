#include "pdkf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdkf/event.hpp"

namespace pdkf {

namespace {

constexpr double kBetaFloor = 1e-6;

double clamp_beta(double b) { return std::clamp(b, kBetaFloor, 1.0 - kBetaFloor); }

// eigenvalues of X (X+Q)^-1 via the similar symmetric matrix
Vec beta_spectrum(const Mat& P, const Mat& A, const Mat& Q) {
    if (!linalg::is_positive_definite(P)) {
        throw ValidationError("compute_beta: P must be positive definite");
    }
    if (linalg::lambda_min(Q) < -1e-12 * std::max(1.0, Q.norm())) {
        throw ValidationError("compute_beta: Q must be positive semidefinite");
    }
    const Mat X = linalg::symmetrize(A * P * A.transpose());
    const Mat W = linalg::spd_inverse_sqrt(X + Q);
    return linalg::symmetric_eigenvalues(W * X * W);
}

std::vector<Mat> zero_batch_measurements(const std::vector<AgentSpec>& agents) {
    std::vector<Mat> y;
    for (const auto& a : agents) {
        y.emplace_back(a.H.rows(), 0);
    }
    return y;
}

std::vector<EstimateBatch> zero_batch_states(const SystemModel& model, const std::vector<AgentSpec>& agents) {
    std::vector<EstimateBatch> out;
    for (const auto& e : initial_estimates(model, agents)) {
        out.push_back({Mat(model.n, 0), e.P});
    }
    return out;
}

}  // namespace

EcoReport eco_check(const SystemModel& model, const std::vector<AgentSpec>& agents, int window, int k0) {
    if (window < 0) {
        throw ValidationError("eco_check: window must be nonnegative");
    }
    const int n = model.n;
    Mat S = Mat::Zero(n, n);
    Mat C = Mat::Zero(n, n);
    for (const auto& a : agents) {
        S += a.information();
        if (a.has_constraint()) {
            C += a.D.transpose() * a.D;
        }
    }
    EcoReport r;
    r.window = window;
    r.gramian = Mat::Zero(n, n);
    r.gramian_unconstrained = Mat::Zero(n, n);
    Mat Phi = Mat::Identity(n, n);
    for (int j = k0; j <= k0 + window; ++j) {
        r.gramian += Phi.transpose() * (S + C) * Phi;
        r.gramian_unconstrained += Phi.transpose() * S * Phi;
        Phi = model.A_at(j) * Phi;
    }
    r.gramian = linalg::symmetrize(r.gramian);
    r.gramian_unconstrained = linalg::symmetrize(r.gramian_unconstrained);
    r.alpha = linalg::lambda_min(r.gramian);
    r.alpha_unconstrained = linalg::lambda_min(r.gramian_unconstrained);
    const auto observable = [](const Mat& g, double alpha) {
        return alpha > kEcoTolerance * std::max(1.0, linalg::lambda_max(g));
    };
    r.observable_with_constraints = observable(r.gramian, r.alpha);
    r.observable_without_constraints = observable(r.gramian_unconstrained, r.alpha_unconstrained);
    return r;
}

double compute_beta(const Mat& P, const Mat& A, const Mat& Q) { return clamp_beta(beta_spectrum(P, A, Q).minCoeff()); }

double compute_beta_bar(const Mat& P, const Mat& A, const Mat& Q) {
    return clamp_beta(beta_spectrum(P, A, Q).maxCoeff());
}

BetaPair pilot_betas_event(const SystemModel& model, const std::vector<AgentSpec>& agents, const Topology& topo,
                           const std::vector<double>& delta, int T) {
    if (delta.size() != agents.size()) {
        throw ValidationError("pilot_betas_event: one threshold per agent required");
    }
    const Mat& A = model.A.front();
    const Mat& Q = model.Q.front();
    auto states = zero_batch_states(model, agents);
    std::vector<BasicTriggerState<Mat>> trig;
    for (std::size_t i = 0; i < states.size(); ++i) {
        trig.push_back(BasicTriggerState<Mat>::initial(states[i], delta[i]));
    }
    const auto y = zero_batch_measurements(agents);
    BetaPair b{1.0, 0.0};
    const auto absorb = [&](const Mat& P) {
        const Vec s = beta_spectrum(P, A, Q);
        b.beta = std::min(b.beta, s.minCoeff());
        b.beta_bar = std::max(b.beta_bar, s.maxCoeff());
    };
    for (int k = 1; k <= T; ++k) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            absorb(states[i].P);
            absorb(trig[i].pred_P);  // the held matrix the next prediction step is applied to
        }
        states = epdkf_round(states, trig, y, model, agents, topo, k).states;
    }
    return {clamp_beta(b.beta), clamp_beta(b.beta_bar)};
}

BetaPair pilot_betas_time(const SystemModel& model, const std::vector<AgentSpec>& agents, const Topology& topo, int L,
                          int T) {
    auto states = zero_batch_states(model, agents);
    const auto y = zero_batch_measurements(agents);
    BetaPair b{1.0, 0.0};
    for (int k = 1; k <= T; ++k) {
        for (const auto& s : states) {
            const Vec sp = beta_spectrum(s.P, model.A_at(k - 1), model.Q_at(k - 1));
            b.beta = std::min(b.beta, sp.minCoeff());
            b.beta_bar = std::max(b.beta_bar, sp.maxCoeff());
        }
        states = tpdkf_round(states, y, model, agents, topo, k, L);
    }
    return {clamp_beta(b.beta), clamp_beta(b.beta_bar)};
}

ThresholdReport threshold_bounds(const SystemModel& model, const std::vector<AgentSpec>& agents,
                                 const Topology& topo, double beta, int kstar) {
    const int N = topo.N;
    const int n = model.n;
    if (kstar < N + n) {
        std::ostringstream os;
        os << "threshold_bounds: k* = " << kstar << " is below N + n = " << N + n
           << "; the horizon must let information from every agent reach every other agent and span the state";
        throw ValidationError(os.str());
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ValidationError("threshold_bounds: beta must lie in (0, 1)");
    }
    if (!model.time_invariant()) {
        throw ValidationError("threshold_bounds: time-invariant model required");
    }
    const Mat Ainv = model.A.front().inverse();
    std::vector<Mat> S(N), C(N);
    for (int j = 0; j < N; ++j) {
        S[j] = agents[j].information();
        C[j] = agents[j].constraint_information();
    }

    ThresholdReport r;
    r.beta = beta;
    r.kstar = kstar;
    r.M.assign(N, std::vector<Mat>(N, Mat::Zero(n, n)));
    r.M_bar.assign(N, Mat::Zero(n, n));

    Mat Wprev = Mat::Identity(N, N);  // a_{ij,tau-1}
    Mat Wcur = topo.weights;          // a_{ij,tau}
    Mat Apow = Mat::Identity(n, n);   // A^{1-tau}
    double bpow = 1.0;                // beta^{tau-1}
    for (int tau = 1; tau <= kstar; ++tau) {
        const Mat G = Apow.transpose() * Apow;
        for (int i = 0; i < N; ++i) {
            Mat inner = Mat::Zero(n, n);
            for (int j = 0; j < N; ++j) {
                r.M[i][j] += bpow * Wcur(i, j) * G;
                inner += Wcur(i, j) * S[j] + Wprev(i, j) * C[j];
            }
            r.M_bar[i] += bpow * Apow.transpose() * inner * Apow;
        }
        Wprev = Wcur;
        Wcur = Wcur * topo.weights;
        Apow = Apow * Ainv;
        bpow *= beta;
    }

    r.network_bound = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
        r.M_bar[i] = linalg::symmetrize(r.M_bar[i]);
        Mat Mi = Mat::Zero(n, n);
        for (int j = 0; j < N; ++j) {
            r.M[i][j] = linalg::symmetrize(r.M[i][j]);
            Mi += r.M[i][j];
        }
        const Mat W = linalg::spd_inverse_sqrt(Mi);
        const double bound = linalg::lambda_min(W * r.M_bar[i] * W);
        r.M_bar_positive.push_back(linalg::is_positive_definite(r.M_bar[i]) &&
                                   linalg::lambda_min(r.M_bar[i]) > 0.0);
        r.agent_bound.push_back(std::max(0.0, bound));
        r.network_bound = std::min(r.network_bound, r.agent_bound.back());
    }
    return r;
}

SpaceDecomposition space_decomposition(const GlobalConstraint& gc) {
    const Mat& D = gc.D;
    const auto n = D.cols();
    const auto s = D.rows();
    SpaceDecomposition out;
    out.s = static_cast<int>(s);
    if (s == 0) {
        out.F = Mat::Identity(n, n);
        out.D_tilde = Mat(0, 0);
        return out;
    }
    if (!linalg::has_full_row_rank(D)) {
        throw ValidationError("space_decomposition: D must have full row rank");
    }
    // null-space basis from the trailing right singular vectors
    Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeFullV);
    Mat null = svd.matrixV().rightCols(n - s);
    for (Eigen::Index c = 0; c < null.cols(); ++c) {
        Eigen::Index idx = 0;
        null.col(c).cwiseAbs().maxCoeff(&idx);
        if (null(idx, c) < 0.0) {
            null.col(c) *= -1.0;
        }
    }
    // row-space basis: Gram-Schmidt on D^T so the first direction follows the first row
    Eigen::HouseholderQR<Mat> qr(D.transpose());
    Mat row = qr.householderQ() * Mat::Identity(n, s);
    const Mat Rm = row.transpose() * D.transpose();
    for (Eigen::Index c = 0; c < s; ++c) {
        if (Rm(c, c) < 0.0) {
            row.col(c) *= -1.0;
        }
    }
    out.F.resize(n, n);
    out.F << null, row;
    out.D_tilde = D * row;
    return out;
}

Vec constraint_error(const Vec& xhat, const Vec& x, const Mat& F, int s) {
    const Vec e = F.partialPivLu().solve(xhat - x);
    return e.tail(s);
}

Mat constraint_error_batch(const Mat& errors, const Mat& F, int s) {
    const Mat e = F.partialPivLu().solve(errors);
    return e.bottomRows(s);
}

Mat eig_pos(const Mat& M) {
    if (linalg::asymmetry(M) > 1e-8 && M.norm() > 0.0) {
        throw ValidationError("eig_pos: input is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(M));
    const Vec w = es.eigenvalues().cwiseMax(0.0);
    return linalg::symmetrize(es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose());
}

RateModel RateModel::build(const SystemModel& model, const std::vector<AgentSpec>& agents, const Topology& topo,
                           double beta, double beta_bar) {
    if (!model.time_invariant()) {
        throw ValidationError("rate analysis needs a time-invariant model");
    }
    RateModel rm;
    rm.N = topo.N;
    rm.n = model.n;
    rm.A = model.A.front();
    rm.A_inv = rm.A.inverse();
    rm.Q = model.Q.front();
    rm.weights = topo.weights;
    rm.out_degree = topo.out_degree;
    rm.beta = beta;
    rm.beta_bar = beta_bar;
    for (const auto& a : agents) {
        rm.S.push_back(a.information());
        rm.C.push_back(a.constraint_information());
    }
    return rm;
}

namespace {

std::vector<std::vector<Mat>> f_sequence(const RateModel& rm, int T) {
    std::vector<std::vector<Mat>> F(T + 1, std::vector<Mat>(rm.N));
    const Mat Qinv = linalg::spd_inverse(rm.Q, "Q");
    for (int j = 0; j < rm.N; ++j) {
        F[0][j] = Qinv + rm.S[j];
    }
    for (int t = 1; t <= T; ++t) {
        for (int i = 0; i < rm.N; ++i) {
            Mat acc = rm.C[i];
            for (int j = 0; j < rm.N; ++j) {
                if (rm.weights(i, j) > 0.0) {
                    acc += rm.weights(i, j) * F[t - 1][j];
                }
            }
            F[t][i] = linalg::symmetrize(rm.beta_bar * rm.A_inv.transpose() * acc * rm.A_inv + rm.S[i]);
        }
    }
    return F;
}

// z_0 = 0; z_t = beta A^-T U_{t-1} A^-1 with U_0 = S and
// U_m(i) = S_i + beta A^-T (sum_j a_ij (U_{m-1}(j) - delta I) + C_i) A^-1
std::vector<std::vector<Mat>> z_sequence(const RateModel& rm, int T, double delta) {
    const Mat I = Mat::Identity(rm.n, rm.n);
    std::vector<std::vector<Mat>> Z(T + 1, std::vector<Mat>(rm.N, Mat::Zero(rm.n, rm.n)));
    std::vector<Mat> U = rm.S;
    for (int t = 1; t <= T; ++t) {
        for (int i = 0; i < rm.N; ++i) {
            Z[t][i] = linalg::symmetrize(rm.beta * rm.A_inv.transpose() * U[i] * rm.A_inv);
        }
        std::vector<Mat> next(rm.N);
        for (int i = 0; i < rm.N; ++i) {
            Mat acc = rm.C[i];
            for (int j = 0; j < rm.N; ++j) {
                if (rm.weights(i, j) > 0.0) {
                    acc += rm.weights(i, j) * (U[j] - delta * I);
                }
            }
            next[i] = linalg::symmetrize(rm.S[i] + rm.beta * rm.A_inv.transpose() * acc * rm.A_inv);
        }
        U = std::move(next);
    }
    return Z;
}

}  // namespace

Mat f_upper(const RateModel& rm, int t, int i) { return f_sequence(rm, t)[t][i]; }

Mat z_lower(const RateModel& rm, int t, int i, double delta) { return z_sequence(rm, t, delta)[t][i]; }

Mat z_bar(const RateModel& rm, int t, int i) { return z_lower(rm, t, i, 0.0); }

Mat z_delta_weight(const RateModel& rm, int t) {
    Mat acc = Mat::Zero(rm.n, rm.n);
    Mat Ap = rm.A_inv;  // A^-tau
    double bp = rm.beta;
    for (int tau = 1; tau <= t; ++tau) {
        if (tau >= 2) {
            acc += bp * Ap.transpose() * Ap;
        }
        Ap = Ap * rm.A_inv;
        bp *= rm.beta;
    }
    return linalg::symmetrize(acc);
}

Mat l_term(const RateModel& rm, int t, int i) {
    const Mat Ap = linalg::matrix_power(rm.A_inv, t + 1);
    return linalg::symmetrize(std::pow(rm.beta, t + 1) * Ap.transpose() * rm.S[i] * Ap);
}

RateTables::RateTables(const RateModel& rm, int T) : rm_(rm), T_(T) {
    if (T < 0) {
        throw ValidationError("rate tables need a nonnegative horizon");
    }
    f_ = f_sequence(rm, T);
    zbar_ = z_sequence(rm, T, 0.0);
    dw_.resize(T + 1);
    l_.assign(T + 1, std::vector<Mat>(rm.N));
    Mat acc = Mat::Zero(rm.n, rm.n);
    Mat Ap = rm.A_inv;  // A^-(t+1)
    double bp = rm.beta;  // beta^(t+1)
    for (int t = 0; t <= T; ++t) {
        if (t >= 2) {
            const Mat At = linalg::matrix_power(rm.A_inv, t);
            acc += std::pow(rm.beta, t) * At.transpose() * At;
        }
        dw_[t] = linalg::symmetrize(acc);
        for (int i = 0; i < rm.N; ++i) {
            l_[t][i] = linalg::symmetrize(bp * Ap.transpose() * rm.S[i] * Ap);
        }
        Ap = Ap * rm.A_inv;
        bp *= rm.beta;
    }
}

double RateTables::f_bar(int t, int i, double delta) const {
    const Mat I = Mat::Identity(rm_.n, rm_.n);
    return linalg::lambda_max(f_[t][i] - eig_pos(z(t, i, delta) + delta * I));
}

double RateTables::f_bar_alt(int t, int i, double delta) const {
    return linalg::lambda_max(f_[t][i] - eig_pos(z(t, i, delta))) - delta;
}

double RateTables::g_bar(int t, int i, double delta) const {
    return linalg::lambda_max(f_[t][i] - l_[t][i]) - delta;
}

std::optional<int> solve_T1(const RateTables& tab, int i, double delta) {
    for (int t = 0; t <= tab.horizon(); ++t) {
        if (tab.f_bar(t, i, delta) <= 0.0) {
            return t;
        }
    }
    return std::nullopt;
}

std::optional<int> solve_T2(const RateTables& tab, int i, double delta) {
    for (int t = 0; t <= tab.horizon(); ++t) {
        if (tab.g_bar(t, i, delta) > 0.0) {
            if (t == 0) {
                return std::nullopt;
            }
            return t;
        }
    }
    return tab.horizon();
}

namespace {

double silent_steps(int t1, int t2, int T) {
    if (t1 == 0) {
        // cannot fire even once in succession: silent for the whole horizon
        return T;
    }
    return static_cast<double>(t2) * std::floor(static_cast<double>(T) / (t1 + t2));
}

}  // namespace

double lambda0_from_runs(const std::vector<std::optional<int>>& T1, const std::vector<std::optional<int>>& T2,
                         const std::vector<int>& out_degree, int T) {
    if (T1.size() != T2.size() || T1.size() != out_degree.size() || T < 1) {
        throw ValidationError("lambda0_from_runs: inconsistent inputs");
    }
    double total = 0.0;
    double silent = 0.0;
    for (std::size_t i = 0; i < T1.size(); ++i) {
        total += out_degree[i];
        if (T1[i] && T2[i]) {
            silent += out_degree[i] * silent_steps(*T1[i], *T2[i], T);
        }
    }
    if (total == 0.0) {
        return 1.0;
    }
    return 1.0 - silent / (static_cast<double>(T) * total);
}

RateReport rate_bound(const RateTables& tab, double delta) {
    const RateModel& rm = tab.model();
    const int T = tab.horizon();
    if (T < 1) {
        throw ValidationError("rate_bound: horizon must be at least 1");
    }
    RateReport r;
    r.delta = delta;
    r.T = T;
    r.beta = rm.beta;
    r.beta_bar = rm.beta_bar;
    const Mat I = Mat::Identity(rm.n, rm.n);
    double total_out = 0.0;
    double silent_weighted = 0.0;
    double asym_weighted = 0.0;
    for (int i = 0; i < rm.N; ++i) {
        AgentRate a;
        a.T1 = solve_T1(tab, i, delta);
        a.T2 = solve_T2(tab, i, delta);
        for (int t = 0; t <= T; ++t) {
            if ((tab.f_bar(t, i, delta) > 0.0) != (tab.f_bar_alt(t, i, delta) > 0.0)) {
                a.first_alt_disagreement = t;
                break;
            }
        }
        if (a.T1) {
            a.side_condition = linalg::lambda_max(tab.delta_weight(*a.T1) - I) <= 1e-12;
        }
        a.feasible = a.T1.has_value() && a.T2.has_value() && a.side_condition;
        const double out = rm.out_degree[i];
        total_out += out;
        if (a.feasible) {
            const int t1 = *a.T1;
            const int t2 = *a.T2;
            a.silent_steps = silent_steps(t1, t2, T);
            asym_weighted += t1 == 0 ? out : out * static_cast<double>(t2) / (t1 + t2);
            silent_weighted += out * a.silent_steps;
        }
        r.agents.push_back(a);
    }
    r.available = std::any_of(r.agents.begin(), r.agents.end(), [](const AgentRate& a) { return a.feasible; });
    if (total_out == 0.0) {
        r.available = false;
        r.status = "no directed links; communication rate undefined";
        return r;
    }
    if (!r.available) {
        r.status = "no bound available: no agent satisfies both scan conditions";
        return r;
    }
    r.lambda0 = 1.0 - silent_weighted / (static_cast<double>(T) * total_out);
    r.lambda_asymptotic = 1.0 - asym_weighted / total_out;
    r.status = "ok";
    return r;
}

RateSweep rate_sweep(const SystemModel& model, const std::vector<AgentSpec>& agents, const Topology& topo,
                     std::vector<double> deltas, int T, std::optional<BetaPair> betas) {
    if (deltas.empty()) {
        throw ValidationError("rate_sweep: empty threshold grid");
    }
    std::sort(deltas.begin(), deltas.end());
    RateSweep sw;
    if (betas) {
        sw.betas = *betas;
    } else {
        sw.betas = {1.0, 0.0};
        for (double d : deltas) {
            const auto b = pilot_betas_event(model, agents, topo, std::vector<double>(agents.size(), d), T);
            sw.betas.beta = std::min(sw.betas.beta, b.beta);
            sw.betas.beta_bar = std::max(sw.betas.beta_bar, b.beta_bar);
        }
    }
    const RateTables tab(RateModel::build(model, agents, topo, sw.betas.beta, sw.betas.beta_bar), T);
    for (double d : deltas) {
        sw.reports.push_back(rate_bound(tab, d));
    }
    for (std::size_t k = 1; k < sw.reports.size(); ++k) {
        if (sw.reports[k].lambda0 > sw.reports[k - 1].lambda0 + 1e-12) {
            sw.monotone = false;
        }
    }
    return sw;
}

}  // namespace pdkf
