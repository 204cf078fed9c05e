#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pdkf/linalg.hpp"

namespace pdkf {

/// Linear system x_{k+1} = A_k x_k + w_k with E{w w^T} <= Q_k.
/// A single entry in A / Q means time-invariant; otherwise entry k is used at
/// step k and the last entry is held beyond the end of the sequence.
struct SystemModel {
    int n = 0;
    std::vector<Mat> A;
    std::vector<Mat> Q;
    Vec x0_mean;
    Mat x0_cov;  // covariance the truth x_0 is drawn from (before constraint projection)
    Mat P0;      // bound used by init_consistent
    double beta1 = 0.0;  // A A^T <= beta1 I
    double beta2 = 0.0;  // A A^T >= beta2 I
    Mat Q_lo;            // optional; empty means "not declared"
    Mat Q_hi;
    double varpi = 0.0;  // lower bound on D D^T of the global constraint

    [[nodiscard]] const Mat& A_at(int k) const;
    [[nodiscard]] const Mat& Q_at(int k) const;
    [[nodiscard]] bool time_invariant() const { return A.size() == 1 && Q.size() == 1; }

    /// Throws ValidationError on any violated invariant.
    void validate() const;
};

struct AgentSpec {
    Mat H;  // m x n, may be all zero
    Mat R;  // m x m, positive definite
    Mat D;  // s x n, zero or full row rank
    Vec d;
    double epsilon = 0.01;
    double delta = 0.0;
    // initial estimate; empty x0 means the model mean, empty P0 means init_consistent(theta)
    Vec x0;
    Mat P0;
    double theta = 1.0;

    [[nodiscard]] bool has_measurement() const { return H.size() > 0 && !linalg::is_zero(H); }
    [[nodiscard]] bool has_constraint() const { return D.size() > 0 && !linalg::is_zero(D); }
    [[nodiscard]] Mat information() const;             // H^T R^-1 H (zero when H == 0)
    [[nodiscard]] Mat constraint_information() const;  // D^T D / epsilon

    void validate(int n) const;
};

/// Directed graph carried by its weight matrix: a_ij > 0 means i receives from j.
struct Topology {
    int N = 0;
    Mat weights;
    std::vector<std::vector<int>> in_neighbors;  // j != i with a_ij > 0
    std::vector<int> out_degree;                 // |{i != j : a_ij > 0}|
    bool strongly_connected = false;

    static Topology from_weights(const Mat& w);

    void validate() const;
};

struct GlobalConstraint {
    Mat D;  // s x n
    Vec d;

    [[nodiscard]] int rows() const { return static_cast<int>(D.rows()); }
};

[[nodiscard]] bool is_strongly_connected(const Mat& weights);

/// Metropolis weights on an undirected graph given as 0-based edge pairs.
[[nodiscard]] Topology metropolis_weights(int N, const std::vector<std::pair<int, int>>& edges);

/// Stack the nonzero D_i, drop dependent rows, normalize so D D^T <= I.
/// Throws ValidationError for inconsistent constraints. `varpi` > 0 is checked
/// against lambda_min(D D^T).
[[nodiscard]] GlobalConstraint build_global_constraint(const std::vector<AgentSpec>& agents, int n,
                                                       double varpi = 0.0);

/// I - D^T (D D^T)^-1 D, or I for an empty constraint.
[[nodiscard]] Mat tangent_projector(const GlobalConstraint& gc, int n);

}  // namespace pdkf
