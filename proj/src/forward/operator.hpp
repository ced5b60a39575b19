#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <memory>
#include <vector>

#include "pipl/forward.hpp"

namespace pipl::detail {

/// Rows of the spatial operator L u = -div(gamma grad u) - drift . grad u at interior nodes.
template <class S>
struct Stencil {
    std::vector<int> rows;   ///< interior node ids
    std::vector<int> start;  ///< offsets into cols/vals, size rows + 1
    std::vector<int> cols;
    std::vector<S> vals;

    /// out[row] = (L u)[row] for interior rows; untouched elsewhere.
    void apply(const S* u, S* out) const {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            S acc{};
            for (int p = start[r]; p < start[r + 1]; ++p) acc += vals[p] * u[cols[p]];
            out[rows[r]] = acc;
        }
    }
};

template <class S>
Stencil<S> assemble(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, std::array<S, 2> drift,
                    double t);

/// Factored step matrix A = I + c (L + diag q) on interior rows, identity on boundary rows.
template <class S>
class StepMatrix {
public:
    void factor(const SpaceTimeGrid& grid, const Stencil<S>& L, double c, const double* q, int level);
    void solve(std::vector<S>& rhs) const;
    void solve_transpose(std::vector<S>& rhs) const;

private:
    int dim_ = 1;
    // 1D tridiagonal LU factors.
    std::vector<S> lower_, diag_, upper_;
    // 2D sparse LU.
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<S>, Eigen::COLAMDOrdering<int>>> lu_;
};

}  // namespace pipl::detail
