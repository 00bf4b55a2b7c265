#pragma once

#include <Eigen/Core>

#include <complex>
#include <functional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "orlab/errors.hpp"
#include "orlab/spatial/band.hpp"
#include "orlab/spatial/stencil.hpp"

namespace orlab {

template <class Scalar>
using GridVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Uniform grid on [x_min, x_max] with n interior nodes; boundary nodes 0 and n+1 are stored too.
class Grid1D {
public:
    explicit Grid1D(int n, double x_min = 0.0, double x_max = 1.0) : n_(n), x_min_(x_min), x_max_(x_max) {
        if (n < 1) throw InvalidInput("Grid1D: n must be positive");
        if (!(x_max > x_min)) throw InvalidInput("Grid1D: x_max must exceed x_min");
        h_ = (x_max - x_min) / (n + 1);
    }

    int n() const noexcept { return n_; }
    int nodes() const noexcept { return n_ + 2; }
    double h() const noexcept { return h_; }
    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    double x(int i) const noexcept { return i == n_ + 1 ? x_max_ : x_min_ + i * h_; }

    GridVector<double> points() const {
        GridVector<double> p(nodes());
        for (int i = 0; i < nodes(); ++i) p[i] = x(i);
        return p;
    }

    template <class F>
    auto sample(F&& f) const {
        using S = std::decay_t<decltype(f(0.0))>;
        GridVector<S> v(nodes());
        for (int i = 0; i < nodes(); ++i) v[i] = f(x(i));
        return v;
    }

private:
    int n_;
    double x_min_, x_max_, h_;
};

enum class Side { Left, Right };
enum class BCKind { Dirichlet, Neumann };

inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }
inline const char* to_string(BCKind k) { return k == BCKind::Dirichlet ? "dirichlet" : "neumann"; }

/// One boundary condition slot: which endpoint and which operator B.
struct BoundaryCondition {
    Side side;
    BCKind kind;
};

/**
 * Ordered list of conditions. Left conditions occupy rows 0, 1, ...; right conditions rows
 * N-1, N-2, ... in listed order. A snapshot pairs the layout with one value per condition.
 */
using BoundaryLayout = std::vector<BoundaryCondition>;

template <class Scalar>
struct BoundarySnapshot {
    BoundaryLayout layout;
    std::vector<Scalar> values;
};

/// Grid row that carries condition `index` of `layout`.
inline int boundary_row(const BoundaryLayout& layout, std::size_t index, int N) {
    int left = 0, right = 0;
    for (std::size_t c = 0; c < layout.size(); ++c) {
        int row = layout[c].side == Side::Left ? left++ : N - 1 - right++;
        if (c == index) return row;
    }
    throw InvalidInput("boundary_row: condition index out of range");
}

inline std::vector<int> boundary_rows(const BoundaryLayout& layout, int N) {
    std::vector<int> rows;
    for (std::size_t c = 0; c < layout.size(); ++c) rows.push_back(boundary_row(layout, c, N));
    return rows;
}

inline std::vector<bool> boundary_row_mask(const BoundaryLayout& layout, int N) {
    std::vector<bool> mask(N, false);
    for (int r : boundary_rows(layout, N)) mask[r] = true;
    return mask;
}

/// Stencil applied by condition c: identity for Dirichlet, one-sided first derivative for Neumann.
inline Stencil boundary_stencil(const BoundaryCondition& bc, int accuracy, int N, double h) {
    int node = bc.side == Side::Left ? 0 : N - 1;
    if (bc.kind == BCKind::Dirichlet) return {node, {1.0}};
    Stencil s = derivative_stencil(1, accuracy, node, N);
    for (auto& w : s.weights) w /= h;
    s.first += node;  // absolute column index
    return s;
}

/**
 * Banded finite-difference realization of L = sum_k alpha_k(x) d^k/dx^k at every node
 * (biased stencils of the same accuracy near the ends).
 */
template <class Scalar>
class DiscreteOperator {
public:
    using Coefficient = std::function<Scalar(double)>;

    DiscreteOperator(Grid1D grid, int order, int accuracy, std::vector<Coefficient> coefficients)
        : grid_(grid), order_(order), accuracy_(accuracy), coeffs_(std::move(coefficients)) {
        if (order < 1 || order > 3) throw InvalidInput("DiscreteOperator: derivative order must be 1, 2 or 3");
        if (accuracy != 2 && accuracy != 4) throw InvalidInput("DiscreteOperator: accuracy must be 2 or 4");
        if (static_cast<int>(coeffs_.size()) != order + 1)
            throw InvalidInput("DiscreteOperator: need one coefficient per derivative order 0..l");
        const int N = grid_.nodes();
        const int width = order + accuracy;
        if (grid_.n() < 2 * width) throw InvalidInput("DiscreteOperator: n too small for stencil");

        std::vector<std::vector<Stencil>> st(N);
        int kl = 0, ku = 0;
        for (int i = 0; i < N; ++i)
            for (int k = 0; k <= order; ++k) {
                st[i].push_back(derivative_stencil(k, accuracy, i, N));
                const auto& s = st[i].back();
                kl = std::max(kl, -s.first);
                ku = std::max(ku, s.first + static_cast<int>(s.weights.size()) - 1);
            }
        // Room for Neumann boundary rows of any layout (at most `order` rows per side).
        kl = std::max(kl, accuracy + order);
        ku = std::max(ku, accuracy + order);
        mat_ = BandMatrix<Scalar>(N, kl, ku);
        for (int i = 0; i < N; ++i) {
            const double xi = grid_.x(i);
            for (int k = 0; k <= order; ++k) {
                Scalar a = coeffs_[k](xi);
                if (a == Scalar(0)) continue;
                const auto& s = st[i][k];
                double scale = std::pow(grid_.h(), -k);
                for (std::size_t p = 0; p < s.weights.size(); ++p)
                    mat_(i, i + s.first + static_cast<int>(p)) += a * Scalar(s.weights[p] * scale);
            }
        }
    }

    const Grid1D& grid() const noexcept { return grid_; }
    int order() const noexcept { return order_; }
    int accuracy() const noexcept { return accuracy_; }
    Scalar coefficient(int k, double x) const { return coeffs_.at(k)(x); }
    const BandMatrix<Scalar>& matrix() const noexcept { return mat_; }

    template <class T>
    GridVector<T> apply(const GridVector<T>& v) const {
        if (v.size() != grid_.nodes()) throw InvalidInput("DiscreteOperator::apply: size mismatch");
        if constexpr (std::is_same_v<T, Scalar>) {
            return mat_.multiply(v);
        } else {
            return mat_.template cast<T>().multiply(v);
        }
    }

private:
    Grid1D grid_;
    int order_;
    int accuracy_;
    std::vector<Coefficient> coeffs_;
    BandMatrix<Scalar> mat_;
};

template <class Scalar>
DiscreteOperator<Scalar> build_operator(const Grid1D& grid, int order, int accuracy,
                                        std::vector<typename DiscreteOperator<Scalar>::Coefficient> coefficients) {
    return DiscreteOperator<Scalar>(grid, order, accuracy, std::move(coefficients));
}

/// Install boundary-condition rows in-place in a system matrix.
template <class T>
void install_boundary_rows(BandMatrix<T>& m, const BoundaryLayout& layout, int accuracy, double h) {
    const int N = m.size();
    for (std::size_t c = 0; c < layout.size(); ++c) {
        int row = boundary_row(layout, c, N);
        m.clear_row(row);
        Stencil s = boundary_stencil(layout[c], accuracy, N, h);
        for (std::size_t p = 0; p < s.weights.size(); ++p) {
            int col = s.first + static_cast<int>(p);
            if (!m.in_band(row, col)) throw InvalidInput("boundary row does not fit the operator band");
            m(row, col) = T(s.weights[p]);
        }
    }
}

/**
 * Factorized (I - lambda L_h) with boundary rows installed. Reusable for many right-hand sides.
 */
template <class T>
class ShiftedSolver {
public:
    template <class S>
    ShiftedSolver(const DiscreteOperator<S>& op, T lambda, BoundaryLayout layout)
        : layout_(std::move(layout)), lambda_(lambda), N_(op.grid().nodes()) {
        BandMatrix<T> m = op.matrix().template shifted_identity<T>(lambda);
        install_boundary_rows(m, layout_, op.accuracy(), op.grid().h());
        rows_ = boundary_rows(layout_, N_);
        // A bare identity row next to PDE rows of size |lambda|/h^k gets pivoted away, and the
        // boundary value then comes back with an eps*|lambda|/h^k error. Scaling the row to the
        // largest entry of its column keeps it as the pivot, so the value is reproduced to 1 ulp.
        scales_.assign(rows_.size(), 1.0);
        for (std::size_t c = 0; c < layout_.size(); ++c) {
            if (layout_[c].kind != BCKind::Dirichlet) continue;
            const int node = layout_[c].side == Side::Left ? 0 : N_ - 1;
            double big = 1.0;
            for (int r = std::max(0, node - m.upper()); r <= std::min(N_ - 1, node + m.lower()); ++r)
                if (r != rows_[c]) big = std::max(big, std::abs(m(r, node)));
            scales_[c] = big;
            m(rows_[c], node) *= big;
        }
        lu_ = BandLU<T>(std::move(m), 1e14, std::complex<double>(lambda));
    }

    /// rhs at PDE rows; values[c] replaces the row of condition c.
    GridVector<T> solve(GridVector<T> rhs, const std::vector<T>& values) const {
        if (rhs.size() != N_) throw InvalidInput("ShiftedSolver: rhs size mismatch");
        if (values.size() != rows_.size()) throw InvalidInput("ShiftedSolver: boundary value count mismatch");
        for (std::size_t c = 0; c < rows_.size(); ++c) rhs[rows_[c]] = values[c] * scales_[c];
        lu_.solve_in_place(rhs);
        return rhs;
    }

    const BoundaryLayout& layout() const noexcept { return layout_; }
    T lambda() const noexcept { return lambda_; }
    double condition_estimate() const noexcept { return lu_.condition_estimate(); }

private:
    BoundaryLayout layout_;
    T lambda_;
    int N_;
    std::vector<int> rows_;
    std::vector<double> scales_;
    BandLU<T> lu_;
};

/// One-shot solve of (I - lambda L_h) v = rhs with boundary rows from `bc`.
template <class S, class T>
GridVector<T> solve_shifted(const DiscreteOperator<S>& op, T lambda, const GridVector<T>& rhs,
                            const BoundarySnapshot<T>& bc) {
    ShiftedSolver<T> solver(op, lambda, bc.layout);
    return solver.solve(rhs, bc.values);
}

/// FD derivative of a grid function at every node.
template <class T>
GridVector<T> apply_derivative(const Grid1D& grid, const GridVector<T>& v, int k, int accuracy) {
    const int N = grid.nodes();
    if (v.size() != N) throw InvalidInput("apply_derivative: size mismatch");
    if (k < 1 || k > 3) throw InvalidInput("apply_derivative: k must be 1, 2 or 3");
    const double scale = std::pow(grid.h(), -k);
    GridVector<T> out(N);
    for (int i = 0; i < N; ++i) {
        Stencil s = derivative_stencil(k, accuracy, i, N);
        T acc(0);
        for (std::size_t p = 0; p < s.weights.size(); ++p) acc += s.weights[p] * v[i + s.first + static_cast<int>(p)];
        out[i] = acc * scale;
    }
    return out;
}

/// CSV with columns x, Re, Im.
template <class T>
void write_grid_csv(std::ostream& os, const Grid1D& grid, const GridVector<T>& v) {
    os << "x,re,im\n";
    os.precision(17);
    for (int i = 0; i < grid.nodes(); ++i) {
        std::complex<double> z(v[i]);
        os << grid.x(i) << ',' << z.real() << ',' << z.imag() << '\n';
    }
}

}  // namespace orlab
