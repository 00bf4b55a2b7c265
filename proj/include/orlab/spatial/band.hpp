#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <type_traits>
#include <utility>
#include <vector>

#include "orlab/errors.hpp"

namespace orlab {

template <class T>
inline double magnitude(const T& v) {
    return std::abs(v);
}

template <class T>
inline T conjugate(const T& v) {
    if constexpr (std::is_floating_point_v<T>) return v;
    else return std::conj(v);
}

/**
 * Square band matrix with kl sub- and ku super-diagonals.
 *
 * Storage is column-major with kl extra rows on top, so the same buffer can hold
 * the LU factors with pivoting fill-in (LAPACK gbtrf layout).
 */
template <class Scalar>
class BandMatrix {
public:
    BandMatrix() = default;
    BandMatrix(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1) {
        if (n < 1 || kl < 0 || ku < 0) throw InvalidInput("BandMatrix: bad shape");
        data_.assign(static_cast<std::size_t>(ld_) * n_, Scalar(0));
    }

    int size() const noexcept { return n_; }
    int lower() const noexcept { return kl_; }
    int upper() const noexcept { return ku_; }

    bool in_band(int i, int j) const noexcept { return j - ku_ <= i && i <= j + kl_; }

    Scalar& operator()(int i, int j) { return data_[index(i, j)]; }
    Scalar operator()(int i, int j) const { return in_band(i, j) ? data_[index(i, j)] : Scalar(0); }

    template <class Vec>
    Vec multiply(const Vec& x) const {
        Vec y(n_);
        for (int i = 0; i < n_; ++i) {
            Scalar acc(0);
            int j0 = std::max(0, i - kl_), j1 = std::min(n_ - 1, i + ku_);
            for (int j = j0; j <= j1; ++j) acc += data_[index(i, j)] * x[j];
            y[i] = acc;
        }
        return y;
    }

    double norm1() const {
        double best = 0.0;
        for (int j = 0; j < n_; ++j) {
            double col = 0.0;
            for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i)
                col += magnitude(data_[index(i, j)]);
            best = std::max(best, col);
        }
        return best;
    }

    /// Copy of the same shape with every entry scaled and the identity added: I - lambda * this.
    template <class S2>
    BandMatrix<S2> shifted_identity(S2 lambda) const {
        BandMatrix<S2> out(n_, kl_, ku_);
        for (int j = 0; j < n_; ++j)
            for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i)
                out(i, j) = -lambda * S2(data_[index(i, j)]);
        for (int i = 0; i < n_; ++i) out(i, i) += S2(1);
        return out;
    }

    /// Zero row i (within the band).
    void clear_row(int i) {
        for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j) data_[index(i, j)] = Scalar(0);
    }

    template <class S2>
    BandMatrix<S2> cast() const {
        BandMatrix<S2> out(n_, kl_, ku_);
        for (int j = 0; j < n_; ++j)
            for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i) out(i, j) = S2(data_[index(i, j)]);
        return out;
    }

    /// Raw LAPACK-style access used by the factorization.
    Scalar* raw() noexcept { return data_.data(); }
    const Scalar* raw() const noexcept { return data_.data(); }
    int leading_dim() const noexcept { return ld_; }

private:
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(kl_ + ku_ + i - j) + static_cast<std::size_t>(j) * ld_;
    }

    int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 1;
    std::vector<Scalar> data_;
};

/**
 * Banded LU with partial pivoting. Throws SingularSystem on a zero pivot or when the
 * 1-norm condition estimate exceeds `cond_limit`.
 */
template <class Scalar>
class BandLU {
public:
    BandLU() = default;

    explicit BandLU(BandMatrix<Scalar> a, double cond_limit = 1e14, std::complex<double> tag = {})
        : lu_(std::move(a)) {
        anorm_ = lu_.norm1();
        factor(tag);
        cond_ = anorm_ * inverse_norm1_estimate();
        if (!(cond_ <= cond_limit))
            throw SingularSystem("banded system badly conditioned (estimate " + detail::sci(cond_) + ")", tag,
                                 cond_);
    }

    int size() const noexcept { return lu_.size(); }
    double condition_estimate() const noexcept { return cond_; }

    template <class Vec>
    void solve_in_place(Vec& b) const {
        const int n = lu_.size(), kl = lu_.lower(), kv = lu_.lower() + lu_.upper();
        const Scalar* ab = lu_.raw();
        const int ld = lu_.leading_dim();
        for (int j = 0; j < n - 1; ++j) {
            int km = std::min(kl, n - 1 - j);
            int p = piv_[j];
            if (p != j) std::swap(b[j], b[p]);
            const Scalar* col = ab + kv + static_cast<std::ptrdiff_t>(j) * ld;
            for (int r = 1; r <= km; ++r) b[j + r] -= col[r] * b[j];
        }
        for (int j = n - 1; j >= 0; --j) {
            const Scalar* col = ab + static_cast<std::ptrdiff_t>(j) * ld;
            b[j] /= col[kv];
            Scalar bj = b[j];
            for (int i = std::max(0, j - kv); i < j; ++i) b[i] -= col[kv + i - j] * bj;
        }
    }

    /// Solve A^H x = b.
    template <class Vec>
    void solve_adjoint_in_place(Vec& b) const {
        const int n = lu_.size(), kl = lu_.lower(), kv = lu_.lower() + lu_.upper();
        const Scalar* ab = lu_.raw();
        const int ld = lu_.leading_dim();
        for (int j = 0; j < n; ++j) {
            const Scalar* col = ab + static_cast<std::ptrdiff_t>(j) * ld;
            Scalar acc = b[j];
            for (int i = std::max(0, j - kv); i < j; ++i) acc -= conjugate(col[kv + i - j]) * b[i];
            b[j] = acc / conjugate(col[kv]);
        }
        for (int j = n - 2; j >= 0; --j) {
            int km = std::min(kl, n - 1 - j);
            const Scalar* col = ab + kv + static_cast<std::ptrdiff_t>(j) * ld;
            Scalar acc = b[j];
            for (int r = 1; r <= km; ++r) acc -= conjugate(col[r]) * b[j + r];
            b[j] = acc;
            int p = piv_[j];
            if (p != j) std::swap(b[j], b[p]);
        }
    }

    template <class Vec>
    Vec solve(Vec b) const {
        solve_in_place(b);
        return b;
    }

private:
    void factor(std::complex<double> tag) {
        const int n = lu_.size(), kl = lu_.lower(), ku = lu_.upper(), kv = kl + ku;
        const int ld = lu_.leading_dim();
        Scalar* ab = lu_.raw();
        auto at = [&](int i, int j) -> Scalar& { return ab[(kv + i - j) + static_cast<std::ptrdiff_t>(j) * ld]; };
        piv_.assign(n, 0);
        int ju = 0;
        for (int j = 0; j < n; ++j) {
            int km = std::min(kl, n - 1 - j);
            int p = 0;
            double best = magnitude(at(j, j));
            for (int r = 1; r <= km; ++r) {
                double m = magnitude(at(j + r, j));
                if (m > best) {
                    best = m;
                    p = r;
                }
            }
            piv_[j] = j + p;
            if (best == 0.0) throw SingularSystem("banded system is singular (zero pivot)", tag, INFINITY);
            ju = std::max(ju, std::min(j + ku + p, n - 1));
            if (p != 0)
                for (int c = j; c <= ju; ++c) std::swap(at(j, c), at(j + p, c));
            Scalar inv = Scalar(1) / at(j, j);
            for (int r = 1; r <= km; ++r) at(j + r, j) *= inv;
            for (int c = j + 1; c <= ju; ++c) {
                Scalar u = at(j, c);
                if (u == Scalar(0)) continue;
                for (int r = 1; r <= km; ++r) at(j + r, c) -= at(j + r, j) * u;
            }
        }
    }

    /// Hager/Higham 1-norm estimate of ||A^{-1}||_1.
    double inverse_norm1_estimate() const {
        const int n = lu_.size();
        std::vector<Scalar> x(n, Scalar(1.0 / n));
        double est = 0.0;
        int last_j = -1;
        for (int iter = 0; iter < 5; ++iter) {
            std::vector<Scalar> y = x;
            solve_in_place(y);
            double ny = 0.0;
            for (auto& v : y) ny += magnitude(v);
            if (iter > 0 && ny <= est) {
                est = std::max(est, ny);
                break;
            }
            est = ny;
            std::vector<Scalar> xi(n);
            for (int i = 0; i < n; ++i) {
                double m = magnitude(y[i]);
                xi[i] = m == 0.0 ? Scalar(1) : y[i] / Scalar(m);
            }
            solve_adjoint_in_place(xi);
            int jmax = 0;
            double zmax = -1.0;
            for (int i = 0; i < n; ++i)
                if (magnitude(xi[i]) > zmax) {
                    zmax = magnitude(xi[i]);
                    jmax = i;
                }
            if (jmax == last_j) break;
            last_j = jmax;
            std::fill(x.begin(), x.end(), Scalar(0));
            x[jmax] = Scalar(1);
        }
        // Higham's alternating-sign safeguard.
        std::vector<Scalar> alt(n);
        for (int i = 0; i < n; ++i)
            alt[i] = Scalar((i % 2 ? -1.0 : 1.0) * (1.0 + (n > 1 ? double(i) / (n - 1) : 0.0)));
        solve_in_place(alt);
        double na = 0.0;
        for (auto& v : alt) na += magnitude(v);
        return std::max(est, 2.0 * na / (3.0 * n));
    }

    BandMatrix<Scalar> lu_;
    std::vector<int> piv_;
    double anorm_ = 0.0;
    double cond_ = 0.0;
};

}  // namespace orlab
