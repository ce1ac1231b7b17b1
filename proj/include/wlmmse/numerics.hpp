#pragma once

// Small dense complex linear algebra: everything here works on matrices of
// at most a few dozen rows, so plain O(n^3) kernels are used throughout.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wlmmse/errors.hpp"

namespace wlmmse {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeMismatch("entry count " + std::to_string(data_.size()) + " != " +
                                std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static CMatrix diagonal(std::span<const cplx> d) {
        CMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    /// u v^H
    static CMatrix outer(std::span<const cplx> u, std::span<const cplx> v) {
        CMatrix m(u.size(), v.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * std::conj(v[j]);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }
    std::span<const cplx> entries() const noexcept { return data_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    CMatrix adjoint() const {
        CMatrix m(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) m(c, r) = std::conj((*this)(r, c));
        return m;
    }

    CMatrix transpose() const {
        CMatrix m(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) m(c, r) = (*this)(r, c);
        return m;
    }

    CMatrix conj() const {
        CMatrix m = *this;
        for (auto& x : m.data_) x = std::conj(x);
        return m;
    }

    double max_abs() const {
        double v = 0.0;
        for (const auto& x : data_) v = std::max(v, std::abs(x));
        return v;
    }

    bool is_hermitian(double rel_tol = 1e-12) const {
        if (!square()) return false;
        const double scale = max_abs();
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = r; c < cols_; ++c)
                if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > rel_tol * scale) return false;
        return true;
    }

    CMatrix& operator+=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    CMatrix& operator-=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    CMatrix& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
    friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

    friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
        if (a.cols_ != b.rows_)
            throw ShapeMismatch("product of " + a.shape() + " and " + b.shape());
        CMatrix m(a.rows_, b.cols_);
        for (std::size_t r = 0; r < a.rows_; ++r)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx ark = a(r, k);
                if (ark == cplx{}) continue;
                for (std::size_t c = 0; c < b.cols_; ++c) m(r, c) += ark * b(k, c);
            }
        return m;
    }

    friend CVector operator*(const CMatrix& a, std::span<const cplx> x) {
        if (a.cols_ != x.size())
            throw ShapeMismatch("matrix " + a.shape() + " times vector of length " +
                                std::to_string(x.size()));
        CVector y(a.rows_);
        for (std::size_t r = 0; r < a.rows_; ++r) {
            cplx acc{};
            for (std::size_t c = 0; c < a.cols_; ++c) acc += a(r, c) * x[c];
            y[r] = acc;
        }
        return y;
    }
    friend CVector operator*(const CMatrix& a, const CVector& x) {
        return a * std::span<const cplx>(x);
    }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

private:
    void check_same_shape(const CMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw ShapeMismatch("shapes " + shape() + " and " + o.shape());
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

/// x^H y
inline cplx inner(std::span<const cplx> x, std::span<const cplx> y) {
    if (x.size() != y.size()) throw ShapeMismatch("inner product length mismatch");
    cplx acc{};
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
    return acc;
}

inline double norm_sq(std::span<const cplx> x) {
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc;
}

inline CVector conj(std::span<const cplx> x) {
    CVector y(x.begin(), x.end());
    for (auto& v : y) v = std::conj(v);
    return y;
}

inline CVector reversed(std::span<const cplx> x) { return CVector(x.rbegin(), x.rend()); }

/// n x n matrix with ones on the anti-diagonal.
inline CMatrix backward_identity(std::size_t n) {
    if (n == 0) throw InvalidSpec("backward identity needs n >= 1");
    CMatrix j(n, n);
    for (std::size_t m = 0; m < n; ++m) j(m, n - 1 - m) = 1.0;
    return j;
}

/// J A J: reverses both the row and column order.
inline CMatrix flip_both(const CMatrix& a) {
    CMatrix m(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            m(r, c) = a(a.rows() - 1 - r, a.cols() - 1 - c);
    return m;
}

/// [[a, b], [c, d]]
inline CMatrix block2x2(const CMatrix& a, const CMatrix& b, const CMatrix& c, const CMatrix& d) {
    if (a.rows() != b.rows() || c.rows() != d.rows() || a.cols() != c.cols() ||
        b.cols() != d.cols())
        throw ShapeMismatch("block2x2 with blocks " + a.shape() + ", " + b.shape() + ", " +
                            c.shape() + ", " + d.shape());
    CMatrix m(a.rows() + c.rows(), a.cols() + b.cols());
    auto put = [&m](const CMatrix& blk, std::size_t r0, std::size_t c0) {
        for (std::size_t r = 0; r < blk.rows(); ++r)
            for (std::size_t c = 0; c < blk.cols(); ++c) m(r0 + r, c0 + c) = blk(r, c);
    };
    put(a, 0, 0);
    put(b, 0, a.cols());
    put(c, a.rows(), 0);
    put(d, a.rows(), a.cols());
    return m;
}

inline CMatrix block_diag(const CMatrix& a, const CMatrix& d) {
    return block2x2(a, CMatrix(a.rows(), d.cols()), CMatrix(d.rows(), a.cols()), d);
}

/// Lower-triangular Cholesky factor L with A = L L^H.
inline CMatrix cholesky(const CMatrix& a) {
    if (!a.square()) throw ShapeMismatch("cholesky of non-square " + a.shape());
    const std::size_t n = a.rows();
    CMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > 0.0))
            throw NotPositiveDefinite("pivot " + std::to_string(j) + " is " + std::to_string(d));
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return l;
}

inline CVector cholesky_solve(const CMatrix& l, std::span<const cplx> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw ShapeMismatch("rhs length mismatch in cholesky_solve");
    CVector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= std::conj(l(k, ii)) * y[k];
        y[ii] /= l(ii, ii);
    }
    return y;
}

/// Solves A x = b for Hermitian positive-definite A.
inline CVector hermitian_solve(const CMatrix& a, std::span<const cplx> b) {
    return cholesky_solve(cholesky(a), b);
}

/// Solves A X = B column by column.
inline CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b) {
    const CMatrix l = cholesky(a);
    CMatrix x(b.rows(), b.cols());
    CVector col(b.rows());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t r = 0; r < b.rows(); ++r) col[r] = b(r, c);
        const CVector sol = cholesky_solve(l, col);
        for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = sol[r];
    }
    return x;
}

struct EigenDecomposition {
    std::vector<double> values;    ///< ascending
    std::vector<CVector> vectors;  ///< unit-norm, phase-normalized, matching `values`
};

/// Rotates v so that its largest-magnitude entry is real and positive.
inline void normalize_phase(CVector& v) {
    std::size_t best = 0;
    double mag = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        // Small slack so near-ties resolve to the lowest index deterministically.
        if (std::abs(v[i]) > mag * (1.0 + 1e-12)) {
            mag = std::abs(v[i]);
            best = i;
        }
    }
    if (mag <= 0.0) return;
    const cplx rot = std::conj(v[best]) / mag;
    for (auto& x : v) x *= rot;
    v[best] = cplx(std::abs(v[best]), 0.0);
}

/// Cyclic complex Jacobi sweep for Hermitian matrices.
inline EigenDecomposition eigen_hermitian(const CMatrix& input) {
    if (!input.square()) throw ShapeMismatch("eigen_hermitian of non-square " + input.shape());
    const std::size_t n = input.rows();
    CMatrix a = input;
    // Symmetrize so round-off in the caller cannot leak into the rotation angles.
    for (std::size_t r = 0; r < n; ++r) {
        a(r, r) = a(r, r).real();
        for (std::size_t c = r + 1; c < n; ++c) {
            const cplx avg = 0.5 * (a(r, c) + std::conj(a(c, r)));
            a(r, c) = avg;
            a(c, r) = std::conj(avg);
        }
    }
    CMatrix v = CMatrix::identity(n);

    const double scale = std::max(a.max_abs(), 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(off) <= 1e-16 * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq_abs = std::abs(a(p, q));
                if (apq_abs <= 1e-300) continue;
                const cplx phase = a(p, q) / apq_abs;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double theta = 0.5 * std::atan2(2.0 * apq_abs, aqq - app);
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                // Rotation acting on columns p, q: [c, s*phase; -s*conj(phase), c]
                const cplx sp = s * phase;
                const cplx spc = s * std::conj(phase);
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx akp = a(k, p);
                    const cplx akq = a(k, q);
                    a(k, p) = c * akp - spc * akq;
                    a(k, q) = sp * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx apk = a(p, k);
                    const cplx aqk = a(q, k);
                    a(p, k) = c * apk - sp * aqk;
                    a(q, k) = spc * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx vkp = v(k, p);
                    const cplx vkq = v(k, q);
                    v(k, p) = c * vkp - spc * vkq;
                    v(k, q) = sp * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&a](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });

    EigenDecomposition out;
    for (std::size_t idx : order) {
        out.values.push_back(a(idx, idx).real());
        CVector col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = v(k, idx);
        normalize_phase(col);
        out.vectors.push_back(std::move(col));
    }
    return out;
}

struct Eigenpair {
    double value = 0.0;
    CVector vector;
};

/// Largest eigenvalue and its unit eigenvector of a Hermitian PSD matrix.
/// The zero matrix yields (0, e_1).
inline Eigenpair top_eigenpair(const CMatrix& a) {
    if (!a.square() || a.rows() == 0) throw ShapeMismatch("top_eigenpair of " + a.shape());
    if (a.max_abs() == 0.0) {
        CVector e(a.rows());
        e[0] = 1.0;
        return {0.0, e};
    }
    EigenDecomposition eig = eigen_hermitian(a);
    return {std::max(0.0, eig.values.back()), std::move(eig.vectors.back())};
}

} // namespace wlmmse
