#ifndef DSV_LINALG_HPP
#define DSV_LINALG_HPP

#include <array>
#include <cmath>

namespace dsv {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

struct Mat3 {
    // Row-major.
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double trace() const { return m[0] + m[4] + m[8]; }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    static Mat3 rotation_x(double rad) {
        Mat3 r;
        const double c = std::cos(rad), s = std::sin(rad);
        r.m = {1, 0, 0, 0, c, -s, 0, s, c};
        return r;
    }
    static Mat3 rotation_y(double rad) {
        Mat3 r;
        const double c = std::cos(rad), s = std::sin(rad);
        r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
        return r;
    }
    static Mat3 rotation_z(double rad) {
        Mat3 r;
        const double c = std::cos(rad), s = std::sin(rad);
        r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
        return r;
    }
};

// Cyclic Jacobi eigensolver for symmetric matrices (column eigenvectors,
// ascending eigenvalues). n stays tiny here (3 or 9), so plain sweeps suffice.
template <int N>
inline void jacobi_eigen_sym(const std::array<double, N * N>& a_in,
                             std::array<double, N>& eigenvalues,
                             std::array<double, N * N>& eigenvectors) {
    std::array<double, N * N> a = a_in;
    std::array<double, N * N>& v = eigenvectors;
    for (int i = 0; i < N * N; ++i) v[i] = 0.0;
    for (int i = 0; i < N; ++i) v[i * N + i] = 1.0;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a[p * N + q] * a[p * N + q];
        if (off < 1e-30) break;

        for (int p = 0; p < N; ++p) {
            for (int q = p + 1; q < N; ++q) {
                const double apq = a[p * N + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double app = a[p * N + p];
                const double aqq = a[q * N + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < N; ++k) {
                    const double akp = a[k * N + p];
                    const double akq = a[k * N + q];
                    a[k * N + p] = c * akp - s * akq;
                    a[k * N + q] = s * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    const double apk = a[p * N + k];
                    const double aqk = a[q * N + k];
                    a[p * N + k] = c * apk - s * aqk;
                    a[q * N + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < N; ++k) {
                    const double vkp = v[k * N + p];
                    const double vkq = v[k * N + q];
                    v[k * N + p] = c * vkp - s * vkq;
                    v[k * N + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    for (int i = 0; i < N; ++i) eigenvalues[i] = a[i * N + i];

    // Sort ascending, permuting eigenvector columns alongside.
    for (int i = 0; i < N - 1; ++i) {
        int lo = i;
        for (int j = i + 1; j < N; ++j)
            if (eigenvalues[j] < eigenvalues[lo]) lo = j;
        if (lo != i) {
            std::swap(eigenvalues[i], eigenvalues[lo]);
            for (int k = 0; k < N; ++k) std::swap(v[k * N + i], v[k * N + lo]);
        }
    }
}

// Nearest rotation to M (polar decomposition via eigendecomposition of MᵀM),
// with a determinant fix so the result lands in SO(3).
Mat3 orthonormalize_rotation(const Mat3& m);

}  // namespace dsv

#endif
