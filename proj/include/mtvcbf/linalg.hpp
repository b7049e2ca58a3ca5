#pragma once
#include <array>
#include <cmath>

namespace mtvcbf {

// ============================================================
// Small fixed-size linear algebra used throughout the library
// ============================================================

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::sqrt(dot(v, v)); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<std::array<double, 3>, 3> m{};

    double& operator()(int r, int c) { return m[r][c]; }
    double operator()(int r, int c) const { return m[r][c]; }

    static Mat3 zero() { return Mat3{}; }
};

inline Vec3 operator*(const Mat3& A, const Vec3& v) {
    return {A(0, 0) * v.x + A(0, 1) * v.y + A(0, 2) * v.z,
            A(1, 0) * v.x + A(1, 1) * v.y + A(1, 2) * v.z,
            A(2, 0) * v.x + A(2, 1) * v.y + A(2, 2) * v.z};
}

// v^T A v
inline double quad_form(const Mat3& A, const Vec3& v) { return dot(v, A * v); }

inline double max_abs_asymmetry(const Mat3& A) {
    double worst = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = r + 1; c < 3; ++c)
            worst = std::max(worst, std::abs(A(r, c) - A(c, r)));
    return worst;
}

using Vec4 = std::array<double, 4>;

inline double dot(const Vec4& a, const Vec4& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

// 3x4 matrix mapping a stacked pair input (u_i, u_j) to a pose-derivative triple.
struct Mat34 {
    std::array<std::array<double, 4>, 3> m{};

    double& operator()(int r, int c) { return m[r][c]; }
    double operator()(int r, int c) const { return m[r][c]; }
};

inline Vec3 operator*(const Mat34& A, const Vec4& u) {
    Vec3 out;
    for (int r = 0; r < 3; ++r)
        out[r] = A(r, 0) * u[0] + A(r, 1) * u[1] + A(r, 2) * u[2] + A(r, 3) * u[3];
    return out;
}

// A^T g for the 3x4 input map: pulls a gradient back onto the 4 inputs.
inline Vec4 transpose_apply(const Mat34& A, const Vec3& g) {
    Vec4 out{};
    for (int c = 0; c < 4; ++c)
        out[c] = A(0, c) * g.x + A(1, c) * g.y + A(2, c) * g.z;
    return out;
}

}  // namespace mtvcbf
