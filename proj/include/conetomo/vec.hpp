#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace conetomo {

/// Small fixed-size vector over double, used for points and directions.
template <int N>
struct Vec {
    static_assert(N >= 1);
    std::array<double, N> c{};

    constexpr Vec() = default;
    template <class... T, class = std::enable_if_t<sizeof...(T) == N>>
    constexpr Vec(T... xs) : c{static_cast<double>(xs)...} {}

    constexpr double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    constexpr double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    static constexpr int dim = N;

    friend constexpr Vec operator+(Vec a, const Vec& b) {
        for (int i = 0; i < N; ++i) a.c[i] += b.c[i];
        return a;
    }
    friend constexpr Vec operator-(Vec a, const Vec& b) {
        for (int i = 0; i < N; ++i) a.c[i] -= b.c[i];
        return a;
    }
    friend constexpr Vec operator*(double s, Vec a) {
        for (int i = 0; i < N; ++i) a.c[i] *= s;
        return a;
    }
    friend constexpr Vec operator-(Vec a) {
        for (int i = 0; i < N; ++i) a.c[i] = -a.c[i];
        return a;
    }
    friend constexpr bool operator==(const Vec& a, const Vec& b) { return a.c == b.c; }
};

template <int N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0;
    for (int i = 0; i < N; ++i) s += a.c[i] * b.c[i];
    return s;
}

template <int N>
double norm(const Vec<N>& a) {
    return std::sqrt(dot(a, a));
}

template <int N>
constexpr double norm2(const Vec<N>& a) {
    return dot(a, a);
}

template <int N>
Vec<N> normalized(const Vec<N>& a) {
    const double n = norm(a);
    return (1.0 / n) * a;
}

template <int N>
constexpr Vec<N> axis_unit(int i) {
    Vec<N> e{};
    e[i] = 1.0;
    return e;
}

/// a + t*v without constructing temporaries twice; hot path in ray quadrature.
template <int N>
constexpr Vec<N> ray_point(const Vec<N>& a, double t, const Vec<N>& v) {
    Vec<N> p;
    for (int i = 0; i < N; ++i) p.c[i] = a.c[i] + t * v.c[i];
    return p;
}

}  // namespace conetomo
