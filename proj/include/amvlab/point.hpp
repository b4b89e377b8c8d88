#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <string>

#include "common.hpp"

namespace amv {

// A point of the ambient chart. All built-in spaces live in a single chart
// of dimension 1, 2 or 3; chart_id is kept for report provenance.
struct Point {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    int dim = 0;
    int chart_id = 0;

    Point() = default;
    Point(std::initializer_list<double> xs) {
        if (xs.size() < 1 || xs.size() > 3) throw input_error("Point: dimension must be 1..3");
        dim = static_cast<int>(xs.size());
        int i = 0;
        for (double v : xs) c[static_cast<std::size_t>(i++)] = v;
        check_finite();
    }
    static Point zero(int n) {
        Point p;
        p.dim = n;
        return p;
    }

    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

    void check_finite() const {
        for (int i = 0; i < dim; ++i)
            if (!std::isfinite(c[static_cast<std::size_t>(i)]))
                throw input_error("Point: non-finite coordinate");
    }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < dim; ++i) s += (i ? "," : "") + std::to_string(c[static_cast<std::size_t>(i)]);
        return s + ")";
    }
};

inline double euclidean_distance(const Point& p, const Point& q) {
    double s = 0.0;
    for (int i = 0; i < p.dim; ++i) {
        double d = p[i] - q[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Point operator+(const Point& p, const Point& q) {
    Point r = p;
    for (int i = 0; i < p.dim; ++i) r[i] += q[i];
    return r;
}

inline Point operator-(const Point& p, const Point& q) {
    Point r = p;
    for (int i = 0; i < p.dim; ++i) r[i] -= q[i];
    return r;
}

}  // namespace amv
