#include <algorithm>
#include <cmath>
#include <numeric>

#include "aircade/embedding.hpp"

namespace aircade {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues and column eigenvectors, unordered.
void jacobi_eigh(std::vector<double>& a, int64_t n, std::vector<double>& eigvals,
                 std::vector<double>& eigvecs) {
    eigvecs.assign(static_cast<size_t>(n * n), 0.0);
    for (int64_t i = 0; i < n; ++i) eigvecs[static_cast<size_t>(i * n + i)] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int64_t p = 0; p < n; ++p)
            for (int64_t q = p + 1; q < n; ++q) off += a[static_cast<size_t>(p * n + q)] * a[static_cast<size_t>(p * n + q)];
        if (off < 1e-28) break;

        for (int64_t p = 0; p < n; ++p) {
            for (int64_t q = p + 1; q < n; ++q) {
                double apq = a[static_cast<size_t>(p * n + q)];
                if (std::abs(apq) < 1e-300) continue;
                double app = a[static_cast<size_t>(p * n + p)];
                double aqq = a[static_cast<size_t>(q * n + q)];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int64_t i = 0; i < n; ++i) {
                    double aip = a[static_cast<size_t>(i * n + p)];
                    double aiq = a[static_cast<size_t>(i * n + q)];
                    a[static_cast<size_t>(i * n + p)] = c * aip - s * aiq;
                    a[static_cast<size_t>(i * n + q)] = s * aip + c * aiq;
                }
                for (int64_t j = 0; j < n; ++j) {
                    double apj = a[static_cast<size_t>(p * n + j)];
                    double aqj = a[static_cast<size_t>(q * n + j)];
                    a[static_cast<size_t>(p * n + j)] = c * apj - s * aqj;
                    a[static_cast<size_t>(q * n + j)] = s * apj + c * aqj;
                }
                for (int64_t i = 0; i < n; ++i) {
                    double vip = eigvecs[static_cast<size_t>(i * n + p)];
                    double viq = eigvecs[static_cast<size_t>(i * n + q)];
                    eigvecs[static_cast<size_t>(i * n + p)] = c * vip - s * viq;
                    eigvecs[static_cast<size_t>(i * n + q)] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) eigvals[static_cast<size_t>(i)] = a[static_cast<size_t>(i * n + i)];
}

}  // namespace

Projection2D project_embeddings_2d(const Tensor& table) {
    if (table.rank() != 2) throw ShapeError("project_embeddings_2d: table must be 2-D");
    int64_t n = table.shape[0], d = table.shape[1];
    if (n < 2 || d < 2) throw ShapeError("project_embeddings_2d: need n >= 2 and d >= 2");

    // center rows
    std::vector<double> mean(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += table.data[static_cast<size_t>(i * d + j)];
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<double> centered(static_cast<size_t>(n * d));
    double max_abs = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) {
            double v = table.data[static_cast<size_t>(i * d + j)] - mean[static_cast<size_t>(j)];
            centered[static_cast<size_t>(i * d + j)] = v;
            max_abs = std::max(max_abs, std::abs(v));
        }

    Projection2D out;
    out.coords = Tensor({n, 2});
    if (max_abs < 1e-12) {
        out.degenerate = true;  // rank-0 table: all rows identical
        return out;
    }

    // scatter matrix S = centered^T centered
    std::vector<double> scatter(static_cast<size_t>(d * d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < d; ++p) {
            double v = centered[static_cast<size_t>(i * d + p)];
            for (int64_t q = 0; q < d; ++q)
                scatter[static_cast<size_t>(p * d + q)] += v * centered[static_cast<size_t>(i * d + q)];
        }

    std::vector<double> eigvals, eigvecs;
    jacobi_eigh(scatter, d, eigvals, eigvecs);

    std::vector<int64_t> order(static_cast<size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t a, int64_t b) { return eigvals[static_cast<size_t>(a)] > eigvals[static_cast<size_t>(b)]; });

    for (int comp = 0; comp < 2; ++comp) {
        int64_t col = order[static_cast<size_t>(comp)];
        // sign convention: largest-magnitude coordinate positive
        int64_t arg = 0;
        double best = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            double v = std::abs(eigvecs[static_cast<size_t>(j * d + col)]);
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        double sign = eigvecs[static_cast<size_t>(arg * d + col)] >= 0 ? 1.0 : -1.0;
        for (int64_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int64_t j = 0; j < d; ++j)
                acc += centered[static_cast<size_t>(i * d + j)] * eigvecs[static_cast<size_t>(j * d + col)];
            out.coords.data[static_cast<size_t>(i * 2 + comp)] = sign * acc;
        }
    }
    return out;
}

}  // namespace aircade
