#include "semchange/numerics.hpp"

#include "semchange/error.hpp"

#include <algorithm>
#include <cmath>

namespace semchange {

Matrix to_matrix(const EmbeddingMatrix& m) {
    Matrix out(m.rows, m.dim);
    std::copy(m.data.begin(), m.data.end(), out.data.begin());
    return out;
}

Matrix stack_rows(const EmbeddingMatrix& top, const EmbeddingMatrix& bottom) {
    if (top.dim != bottom.dim) {
        throw Error("dimension mismatch between periods");
    }
    Matrix out(top.rows + bottom.rows, top.dim);
    std::copy(top.data.begin(), top.data.end(), out.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(top.data.size()));
    return out;
}

void normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto r = m.row(i);
        const double len = norm(r);
        if (len > 0.0) {
            for (double& x : r) {
                x /= len;
            }
        }
    }
}

Vector mean_vector(const Matrix& matrix) {
    if (matrix.rows == 0) {
        throw Error("no usages");
    }
    Vector mean(matrix.cols, 0.0);
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        const auto r = matrix.row(i);
        for (std::size_t j = 0; j < matrix.cols; ++j) {
            mean[j] += r[j];
        }
    }
    for (double& x : mean) {
        x /= static_cast<double>(matrix.rows);
    }
    return mean;
}

Vector mean_vector(const EmbeddingMatrix& matrix) {
    if (matrix.rows == 0) {
        throw Error("no usages");
    }
    Vector mean(matrix.dim, 0.0);
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        const auto r = matrix.row(i);
        for (std::size_t j = 0; j < matrix.dim; ++j) {
            mean[j] += static_cast<double>(r[j]);
        }
    }
    for (double& x : mean) {
        x /= static_cast<double>(matrix.rows);
    }
    return mean;
}

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw Error("dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += u[i] * v[i];
    }
    return acc;
}

double norm(std::span<const double> u) {
    return std::sqrt(dot(u, u));
}

double squared_distance(std::span<const double> u, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        acc += d * d;
    }
    return acc;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (!(nu > 0.0) || !(nv > 0.0)) {
        throw Error("degenerate prototype");
    }
    const double d = 1.0 - dot(u, v) / (nu * nv);
    return std::clamp(d, 0.0, 2.0);
}

SimilarityMatrix negative_squared_euclidean_similarities(const Matrix& points) {
    SimilarityMatrix sims(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) {
        for (std::size_t j = i + 1; j < points.rows; ++j) {
            const double s = -squared_distance(points.row(i), points.row(j));
            sims(i, j) = s;
            sims(j, i) = s;
        }
    }
    return sims;
}

SimilarityMatrix negative_squared_euclidean_similarities(const EmbeddingMatrix& points) {
    return negative_squared_euclidean_similarities(to_matrix(points));
}

}  // namespace semchange
