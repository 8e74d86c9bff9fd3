#pragma once

#include "semchange/embedding_store.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace semchange {

using Vector = std::vector<double>;

// Row-major double-precision matrix. Storage is float32; arithmetic is not.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

Matrix to_matrix(const EmbeddingMatrix& m);

// Stacks the rows of `top` above the rows of `bottom`.
Matrix stack_rows(const EmbeddingMatrix& top, const EmbeddingMatrix& bottom);

// Scales each row to unit L2 norm; zero rows are left as they are.
void normalize_rows(Matrix& m);

Vector mean_vector(const EmbeddingMatrix& matrix);
Vector mean_vector(const Matrix& matrix);

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> u);
double squared_distance(std::span<const double> u, std::span<const double> v);

// 1 - cos(u, v), clamped to [0, 2]. Throws on a zero-norm argument.
double cosine_distance(std::span<const double> u, std::span<const double> v);

// Dense n x n similarity matrix. The diagonal holds AP preferences once set.
struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> s;

    explicit SimilarityMatrix(std::size_t size = 0) : n(size), s(size * size, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return s[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return s[i * n + j]; }
};

// s(i, j) = -||x_i - x_j||^2 off the diagonal; the diagonal is left at 0.
SimilarityMatrix negative_squared_euclidean_similarities(const Matrix& points);
SimilarityMatrix negative_squared_euclidean_similarities(const EmbeddingMatrix& points);

}  // namespace semchange
