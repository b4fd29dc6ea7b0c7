#include "fluidhit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fluidhit::num {

namespace {

constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();

std::string shape_message(const char *what, std::size_t r, std::size_t c) {
    std::ostringstream os;
    os << what << " (" << r << "x" << c << ")";
    return os.str();
}

} // namespace

SlowConvergence::SlowConvergence(double estimate, double residual, std::size_t iterations)
    : NumericsError(Kind::SlowConvergence,
                    "power iteration did not converge after " + std::to_string(iterations) +
                        " iterations (estimate " + std::to_string(estimate) + ", residual " +
                        std::to_string(residual) + ")"),
      estimate_(estimate), residual_(residual), iterations_(iterations) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>> &rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) {
            throw NumericsError(NumericsError::Kind::Shape, "ragged rows: row " + std::to_string(i) +
                                                                " has " + std::to_string(rows[i].size()) +
                                                                " entries, expected " + std::to_string(c));
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

double DenseMatrix::norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (double v : row(i)) {
            s += std::abs(v);
        }
        best = std::max(best, s);
    }
    return best;
}

bool DenseMatrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> multiply(const DenseMatrix &a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("matrix-vector size mismatch", a.rows(), a.cols()));
    }
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            s += r[j] * x[j];
        }
        y[i] = s;
    }
    return y;
}

DenseMatrix multiply(const DenseMatrix &a, const DenseMatrix &b) {
    if (a.cols() != b.rows()) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("matrix product size mismatch", a.cols(), b.rows()));
    }
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const auto brow = b.row(k);
            auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto &e : entries) {
        if (e.row >= rows || e.col >= cols) {
            throw NumericsError(NumericsError::Kind::Shape, "triplet (" + std::to_string(e.row) + ", " +
                                                                std::to_string(e.col) + ") outside " +
                                                                std::to_string(rows) + "x" + std::to_string(cols));
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet &a, const Triplet &b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(entries.size());
    m.values_.reserve(entries.size());
    std::vector<std::size_t> counts(rows, 0);
    for (std::size_t k = 0; k < entries.size();) {
        const std::size_t r = entries[k].row;
        const std::size_t c = entries[k].col;
        double v = 0.0;
        while (k < entries.size() && entries[k].row == r && entries[k].col == c) {
            v += entries[k].value;
            ++k;
        }
        if (v != 0.0) {
            m.col_idx_.push_back(c);
            m.values_.push_back(v);
            ++counts[r];
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        m.row_ptr_[i + 1] = m.row_ptr_[i] + counts[i];
    }
    return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix &dense) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < dense.rows(); ++i) {
        for (std::size_t j = 0; j < dense.cols(); ++j) {
            if (dense(i, j) != 0.0) {
                t.push_back({i, j, dense(i, j)});
            }
        }
    }
    return from_triplets(dense.rows(), dense.cols(), std::move(t));
}

std::span<const std::size_t> SparseMatrix::row_cols(std::size_t i) const {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

std::span<const double> SparseMatrix::row_values(std::size_t i) const {
    return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

double SparseMatrix::coeff(std::size_t i, std::size_t j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) {
        return 0.0;
    }
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

double SparseMatrix::norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (double v : row_values(i)) {
            s += std::abs(v);
        }
        best = std::max(best, s);
    }
    return best;
}

DenseMatrix SparseMatrix::to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto cols = row_cols(i);
        const auto vals = row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            d(i, cols[k]) = vals[k];
        }
    }
    return d;
}

std::vector<double> SparseMatrix::left_multiply(std::span<const double> v) const {
    std::vector<double> out(cols_, 0.0);
    left_multiply_into(v, out);
    return out;
}

void SparseMatrix::left_multiply_into(std::span<const double> v, std::span<double> out) const {
    if (v.size() != rows_ || out.size() != cols_) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("vector-matrix size mismatch", rows_, cols_));
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double vi = v[i];
        if (vi == 0.0) {
            continue;
        }
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            out[col_idx_[k]] += vi * values_[k];
        }
    }
}

std::vector<double> SparseMatrix::right_multiply(std::span<const double> x) const {
    if (x.size() != cols_) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("matrix-vector size mismatch", rows_, cols_));
    }
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            s += values_[k] * x[col_idx_[k]];
        }
        out[i] = s;
    }
    return out;
}

LuFactorization::LuFactorization(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.square()) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("LU of non-square matrix", lu_.rows(), lu_.cols()));
    }
    const std::size_t n = lu_.rows();
    const double threshold = 1e-14 * lu_.norm_inf();
    for (std::size_t i = 0; i < n; ++i) {
        perm_[i] = i;
    }
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(lu_(i, k)) > best) {
                best = std::abs(lu_(i, k));
                pivot = i;
            }
        }
        if (best <= threshold || best == 0.0) {
            throw NumericsError(NumericsError::Kind::SingularMatrix,
                                "singular matrix: pivot " + std::to_string(best) + " in column " + std::to_string(k));
        }
        if (pivot != k) {
            std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(pivot).begin());
            std::swap(perm_[k], perm_[pivot]);
        }
        const double d = lu_(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu_(i, k) / d;
            lu_(i, k) = f;
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j = k + 1; j < n; ++j) {
                lu_(i, j) -= f * lu_(k, j);
            }
        }
    }
}

std::vector<double> LuFactorization::solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("right-hand side size mismatch", n, b.size()));
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[perm_[i]];
        for (std::size_t j = 0; j < i; ++j) {
            s -= lu_(i, j) * x[j];
        }
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            s -= lu_(i, j) * x[j];
        }
        x[i] = s / lu_(i, i);
    }
    return x;
}

DenseMatrix LuFactorization::inverse() const {
    const std::size_t n = lu_.rows();
    DenseMatrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const auto col = solve(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            inv(i, j) = col[i];
        }
    }
    return inv;
}

std::vector<double> solve_linear(const DenseMatrix &a, std::span<const double> b) {
    return LuFactorization(a).solve(b);
}

std::vector<std::vector<std::size_t>> strongly_connected_components(const SparseMatrix &a) {
    // Iterative Tarjan: the countdown chains have paths as long as the state space.
    const std::size_t n = a.rows();
    std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<std::size_t> stack;
    std::vector<std::pair<std::size_t, std::size_t>> frames; // (node, next edge offset)
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) {
            continue;
        }
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        frames.emplace_back(root, 0);
        while (!frames.empty()) {
            auto &[v, pos] = frames.back();
            const auto cols = a.row_cols(v);
            const auto vals = a.row_values(v);
            if (pos < cols.size()) {
                const std::size_t w = cols[pos];
                const double value = vals[pos];
                ++pos;
                if (w == v || value == 0.0) {
                    continue;
                }
                if (index[w] == kUnvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const std::size_t done = v;
            frames.pop_back();
            if (!frames.empty()) {
                const std::size_t parent = frames.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
            if (low[done] == index[done]) {
                std::vector<std::size_t> comp;
                std::size_t w = 0;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp.push_back(w);
                } while (w != done);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
        }
    }
    return components;
}

BlockTriangularSolver::BlockTriangularSolver(const SparseMatrix &a)
    : a_(a), components_(strongly_connected_components(a)), component_of_(a.rows()), local_index_(a.rows()) {
    if (a.rows() != a.cols()) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("block solve of non-square matrix", a.rows(), a.cols()));
    }
    const double threshold = 1e-14 * std::max(a.norm_inf(), std::numeric_limits<double>::min());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        for (std::size_t k = 0; k < components_[c].size(); ++k) {
            component_of_[components_[c][k]] = c;
            local_index_[components_[c][k]] = k;
        }
    }
    blocks_.resize(components_.size());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const auto &comp = components_[c];
        if (comp.size() == 1) {
            const double d = a.diagonal(comp.front());
            if (std::abs(d) <= threshold) {
                throw NumericsError(NumericsError::Kind::SingularMatrix,
                                    "singular matrix: zero diagonal at " + std::to_string(comp.front()));
            }
            blocks_[c].scalar = d;
            continue;
        }
        if (comp.size() > kMaxDenseDimension) {
            throw NumericsError(NumericsError::Kind::DimensionTooLarge,
                                "strongly connected block of " + std::to_string(comp.size()) +
                                    " states exceeds the dense limit " + std::to_string(kMaxDenseDimension));
        }
        DenseMatrix block(comp.size(), comp.size());
        for (std::size_t k = 0; k < comp.size(); ++k) {
            const auto cols = a.row_cols(comp[k]);
            const auto vals = a.row_values(comp[k]);
            for (std::size_t e = 0; e < cols.size(); ++e) {
                if (component_of_[cols[e]] == c) {
                    block(k, local_index_[cols[e]]) = vals[e];
                }
            }
        }
        blocks_[c].lu.emplace(std::move(block));
    }
}

std::vector<double> BlockTriangularSolver::solve(std::span<const double> b) const {
    if (b.size() != a_.rows()) {
        throw NumericsError(NumericsError::Kind::Shape, shape_message("right-hand side size mismatch", a_.rows(), b.size()));
    }
    std::vector<double> x(a_.rows(), 0.0);
    std::vector<double> rhs;
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const auto &comp = components_[c];
        rhs.assign(comp.size(), 0.0);
        for (std::size_t k = 0; k < comp.size(); ++k) {
            const std::size_t i = comp[k];
            double s = b[i];
            const auto cols = a_.row_cols(i);
            const auto vals = a_.row_values(i);
            for (std::size_t e = 0; e < cols.size(); ++e) {
                if (component_of_[cols[e]] != c) {
                    s -= vals[e] * x[cols[e]];
                }
            }
            rhs[k] = s;
        }
        if (!blocks_[c].lu) {
            x[comp.front()] = rhs.front() / blocks_[c].scalar;
            continue;
        }
        const auto local = blocks_[c].lu->solve(rhs);
        for (std::size_t k = 0; k < comp.size(); ++k) {
            x[comp[k]] = local[k];
        }
    }
    return x;
}

std::vector<double> BlockTriangularSolver::inverse_diagonal() const {
    std::vector<double> d(a_.rows(), 0.0);
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const auto &comp = components_[c];
        if (!blocks_[c].lu) {
            d[comp.front()] = 1.0 / blocks_[c].scalar;
            continue;
        }
        const DenseMatrix inv = blocks_[c].lu->inverse();
        for (std::size_t k = 0; k < comp.size(); ++k) {
            d[comp[k]] = inv(k, k);
        }
    }
    return d;
}

} // namespace fluidhit::num
