#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidhit::num {

class NumericsError : public std::runtime_error {
  public:
    enum class Kind { Shape, SingularMatrix, NonConvergent, DimensionTooLarge, SlowConvergence };

    NumericsError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

/// Power iteration hit its iteration cap; carries the last estimate.
class SlowConvergence : public NumericsError {
  public:
    SlowConvergence(double estimate, double residual, std::size_t iterations);

    double estimate() const noexcept { return estimate_; }
    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

  private:
    double estimate_;
    double residual_;
    std::size_t iterations_;
};

inline constexpr std::size_t kMaxDenseDimension = 2000;

class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(const std::vector<std::vector<double>> &rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    const std::vector<double> &data() const noexcept { return data_; }

    /// Maximum absolute row sum.
    double norm_inf() const;
    bool is_finite() const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::vector<double> multiply(const DenseMatrix &a, std::span<const double> x);
DenseMatrix multiply(const DenseMatrix &a, const DenseMatrix &b);

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Compressed sparse rows; column indices sorted within each row, no duplicates.
class SparseMatrix {
  public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols);

    /// Duplicate (row, col) entries are summed. Exact zeros are kept out.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
    static SparseMatrix from_dense(const DenseMatrix &dense);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_cols(std::size_t i) const;
    std::span<const double> row_values(std::size_t i) const;

    /// Zero when the entry is not stored.
    double coeff(std::size_t i, std::size_t j) const;
    double diagonal(std::size_t i) const { return coeff(i, i); }
    double norm_inf() const;

    DenseMatrix to_dense() const;

    /// Row vector times matrix: (vA)_j = sum_i v_i A_ij.
    std::vector<double> left_multiply(std::span<const double> v) const;
    void left_multiply_into(std::span<const double> v, std::span<double> out) const;
    /// Matrix times column vector.
    std::vector<double> right_multiply(std::span<const double> x) const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// LU factorization with partial pivoting.
class LuFactorization {
  public:
    /// Throws SingularMatrix when a pivot falls below 1e-14 * ||A||_inf.
    explicit LuFactorization(DenseMatrix a);

    std::size_t size() const noexcept { return lu_.rows(); }
    std::vector<double> solve(std::span<const double> b) const;
    DenseMatrix inverse() const;

  private:
    DenseMatrix lu_;
    std::vector<std::size_t> perm_;
};

std::vector<double> solve_linear(const DenseMatrix &a, std::span<const double> b);

/// Strongly connected components of the off-diagonal support graph of a square
/// matrix (edge i -> j when A_ij != 0, i != j). Components come out in reverse
/// topological order: every edge leaving a component points into one listed
/// earlier.
std::vector<std::vector<std::size_t>> strongly_connected_components(const SparseMatrix &a);

/// Solves A x = b by back-substitution over the strongly connected components of
/// A, with a dense LU per diagonal block. Exact fill-free path for acyclic
/// structure; each block is limited to kMaxDenseDimension.
class BlockTriangularSolver {
  public:
    explicit BlockTriangularSolver(const SparseMatrix &a);

    std::vector<double> solve(std::span<const double> b) const;
    /// Diagonal of A^{-1}; equals the diagonals of the inverted diagonal blocks.
    std::vector<double> inverse_diagonal() const;

    const std::vector<std::vector<std::size_t>> &components() const noexcept { return components_; }

  private:
    struct Block {
        std::optional<LuFactorization> lu; // absent for 1x1 blocks
        double scalar = 0.0;
    };

    SparseMatrix a_;
    std::vector<std::vector<std::size_t>> components_;
    std::vector<std::size_t> component_of_;
    std::vector<std::size_t> local_index_;
    std::vector<Block> blocks_;
};

/// Uniformized form of a sub-generator: M = I + Q / rate with rate = 1.05 max(-Q_ii).
struct Uniformized {
    SparseMatrix transition; // nonnegative, substochastic
    double rate = 1.0;
};

/// Throws Shape unless Q is square with nonpositive diagonal and nonnegative off-diagonal.
Uniformized uniformize(const SparseMatrix &q);

inline constexpr double kDefaultExpmTolerance = 1e-14;

/// v exp(Qt) by uniformization, for a nonnegative row vector v.
/// Truncation is relative: stops once the remaining Poisson mass times the
/// current mass is below tol times the accumulated result. Throws
/// NonConvergent if tol < 1e-15.
std::vector<double> expm_action(const SparseMatrix &q, std::span<const double> v, double t,
                                double tol = kDefaultExpmTolerance);

/// t -> v exp(Qt) 1 for repeated evaluation. The masses v M^n 1 do not depend on
/// t, so they are computed once and cached; only the Poisson weights change.
/// Not safe for concurrent use (the cache grows on demand).
class UniformizedSurvival {
  public:
    UniformizedSurvival(const SparseMatrix &q, std::vector<double> v, double tol = kDefaultExpmTolerance);

    double operator()(double t);
    double rate() const noexcept { return uni_.rate; }

  private:
    double mass(std::size_t n);

    Uniformized uni_;
    std::vector<double> current_;
    std::vector<double> scratch_;
    std::vector<double> masses_;
    double tol_;
};

struct Eigenvalue {
    std::complex<double> value;
    std::size_t multiplicity = 1;
};

struct EigenReport {
    /// Sorted by decreasing real part.
    std::vector<Eigenvalue> eigenvalues;
    Eigenvalue dominant;
    double tolerance = 0.0;
};

/// All eigenvalues of a square dense matrix: Householder reduction to Hessenberg
/// form followed by Francis double-shift QR. Triangular input returns its
/// diagonal. Throws DimensionTooLarge above kMaxDenseDimension.
std::vector<std::complex<double>> eigenvalues(const DenseMatrix &a);

/// Merges values closer than tol (transitively) and sums multiplicities.
EigenReport cluster_eigenvalues(const std::vector<std::complex<double>> &values, double tol);

/// eigenvalues() + clustering; default tolerance 1e-7 * ||A||_inf.
EigenReport eigen_spectrum(const DenseMatrix &a, std::optional<double> cluster_tol = std::nullopt);

/// Eigenvalues of a square sparse matrix gathered from the diagonal blocks of
/// its strongly connected components. Singleton blocks contribute their diagonal
/// exactly; each larger block is solved densely (limited to kMaxDenseDimension).
std::vector<std::complex<double>> block_eigenvalues(const SparseMatrix &a);

struct PowerIterationOptions {
    double tol = 1e-12;
    std::size_t max_iterations = 2'000'000;
};

/// Eigenvalue of greatest real part of a sub-generator. Each strongly connected
/// block is handled separately: singleton blocks contribute their diagonal, larger
/// blocks the Perron root of I + Q_B / rate found by power iteration.
double dominant_eigen(const SparseMatrix &q, PowerIterationOptions options = {});

} // namespace fluidhit::num
