#include "fluidhit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fluidhit::num {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxQrIterations = 60;

bool is_triangular(const DenseMatrix &a) {
    bool upper = true;
    bool lower = true;
    for (std::size_t i = 0; i < a.rows() && (upper || lower); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (a(i, j) == 0.0) {
                continue;
            }
            if (j < i) {
                upper = false;
            } else if (j > i) {
                lower = false;
            }
        }
    }
    return upper || lower;
}

void reduce_to_hessenberg(DenseMatrix &a) {
    const std::size_t n = a.rows();
    std::vector<double> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            norm = std::hypot(norm, a(i, k));
        }
        if (norm == 0.0) {
            continue;
        }
        const double alpha = a(k + 1, k) > 0.0 ? -norm : norm;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = a(i, k);
        }
        v[k + 1] -= alpha;
        double vnorm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            vnorm = std::hypot(vnorm, v[i]);
        }
        if (vnorm == 0.0) {
            continue;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] /= vnorm;
        }
        // A <- H A, H = I - 2 v v^T acting on rows k+1..n-1
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) {
                s += v[i] * a(i, j);
            }
            s *= 2.0;
            for (std::size_t i = k + 1; i < n; ++i) {
                a(i, j) -= s * v[i];
            }
        }
        // A <- A H on columns k+1..n-1
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) {
                s += a(i, j) * v[j];
            }
            s *= 2.0;
            for (std::size_t j = k + 1; j < n; ++j) {
                a(i, j) -= s * v[j];
            }
        }
        a(k + 1, k) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed). Indices
/// below follow the classical 1-based formulation through the accessor h().
std::vector<std::complex<double>> hessenberg_qr(DenseMatrix &a) {
    const int n = static_cast<int>(a.rows());
    auto h = [&a](int i, int j) -> double & { return a(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)); };
    std::vector<double> wr(static_cast<std::size_t>(n) + 1, 0.0), wi(static_cast<std::size_t>(n) + 1, 0.0);
    double anorm = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int j = std::max(i - 1, 1); j <= n; ++j) {
            anorm += std::abs(h(i, j));
        }
    }
    int nn = n;
    double t = 0.0;
    double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
                if (s == 0.0) {
                    s = anorm;
                }
                if (std::abs(h(l, l - 1)) <= kEps * s) {
                    h(l, l - 1) = 0.0;
                    break;
                }
            }
            x = h(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn--] = 0.0;
            } else {
                y = h(nn - 1, nn - 1);
                w = h(nn, nn - 1) * h(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -(wi[nn] = z);
                    }
                    nn -= 2;
                } else {
                    if (its == kMaxQrIterations) {
                        throw NumericsError(NumericsError::Kind::NonConvergent, "QR iteration did not converge");
                    }
                    if (its == 10 || its == 20 || its == 40) {
                        // exceptional shift
                        t += x;
                        for (int i = 1; i <= nn; ++i) {
                            h(i, i) -= x;
                        }
                        s = std::abs(h(nn, nn - 1)) + std::abs(h(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = h(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / h(m + 1, m) + h(m, m + 1);
                        q = h(m + 1, m + 1) - z - r - s;
                        r = h(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) {
                            break;
                        }
                        const double u = std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) + std::abs(h(m + 1, m + 1)));
                        if (u <= kEps * v) {
                            break;
                        }
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        h(i, i - 2) = 0.0;
                        if (i != m + 2) {
                            h(i, i - 3) = 0.0;
                        }
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = h(k, k - 1);
                            q = h(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) {
                                r = h(k + 2, k - 1);
                            }
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = std::copysign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == m) {
                                if (l != m) {
                                    h(k, k - 1) = -h(k, k - 1);
                                }
                            } else {
                                h(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = h(k, j) + q * h(k + 1, j);
                                if (k != nn - 1) {
                                    p += r * h(k + 2, j);
                                    h(k + 2, j) -= p * z;
                                }
                                h(k + 1, j) -= p * y;
                                h(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * h(i, k) + y * h(i, k + 1);
                                if (k != nn - 1) {
                                    p += z * h(i, k + 2);
                                    h(i, k + 2) -= p * r;
                                }
                                h(i, k + 1) -= p * q;
                                h(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    std::vector<std::complex<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        out.emplace_back(wr[static_cast<std::size_t>(i)], wi[static_cast<std::size_t>(i)]);
    }
    return out;
}

} // namespace

std::vector<std::complex<double>> eigenvalues(const DenseMatrix &a) {
    if (!a.square()) {
        throw NumericsError(NumericsError::Kind::Shape, "eigenvalues of a non-square matrix");
    }
    if (a.rows() > kMaxDenseDimension) {
        throw NumericsError(NumericsError::Kind::DimensionTooLarge,
                            "dense eigensolve limited to " + std::to_string(kMaxDenseDimension) +
                                " rows; use dominant_eigen for larger sub-generators");
    }
    if (!a.is_finite()) {
        throw NumericsError(NumericsError::Kind::Shape, "matrix has non-finite entries");
    }
    std::vector<std::complex<double>> values;
    if (is_triangular(a)) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            values.emplace_back(a(i, i), 0.0);
        }
        return values;
    }
    DenseMatrix work = a;
    reduce_to_hessenberg(work);
    return hessenberg_qr(work);
}

EigenReport cluster_eigenvalues(const std::vector<std::complex<double>> &values, double tol) {
    const std::size_t n = values.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(values[i] - values[j]) <= tol) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<std::complex<double>> sums(n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        sums[root] += values[i];
        ++counts[root];
    }
    EigenReport report;
    report.tolerance = tol;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] > 0) {
            report.eigenvalues.push_back({sums[i] / static_cast<double>(counts[i]), counts[i]});
        }
    }
    std::sort(report.eigenvalues.begin(), report.eigenvalues.end(), [](const Eigenvalue &a, const Eigenvalue &b) {
        if (a.value.real() != b.value.real()) {
            return a.value.real() > b.value.real();
        }
        return a.value.imag() < b.value.imag();
    });
    if (!report.eigenvalues.empty()) {
        report.dominant = report.eigenvalues.front();
    }
    return report;
}

EigenReport eigen_spectrum(const DenseMatrix &a, std::optional<double> cluster_tol) {
    const double tol = cluster_tol.value_or(1e-7 * std::max(a.norm_inf(), 1e-300));
    return cluster_eigenvalues(eigenvalues(a), tol);
}

std::vector<std::complex<double>> block_eigenvalues(const SparseMatrix &a) {
    if (a.rows() != a.cols()) {
        throw NumericsError(NumericsError::Kind::Shape, "eigenvalues of a non-square matrix");
    }
    const auto components = strongly_connected_components(a);
    std::vector<std::size_t> local(a.rows());
    std::vector<std::size_t> component_of(a.rows());
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (std::size_t k = 0; k < components[c].size(); ++k) {
            component_of[components[c][k]] = c;
            local[components[c][k]] = k;
        }
    }
    std::vector<std::complex<double>> values;
    values.reserve(a.rows());
    for (std::size_t c = 0; c < components.size(); ++c) {
        const auto &comp = components[c];
        if (comp.size() == 1) {
            values.emplace_back(a.diagonal(comp.front()), 0.0);
            continue;
        }
        if (comp.size() > kMaxDenseDimension) {
            throw NumericsError(NumericsError::Kind::DimensionTooLarge,
                                "strongly connected block of " + std::to_string(comp.size()) +
                                    " states exceeds the dense limit; use dominant_eigen");
        }
        DenseMatrix block(comp.size(), comp.size());
        for (std::size_t k = 0; k < comp.size(); ++k) {
            const auto cols = a.row_cols(comp[k]);
            const auto vals = a.row_values(comp[k]);
            for (std::size_t e = 0; e < cols.size(); ++e) {
                if (component_of[cols[e]] == c) {
                    block(k, local[cols[e]]) = vals[e];
                }
            }
        }
        const auto block_values = eigenvalues(block);
        values.insert(values.end(), block_values.begin(), block_values.end());
    }
    return values;
}

double dominant_eigen(const SparseMatrix &q, PowerIterationOptions options) {
    if (q.rows() != q.cols() || q.rows() == 0) {
        throw NumericsError(NumericsError::Kind::Shape, "dominant_eigen needs a non-empty square matrix");
    }
    const auto components = strongly_connected_components(q);
    std::vector<std::size_t> component_of(q.rows());
    std::vector<std::size_t> local(q.rows());
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (std::size_t k = 0; k < components[c].size(); ++k) {
            component_of[components[c][k]] = c;
            local[components[c][k]] = k;
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < components.size(); ++c) {
        const auto &comp = components[c];
        if (comp.size() == 1) {
            best = std::max(best, q.diagonal(comp.front()));
            continue;
        }
        double max_exit = 0.0;
        for (std::size_t i : comp) {
            max_exit = std::max(max_exit, -q.diagonal(i));
        }
        const double rate = 1.05 * max_exit;
        const std::size_t m = comp.size();
        std::vector<double> v(m, 1.0 / static_cast<double>(m)), w(m);
        double rho = 0.0;
        double residual = std::numeric_limits<double>::infinity();
        bool converged = false;
        std::size_t it = 0;
        for (; it < options.max_iterations; ++it) {
            // w = v (I + Q_B / rate), restricted to the block
            for (std::size_t k = 0; k < m; ++k) {
                w[k] = v[k];
            }
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t i = comp[k];
                const auto cols = q.row_cols(i);
                const auto vals = q.row_values(i);
                for (std::size_t e = 0; e < cols.size(); ++e) {
                    if (component_of[cols[e]] == c) {
                        w[local[cols[e]]] += v[k] * vals[e] / rate;
                    }
                }
            }
            rho = std::accumulate(w.begin(), w.end(), 0.0);
            residual = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                residual += std::abs(w[k] - rho * v[k]);
            }
            for (std::size_t k = 0; k < m; ++k) {
                v[k] = w[k] / rho;
            }
            if (residual <= options.tol * rho) {
                converged = true;
                break;
            }
        }
        const double estimate = rate * (rho - 1.0);
        if (!converged) {
            throw SlowConvergence(estimate, residual, it);
        }
        best = std::max(best, estimate);
    }
    return best;
}

} // namespace fluidhit::num
