#pragma once

#include <string>

#include <Eigen/Dense>

#include "kalfuse/errors.hpp"
#include "kalfuse/ordering.hpp"

namespace kalfuse {

/// Independence structure of the state covariance. Groups are contiguous
/// runs of equal size under the ι-ordering.
enum class CovarianceKind {
    Diagonal,        // one entry per group
    PerHrPixel,      // all bands of one HR pixel per group
    PerCoarsePixel,  // all HR pixels inside one coarse pixel per group
    Dense,           // single group; reference/oracle use only
};

CovarianceKind parse_covariance_kind(const std::string& name);
std::string to_string(CovarianceKind kind);

/// Upper bound on the state size the Dense kind accepts.
inline constexpr int kDenseStateCap = 4096;

/// Group size in state entries for a kind, given the grid. Throws ConfigError
/// for Dense beyond kDenseStateCap.
int block_dim_for(CovarianceKind kind, const StateOrdering& ordering);

/// Block-diagonal symmetric matrix with uniformly sized blocks, stored as one
/// flat buffer of column-major blocks.
class BlockDiagCovariance {
public:
    BlockDiagCovariance() = default;
    BlockDiagCovariance(int dim, int block_dim);  // zero-initialized

    static BlockDiagCovariance scaled_identity(int dim, int block_dim, double scale);

    int dim() const { return dim_; }
    int block_dim() const { return block_dim_; }
    int groups() const { return block_dim_ == 0 ? 0 : dim_ / block_dim_; }

    Eigen::Map<Eigen::MatrixXd> block(int g) {
        return {data_.data() + std::ptrdiff_t(g) * block_dim_ * block_dim_, block_dim_, block_dim_};
    }
    Eigen::Map<const Eigen::MatrixXd> block(int g) const {
        return {data_.data() + std::ptrdiff_t(g) * block_dim_ * block_dim_, block_dim_, block_dim_};
    }

    Eigen::VectorXd diagonal() const;
    /// P += diag(q); q must have length dim().
    void add_diagonal(const Eigen::VectorXd& q);
    /// Extracts the square sub-block covering state rows/cols
    /// [start, start+len); exact because the range touches whole groups or a
    /// slice of a single group.
    Eigen::MatrixXd sub_block(int start, int len) const;
    void symmetrize();

    Eigen::MatrixXd to_dense() const;

    /// Largest |P - Pᵀ| entry over all blocks.
    double max_asymmetry() const;
    /// Smallest eigenvalue over all blocks (symmetric part).
    double min_eigenvalue() const;

private:
    int dim_ = 0;
    int block_dim_ = 0;
    Eigen::VectorXd data_;
};

}  // namespace kalfuse
