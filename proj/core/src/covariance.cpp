#include "kalfuse/covariance.hpp"

#include <algorithm>
#include <cmath>

namespace kalfuse {

CovarianceKind parse_covariance_kind(const std::string& name) {
    if (name == "diag") return CovarianceKind::Diagonal;
    if (name == "pixel") return CovarianceKind::PerHrPixel;
    if (name == "coarse") return CovarianceKind::PerCoarsePixel;
    if (name == "dense") return CovarianceKind::Dense;
    throw ConfigError("unknown covariance structure '" + name +
                      "' (expected diag|pixel|coarse|dense)");
}

std::string to_string(CovarianceKind kind) {
    switch (kind) {
        case CovarianceKind::Diagonal: return "diag";
        case CovarianceKind::PerHrPixel: return "pixel";
        case CovarianceKind::PerCoarsePixel: return "coarse";
        case CovarianceKind::Dense: return "dense";
    }
    return "?";
}

int block_dim_for(CovarianceKind kind, const StateOrdering& ordering) {
    switch (kind) {
        case CovarianceKind::Diagonal: return 1;
        case CovarianceKind::PerHrPixel: return ordering.bands();
        case CovarianceKind::PerCoarsePixel: return ordering.coarse_run_length();
        case CovarianceKind::Dense:
            if (ordering.state_size() > kDenseStateCap)
                throw ConfigError("dense covariance is capped at " +
                                  std::to_string(kDenseStateCap) + " state entries, got " +
                                  std::to_string(ordering.state_size()));
            return ordering.state_size();
    }
    throw ConfigError("invalid covariance kind");
}

BlockDiagCovariance::BlockDiagCovariance(int dim, int block_dim)
    : dim_(dim), block_dim_(block_dim) {
    if (dim <= 0 || block_dim <= 0 || dim % block_dim != 0)
        throw DimensionError("block size " + std::to_string(block_dim) +
                             " does not partition state size " + std::to_string(dim));
    data_ = Eigen::VectorXd::Zero(std::ptrdiff_t(groups()) * block_dim_ * block_dim_);
}

BlockDiagCovariance BlockDiagCovariance::scaled_identity(int dim, int block_dim, double scale) {
    BlockDiagCovariance cov(dim, block_dim);
    for (int g = 0; g < cov.groups(); ++g)
        cov.block(g) = scale * Eigen::MatrixXd::Identity(block_dim, block_dim);
    return cov;
}

Eigen::VectorXd BlockDiagCovariance::diagonal() const {
    Eigen::VectorXd d(dim_);
    for (int g = 0; g < groups(); ++g)
        d.segment(Eigen::Index(g) * block_dim_, block_dim_) = block(g).diagonal();
    return d;
}

void BlockDiagCovariance::add_diagonal(const Eigen::VectorXd& q) {
    if (q.size() != dim_) throw DimensionError("diagonal length does not match covariance");
    for (int g = 0; g < groups(); ++g)
        block(g).diagonal() += q.segment(Eigen::Index(g) * block_dim_, block_dim_);
}

Eigen::MatrixXd BlockDiagCovariance::sub_block(int start, int len) const {
    if (start < 0 || len <= 0 || start + len > dim_)
        throw DimensionError("sub-block outside covariance");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(len, len);
    if (len <= block_dim_) {
        // Slice of a single group; must not straddle a boundary.
        const int g = start / block_dim_;
        const int off = start - g * block_dim_;
        if (off + len > block_dim_)
            throw DimensionError("sub-block straddles a group boundary");
        out = block(g).block(off, off, len, len);
        return out;
    }
    if (start % block_dim_ != 0 || len % block_dim_ != 0)
        throw DimensionError("sub-block is not group-aligned");
    const int g0 = start / block_dim_;
    for (int k = 0; k < len / block_dim_; ++k)
        out.block(Eigen::Index(k) * block_dim_, Eigen::Index(k) * block_dim_, block_dim_,
                  block_dim_) = block(g0 + k);
    return out;
}

void BlockDiagCovariance::symmetrize() {
    for (int g = 0; g < groups(); ++g) {
        auto b = block(g);
        b = ((b + b.transpose()) * 0.5).eval();
    }
}

Eigen::MatrixXd BlockDiagCovariance::to_dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int g = 0; g < groups(); ++g)
        out.block(Eigen::Index(g) * block_dim_, Eigen::Index(g) * block_dim_, block_dim_,
                  block_dim_) = block(g);
    return out;
}

double BlockDiagCovariance::max_asymmetry() const {
    double worst = 0.0;
    for (int g = 0; g < groups(); ++g) {
        const Eigen::MatrixXd b = block(g);
        worst = std::max(worst, (b - b.transpose()).cwiseAbs().maxCoeff());
    }
    return worst;
}

double BlockDiagCovariance::min_eigenvalue() const {
    double lo = std::numeric_limits<double>::infinity();
    for (int g = 0; g < groups(); ++g) {
        const Eigen::MatrixXd b = block(g);
        if (block_dim_ == 1) {
            lo = std::min(lo, b(0, 0));
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(((b + b.transpose()) * 0.5).eval(),
                                                          Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
}

}  // namespace kalfuse
