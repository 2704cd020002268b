#include "blin/core.hpp"

#include "blin/error.hpp"
#include "blin/linalg.hpp"

namespace blin {

InfluencePair::InfluencePair(Eigen::MatrixXd a, Eigen::MatrixXd b, double canonical_shift)
    : a_(std::move(a)), b_(std::move(b)), shift_(canonical_shift) {
    if (a_.rows() != a_.cols() || a_.rows() < 1) fail(ErrorCode::shape, "A must be a non-empty square matrix");
    if (b_.rows() != b_.cols() || b_.rows() < 1) fail(ErrorCode::shape, "B must be a non-empty square matrix");
    if (!a_.allFinite() || !b_.allFinite()) fail(ErrorCode::invalid_argument, "influence matrices must be finite");
}

Eigen::MatrixXd InfluencePair::diag_effect() const {
    return a_.diagonal().replicate(1, l()) + b_.diagonal().transpose().replicate(s(), 1);
}

InfluencePair InfluencePair::shifted(double c) const {
    Eigen::MatrixXd a = a_;
    Eigen::MatrixXd b = b_;
    a.diagonal().array() += c;
    b.diagonal().array() -= c;
    return InfluencePair(std::move(a), std::move(b), shift_ + c);
}

InfluencePair canonicalize(const InfluencePair& pair) {
    const double c = 0.5 * (pair.b().diagonal().mean() - pair.a().diagonal().mean());
    if (c == 0.0) return pair;
    return pair.shifted(c);
}

Eigen::VectorXd lag_sum_flat(const TensorSeries& series, int p, Index t) {
    if (p < 1) fail(ErrorCode::invalid_argument, "lag depth must be >= 1");
    if (t < p || t > series.horizon())
        fail(ErrorCode::index, "lag sum of depth " + std::to_string(p) + " undefined at t=" + std::to_string(t) +
                                   "; the earliest legal t is " + std::to_string(p));
    Eigen::VectorXd out = series.slice(t - 1);
    for (int k = 2; k <= p; ++k) out += series.slice(t - k);
    return out;
}

Eigen::MatrixXd lag_sum(const TensorSeries& series, int p, Index t) {
    const Eigen::VectorXd flat = lag_sum_flat(series, p, t);
    const Index rows = series.dims().front();
    return Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, flat.size() / rows);
}

Eigen::MatrixXd blin_mean(const InfluencePair& pair, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    if (x.rows() != pair.s() || z.rows() != pair.s() || x.cols() != pair.l() || z.cols() != pair.l())
        fail(ErrorCode::shape, "regressor dimensions do not match the influence pair");
    Eigen::MatrixXd out = pair.a().transpose() * x;
    out.noalias() += z * pair.b();
    return out;
}

double LaggedFrame::response_energy() const {
    double e = 0.0;
    for (const auto& m : y) e += m.squaredNorm();
    return e;
}

LaggedFrame make_frame(const TensorSeries& series, const LagSpec& lags, Index first) {
    if (series.modes() != 2) fail(ErrorCode::shape, "a bipartite frame needs a two-mode series");
    if (lags.modes() != 2) fail(ErrorCode::invalid_argument, "a bipartite frame needs two lags");
    if (first < 0) first = lags.p();
    if (first < lags.p()) fail(ErrorCode::invalid_argument, "frame start precedes the largest lag");
    if (series.horizon() <= first)
        fail(ErrorCode::insufficient_data, "horizon " + std::to_string(series.horizon()) +
                                               " leaves no usable responses after " + std::to_string(first) +
                                               " initial lags");
    LaggedFrame f;
    f.shared_lags = lags.p_a() == lags.p_b();
    const auto n = static_cast<std::size_t>(series.horizon() - first);
    f.y.reserve(n);
    f.x.reserve(n);
    f.z.reserve(n);
    for (Index t = first; t < series.horizon(); ++t) {
        f.y.emplace_back(series.matrix(t));
        f.x.push_back(lag_sum(series, lags.p_a(), t));
        f.z.push_back(lags.p_b() == lags.p_a() ? f.x.back() : lag_sum(series, lags.p_b(), t));
        f.times.push_back(t);
    }
    return f;
}

LaggedFrame subset(const LaggedFrame& frame, const std::vector<Index>& rows) {
    LaggedFrame out;
    out.shared_lags = frame.shared_lags;
    for (Index r : rows) {
        if (r < 0 || r >= frame.rows()) fail(ErrorCode::index, "frame row out of range");
        const auto i = static_cast<std::size_t>(r);
        out.y.push_back(frame.y[i]);
        out.x.push_back(frame.x[i]);
        out.z.push_back(frame.z[i]);
        out.times.push_back(frame.times[i]);
    }
    return out;
}

DesignSystem build_design(const LaggedFrame& frame, double element_budget) {
    const Index s = frame.s();
    const Index l = frame.l();
    const Index rows = frame.rows() * s * l;
    const Index cols = s * s + l * l;
    if (static_cast<double>(rows) * static_cast<double>(cols) > element_budget)
        fail(ErrorCode::budget_exceeded, "dense design of " + std::to_string(rows) + " x " + std::to_string(cols) +
                                             " exceeds the element budget");
    DesignSystem d;
    d.design = Eigen::MatrixXd::Zero(rows, cols);
    d.response.resize(rows);
    const Eigen::MatrixXd is = Eigen::MatrixXd::Identity(s, s);
    const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(l, l);
    for (Index r = 0; r < frame.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        const Index off = r * s * l;
        d.design.block(off, 0, s * l, s * s) = linalg::kron(frame.x[i].transpose(), is);
        d.design.block(off, s * s, s * l, l * l) = linalg::kron(il, frame.z[i]);
        d.response.segment(off, s * l) = linalg::vec(frame.y[i]);
    }
    return d;
}

DesignSystem build_design(const TensorSeries& series, const LagSpec& lags, double element_budget) {
    return build_design(make_frame(series, lags), element_budget);
}

Eigen::VectorXd pack_theta(const InfluencePair& pair) {
    const Index s = pair.s();
    const Index l = pair.l();
    Eigen::VectorXd theta(s * s + l * l);
    theta.head(s * s) = linalg::vec(pair.a().transpose());
    theta.tail(l * l) = linalg::vec(pair.b());
    return theta;
}

InfluencePair unpack_theta(const Eigen::VectorXd& theta, Index s, Index l) {
    if (theta.size() != s * s + l * l) fail(ErrorCode::shape, "coefficient vector has the wrong length");
    Eigen::MatrixXd at = linalg::unvec(theta.head(s * s), s, s);
    return InfluencePair(at.transpose(), linalg::unvec(theta.tail(l * l), l, l));
}

CompanionSystem companion(const InfluencePair& pair, const LagSpec& lags) {
    const Index s = pair.s();
    const Index l = pair.l();
    const Index n = s * l;
    const Eigen::MatrixXd is = Eigen::MatrixXd::Identity(s, s);
    const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(l, l);
    const Eigen::MatrixXd a_part = linalg::kron(il, pair.a().transpose());
    const Eigen::MatrixXd b_part = linalg::kron(pair.b().transpose(), is);

    CompanionSystem sys;
    sys.theta1 = a_part + b_part;
    if (lags.p_a() > lags.p_b())
        sys.theta2 = a_part;
    else if (lags.p_b() > lags.p_a())
        sys.theta2 = b_part;
    else
        sys.theta2 = Eigen::MatrixXd::Zero(n, n);

    const Index p = lags.p();
    const Index q = lags.q_lag();
    sys.f = Eigen::MatrixXd::Zero(n * p, n * p);
    for (Index k = 0; k < p; ++k) sys.f.block(0, k * n, n, n) = k < q ? sys.theta1 : sys.theta2;
    if (p > 1) sys.f.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    sys.spectral_radius = linalg::spectral_radius(sys.f);
    return sys;
}

bool is_stationary(const CompanionSystem& sys, double margin) {
    if (margin < 0.0) fail(ErrorCode::invalid_argument, "stationarity margin must be >= 0");
    return sys.spectral_radius < 1.0 - margin;
}

}  // namespace blin
