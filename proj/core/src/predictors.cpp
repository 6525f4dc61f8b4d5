#include "dpfh/predictors.hpp"

#include <algorithm>
#include <cmath>

#include "dpfh/model.hpp"

namespace dpfh {

double bayes_estimate(const AreaObservation& obs, const ModelParams& params) {
  const double b = params.a + obs.d;
  if (!(b > 0.0)) {
    throw std::domain_error("bayes_estimate: A + D must be > 0");
  }
  if (obs.d == 0.0) {
    return obs.y;
  }
  const double resid = obs.y - params.beta.dot(obs.x);
  return obs.y - (obs.d / b) * resid;
}

double robust_bayes_estimate(const AreaObservation& obs, const ModelParams& params,
                             const Alpha& alpha) {
  const double b = params.a + obs.d;
  if (!(b > 0.0)) {
    throw std::domain_error("robust_bayes_estimate: A + D must be > 0");
  }
  const double resid = obs.y - params.beta.dot(obs.x);
  return obs.y - (obs.d / b) * resid * s_weight(obs, params, alpha);
}

double huber_psi(double u, double k) {
  if (!(k > 0.0)) {
    throw std::domain_error("huber_psi: k must be > 0");
  }
  const double au = std::abs(u);
  return au <= k ? u : (u > 0.0 ? k : -k);
}

GlsSolve gls_fit(const Dataset& data, double a) {
  const int p = data.dim();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (const auto& obs : data.areas()) {
    const double w = 1.0 / (a + obs.d);
    normal.noalias() += w * obs.x * obs.x.transpose();
    rhs.noalias() += w * obs.y * obs.x;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible()) {
    throw SingularDesignError("gls_fit: weighted normal matrix is singular");
  }
  return GlsSolve{lu.solve(rhs), lu.inverse()};
}

double geb_estimate(const Dataset& data, int i, double a, double k) {
  return geb_estimate(data, i, a, k, gls_fit(data, a));
}

double geb_estimate(const Dataset& data, int i, double a, double k, const GlsSolve& gls) {
  const auto& obs = data[i];
  const double b = a + obs.d;
  const double v = b - obs.x.dot(gls.normal_inverse * obs.x);
  if (!(v > 0.0)) {
    throw std::domain_error("geb_estimate: leverage-adjusted variance v_i(A) <= 0");
  }
  const double sv = std::sqrt(v);
  const double resid = obs.y - gls.beta.dot(obs.x);
  return obs.y - (obs.d * sv / b) * huber_psi(resid / sv, k);
}

namespace {

double sreb_lhs(double t, double y, double center, double a, double d, double k) {
  return huber_psi((y - t) / std::sqrt(d), k) / std::sqrt(d) -
         huber_psi((t - center) / std::sqrt(a), k) / std::sqrt(a);
}

}  // namespace

Prediction sreb_predict(const AreaObservation& obs, const ModelParams& params, double k) {
  if (!(params.a > 0.0) || !(obs.d > 0.0)) {
    throw std::domain_error("sreb_estimate: requires A > 0 and D > 0");
  }
  const double center = params.beta.dot(obs.x);
  const double y = obs.y;
  const double delta = k * std::max(std::sqrt(params.a), std::sqrt(obs.d));
  double lo = std::min(y, center) - delta;
  double hi = std::max(y, center) + delta;

  const double f_lo = sreb_lhs(lo, y, center, params.a, obs.d, k);
  const double f_hi = sreb_lhs(hi, y, center, params.a, obs.d, k);

  auto finish = [&](double theta, bool fb) {
    const double resid = y - center;
    const double w = std::abs(resid) > 1e-300 ? (y - theta) / resid
                                              : obs.d / (params.a + obs.d);
    return Prediction{theta, w, fb};
  };

  // LHS is nonincreasing in t; a root requires f(lo) >= 0 >= f(hi).
  if (!(f_lo >= 0.0 && f_hi <= 0.0)) {
    const double clamped = std::clamp(bayes_estimate(obs, params), lo, hi);
    return finish(clamped, true);
  }

  constexpr int kMaxIter = 200;
  const double tol = 1e-13 * std::max(1.0, std::abs(y) + std::abs(center));
  int it = 0;
  for (; it < kMaxIter && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sreb_lhs(mid, y, center, params.a, obs.d, k) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (it >= kMaxIter && hi - lo > 1e6 * tol) {
    throw ConvergenceError("sreb_estimate: bisection did not converge");
  }
  return finish(0.5 * (lo + hi), false);
}

double sreb_estimate(const AreaObservation& obs, const ModelParams& params, double k) {
  return sreb_predict(obs, params, k).theta_hat;
}

std::vector<Prediction> predict_all(const Dataset& data, const ModelParams& params,
                                    const PredictorKind& kind) {
  std::vector<Prediction> out;
  out.reserve(static_cast<size_t>(data.size()));
  using Tag = PredictorKind::Tag;
  std::optional<GlsSolve> gls;
  if (kind.tag == Tag::GEB) {
    gls = gls_fit(data, params.a);
  }
  for (int i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const double b = params.a + obs.d;
    switch (kind.tag) {
      case Tag::EB:
        out.push_back({bayes_estimate(obs, params), obs.d / b, false});
        break;
      case Tag::DPEB: {
        const Alpha al(kind.alpha);
        const double s = s_weight(obs, params, al);
        out.push_back({robust_bayes_estimate(obs, params, al), s * obs.d / b, false});
        break;
      }
      case Tag::GEB: {
        const double theta = geb_estimate(data, i, params.a, kind.huber_k, *gls);
        const double resid = obs.y - gls->beta.dot(obs.x);
        const double w = std::abs(resid) > 1e-300 ? (obs.y - theta) / resid : obs.d / b;
        out.push_back({theta, w, false});
        break;
      }
      case Tag::SREB:
        out.push_back(sreb_predict(obs, params, kind.huber_k));
        break;
    }
  }
  return out;
}

}  // namespace dpfh
