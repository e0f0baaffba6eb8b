#pragma once

// Maximum-likelihood fitting of the infection model by iteratively reweighted
// least squares.
//
// The logit is linear in three working coefficients
//   theta = (b0, b1*b2, b3)   over features   (1, rssi*dt_b, dt_c*survival_hours)
// so only the product b1*b2 is identifiable. Fitted parameters use the
// symmetric split |b1| = |b2| = sqrt(|b1*b2|), with the sign carried by b1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epitrace/health.hpp"
#include "epitrace/text.hpp"

namespace epitrace::health {

struct LabeledRow {
  ExposureFeatures x;
  int label = 0;
};

struct LabeledDataset {
  std::vector<LabeledRow> rows;
};

using Working = std::array<double, 3>;

inline Working design_row(const ExposureFeatures& f) {
  return {1.0, f.rssi * f.delta_t_b, f.delta_t_c * beta4(f.ms)};
}

/// Working coefficients in the standard-logit orientation.
inline Working working_from_params(const ModelParams& p) {
  const double s = p.sign == SignConvention::StandardLogit ? 1.0 : -1.0;
  return {s * p.beta0, s * p.beta1 * p.beta2, s * p.beta3};
}

inline ModelParams params_from_working(const Working& theta, SignConvention sign) {
  const double s = sign == SignConvention::StandardLogit ? 1.0 : -1.0;
  const double product = s * theta[1];
  const double root = std::sqrt(std::abs(product));
  ModelParams p;
  p.beta0 = s * theta[0];
  p.beta1 = std::copysign(root, product);
  p.beta2 = root;
  p.beta3 = s * theta[2];
  p.sign = sign;
  return p;
}

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double log_likelihood_working(const LabeledDataset& data, const Working& theta) {
  double ll = 0.0;
  for (const auto& r : data.rows) {
    const auto x = design_row(r.x);
    const double eta = theta[0] * x[0] + theta[1] * x[1] + theta[2] * x[2];
    ll += r.label * eta - softplus(eta);
  }
  return ll;
}

inline void validate_dataset(const LabeledDataset& data) {
  auto bad = [](const std::string& why) { throw HealthError(HealthErrc::InvalidDataset, "health: " + why); };
  if (data.rows.empty()) bad("dataset is empty");
  bool has0 = false, has1 = false;
  for (const auto& r : data.rows) {
    if (r.label != 0 && r.label != 1) bad("labels must be 0 or 1");
    if (!std::isfinite(r.x.rssi) || !std::isfinite(r.x.delta_t_b) || !std::isfinite(r.x.delta_t_c))
      throw HealthError(HealthErrc::NonFiniteInput, "health: non-finite feature in dataset");
    if (r.x.delta_t_b < 0.0 || r.x.delta_t_c < 0.0) bad("durations must be >= 0");
    (r.label ? has1 : has0) = true;
  }
  if (!has0 || !has1) bad("both classes must be present");
}

}  // namespace detail

/// Bernoulli log-likelihood of the dataset under `p`.
inline double log_likelihood(const LabeledDataset& data, const ModelParams& p) {
  return detail::log_likelihood_working(data, working_from_params(p));
}

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 100;
  SignConvention sign = SignConvention::StandardLogit;
};

struct FitResult {
  ModelParams params;
  Working working{};
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
};

inline FitResult fit_irls(const LabeledDataset& data, const FitOptions& opt = {}) {
  detail::validate_dataset(data);
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = data.rows[static_cast<std::size_t>(i)];
    const auto row = design_row(r.x);
    x.row(i) << row[0], row[1], row[2];
    y(i) = r.label;
  }
  // Column scaling keeps the normal equations well conditioned; convergence
  // is still judged on the unscaled coefficients.
  Eigen::Vector3d scale = x.cwiseAbs().colwise().maxCoeff().transpose();
  if ((scale.array() == 0.0).any())
    throw HealthError(HealthErrc::SingularSystem, "health: a design column is identically zero");
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) throw HealthError(HealthErrc::SingularSystem, "health: collinear design columns");
  }

  auto unscale = [&](const Eigen::Vector3d& t) {
    return Working{t(0) / scale(0), t(1) / scale(1), t(2) / scale(2)};
  };

  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  FitResult best;
  best.working = unscale(theta);
  best.log_likelihood = detail::log_likelihood_working(data, best.working);

  for (int it = 1; it <= opt.max_iter; ++it) {
    const Eigen::VectorXd eta = xs * theta;
    const Eigen::VectorXd mu = eta.unaryExpr([](double v) { return logistic(v); });
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    // Weighted normal equations X'WX theta' = X'W z with working response
    // z = eta + (y - mu) / w, expanded to avoid dividing by vanishing weights.
    const Eigen::Matrix3d xtwx = xs.transpose() * w.asDiagonal() * xs;
    const Eigen::Vector3d rhs = xs.transpose() * (w.cwiseProduct(eta) + (y - mu));
    Eigen::LDLT<Eigen::Matrix3d> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::Vector3d next = ldlt.solve(rhs);
    if (!next.allFinite()) break;

    const double step = ((next - theta).cwiseQuotient(scale)).cwiseAbs().maxCoeff();
    theta = next;
    best.iterations = it;
    const auto working = unscale(theta);
    const double ll = detail::log_likelihood_working(data, working);
    if (ll >= best.log_likelihood || !std::isfinite(best.log_likelihood)) {
      best.working = working;
      best.log_likelihood = ll;
    }
    if (step < opt.tol) {
      best.working = working;
      best.log_likelihood = ll;
      best.converged = true;
      break;
    }
  }
  best.params = params_from_working(best.working, opt.sign);
  return best;
}

// ---------------------------------------------------------------------------
// Dataset fixtures: comma-separated, header "rssi,delta_t_b,delta_t_c,ms,label",
// numbers in shortest round-trip form, ms by surface name.

inline constexpr const char* kDatasetHeader = "rssi,delta_t_b,delta_t_c,ms,label";

inline void write_dataset(std::ostream& os, const LabeledDataset& data) {
  os << kDatasetHeader << '\n';
  for (const auto& r : data.rows)
    os << text::format_double(r.x.rssi) << ',' << text::format_double(r.x.delta_t_b) << ','
       << text::format_double(r.x.delta_t_c) << ',' << to_string(r.x.ms) << ',' << r.label << '\n';
}

inline LabeledDataset read_dataset(std::istream& is) {
  auto bad = [](std::size_t line_no, const std::string& why) {
    return HealthError(HealthErrc::InvalidDataset, "dataset line " + std::to_string(line_no) + ": " + why);
  };
  std::string line;
  if (!std::getline(is, line) || text::trim(line) != kDatasetHeader) throw bad(1, "expected header");
  LabeledDataset data;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto cols = text::split(body, ',');
    if (cols.size() != 5) throw bad(line_no, "expected 5 columns");
    const auto rssi = text::parse_double(cols[0]);
    const auto dtb = text::parse_double(cols[1]);
    const auto dtc = text::parse_double(cols[2]);
    const auto ms = parse_surface(cols[3]);
    const auto label = text::parse_int<int>(cols[4]);
    if (!rssi || !dtb || !dtc) throw bad(line_no, "bad number");
    if (!ms) throw bad(line_no, "unknown surface '" + std::string(cols[3]) + "'");
    if (!label || (*label != 0 && *label != 1)) throw bad(line_no, "label must be 0 or 1");
    data.rows.push_back({ExposureFeatures{*rssi, *dtb, *dtc, *ms}, *label});
  }
  return data;
}

/// Rows with rssi ~ U(-90,-40) dBm, dt_b ~ U(1,1800) s, dt_c ~ U(0,600) s,
/// uniform surface, and labels drawn from the model under `truth`.
inline LabeledDataset make_synthetic_dataset(const ModelParams& truth, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rssi(-90.0, -40.0), dtb(1.0, 1800.0), dtc(0.0, 600.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> surface(0, static_cast<int>(kAllSurfaces.size()) - 1);
  LabeledDataset data;
  data.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ExposureFeatures f{rssi(rng), dtb(rng), dtc(rng), kAllSurfaces[static_cast<std::size_t>(surface(rng))]};
    const int label = unit(rng) < infection_probability(f, truth) ? 1 : 0;
    data.rows.push_back({f, label});
  }
  return data;
}

}  // namespace epitrace::health
