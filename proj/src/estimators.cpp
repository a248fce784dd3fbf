#include "hqm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hqm/errors.hpp"
#include "hqm/lm.hpp"
#include "hqm/rng.hpp"

namespace hqm {

namespace {

// Calls visit(begin, end) for each run of records sharing a trial_id.
template <class F>
void for_each_trial(std::span<const DetectionRecord> records, F visit) {
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i + 1;
    while (j < records.size() && records[j].trial_id == records[i].trial_id) ++j;
    visit(records.subspan(i, j - i));
    i = j;
  }
}

bool any_in(std::span<const DetectionRecord> trial, const WindowSpec& w) {
  return std::any_of(trial.begin(), trial.end(), [&](const DetectionRecord& r) { return w.contains(r); });
}

void require_sorted(std::span<const DetectionRecord> records) {
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].trial_id < records[i - 1].trial_id) throw ParameterError("records must be sorted by trial_id");
}

}  // namespace

void WindowSpec::validate() const {
  if (!(width.value > 0.0) || !width.finite()) throw ParameterError("window width must be > 0");
  if (detectors == 0) throw ParameterError("window covers no detector");
}

WindowSpec WindowSpec::from_gate(const Gate& g) { return {g.detectors, g.center, g.width, g.label}; }

WindowSpec WindowSpec::on(Detector d) const {
  WindowSpec w = *this;
  w.detectors = detector_bit(d);
  w.label = label + ":" + to_string(d);
  return w;
}

CorrelationEstimate g2_from_counts(std::uint64_t n_coinc, std::uint64_t n_a, std::uint64_t n_b,
                                   std::uint64_t n_trials) {
  if (n_trials == 0) throw ParameterError("n_trials must be >= 1");
  if (n_a == 0 || n_b == 0) throw UndefinedEstimate("g2 undefined: a window has no clicks");
  if (n_coinc > std::min(n_a, n_b)) throw ParameterError("coincidences exceed single counts");
  CorrelationEstimate e;
  e.n_coinc = n_coinc;
  e.n_a = n_a;
  e.n_b = n_b;
  e.n_trials = n_trials;
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);
  const double n = static_cast<double>(n_trials);
  if (n_coinc == 0) {
    e.upper_bound = true;
    e.value = 0.0;
    const double bound = n / (na * nb);
    e.std_err = bound * std::sqrt(1.0 + 1.0 / na + 1.0 / nb);
    return e;
  }
  const double nc = static_cast<double>(n_coinc);
  e.value = nc * n / (na * nb);
  e.std_err = e.value * std::sqrt(1.0 / nc + 1.0 / na + 1.0 / nb);
  return e;
}

CorrelationEstimate g2_cross(std::span<const DetectionRecord> records, const WindowSpec& win_a,
                             const WindowSpec& win_b, std::uint64_t n_trials) {
  win_a.validate();
  win_b.validate();
  require_sorted(records);
  CoincidenceCounter counter({{win_a, win_b}});
  for_each_trial(records, [&](std::span<const DetectionRecord> t) { counter.add(t.front().trial_id, t); });
  return g2_from_counts(counter.n_coinc(0), counter.n_a(0), counter.n_b(0), n_trials);
}

CorrelationEstimate g2_auto(std::span<const DetectionRecord> records, const WindowSpec& win, std::uint64_t n_trials) {
  if ((win.detectors & kAntiStokesMask) != kAntiStokesMask)
    throw ParameterError("auto-correlation needs a window on both AS_A and AS_B");
  return g2_cross(records, win.on(Detector::AS_A), win.on(Detector::AS_B), n_trials);
}

CorrelationEstimate g2_auto_heralded(std::span<const DetectionRecord> records, const WindowSpec& herald,
                                     const WindowSpec& win) {
  if ((win.detectors & kAntiStokesMask) != kAntiStokesMask)
    throw ParameterError("auto-correlation needs a window on both AS_A and AS_B");
  herald.validate();
  require_sorted(records);
  const WindowSpec a = win.on(Detector::AS_A);
  const WindowSpec b = win.on(Detector::AS_B);
  std::uint64_t n = 0, na = 0, nb = 0, nc = 0;
  for_each_trial(records, [&](std::span<const DetectionRecord> t) {
    if (!any_in(t, herald)) return;
    ++n;
    const bool ca = any_in(t, a);
    const bool cb = any_in(t, b);
    na += ca;
    nb += cb;
    nc += ca && cb;
  });
  if (n == 0) throw UndefinedEstimate("no heralded trials");
  return g2_from_counts(nc, na, nb, n);
}

CoincidenceCounter::CoincidenceCounter(std::vector<std::pair<WindowSpec, WindowSpec>> pairs)
    : pairs_(std::move(pairs)), counts_(pairs_.size()) {
  for (const auto& [a, b] : pairs_) {
    a.validate();
    b.validate();
  }
}

void CoincidenceCounter::add(std::uint64_t, std::span<const DetectionRecord> records) {
  ++trials_;
  if (records.empty()) return;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const bool a = any_in(records, pairs_[i].first);
    const bool b = any_in(records, pairs_[i].second);
    counts_[i].a += a;
    counts_[i].b += b;
    counts_[i].c += a && b;
  }
}

void CoincidenceCounter::merge(CoincidenceCounter&& other) {
  if (other.pairs_.size() != pairs_.size()) throw ParameterError("merging counters with different windows");
  trials_ += other.trials_;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i].a += other.counts_[i].a;
    counts_[i].b += other.counts_[i].b;
    counts_[i].c += other.counts_[i].c;
  }
}

CorrelationEstimate CoincidenceCounter::estimate(std::size_t i) const {
  return g2_from_counts(counts_.at(i).c, counts_[i].a, counts_[i].b, trials_);
}

CSTestResult cauchy_schwarz(const CorrelationEstimate& g_sas, const CorrelationEstimate& g_ss,
                            const CorrelationEstimate& g_asas) {
  CSTestResult r;
  const double product = g_ss.value * g_asas.value;
  r.excess = g_sas.value * g_sas.value - product;
  r.ratio = product > 0.0 ? g_sas.value * g_sas.value / product : INFINITY;
  const double s1 = 2.0 * g_sas.value * g_sas.std_err;
  const double s2 = g_asas.value * g_ss.std_err;
  const double s3 = g_ss.value * g_asas.std_err;
  const double sigma_excess = std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
  if (sigma_excess > 0.0) {
    r.sigma = r.excess / sigma_excess;
  } else {
    r.sigma = r.excess > 0.0 ? INFINITY : (r.excess < 0.0 ? -INFINITY : 0.0);
  }
  r.violated = r.excess > 0.0;
  return r;
}

bool bell_threshold(const CorrelationEstimate& g) { return g.value > 6.0; }

std::string to_string(LifetimeConvention c) { return c == LifetimeConvention::Peak ? "peak" : "excess"; }

namespace {

struct DecayModel {
  DecayForm form;
  int n_params;

  void eval(const Eigen::VectorXd& x, std::span<const DecaySample> s, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
    const auto m = static_cast<Eigen::Index>(s.size());
    r.resize(m);
    J.resize(m, n_params);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double t = s[static_cast<std::size_t>(i)].t;
      const double w = 1.0 / s[static_cast<std::size_t>(i)].err;
      if (form == DecayForm::RationalQuadratic) {
        const double d = 1.0 + x[0] * t + x[1] * t * t;
        const double f = 1.0 + x[2] / d;
        r[i] = (f - s[static_cast<std::size_t>(i)].g2) * w;
        J(i, 0) = -x[2] * t / (d * d) * w;
        J(i, 1) = -x[2] * t * t / (d * d) * w;
        J(i, 2) = 1.0 / d * w;
      } else {
        const double e = std::exp(-x[1] * t);
        r[i] = (x[0] * e - s[static_cast<std::size_t>(i)].g2) * w;
        J(i, 0) = e * w;
        J(i, 1) = -x[0] * t * e * w;
      }
    }
  }
};

// Weighted linear least squares in the transformed variable, used as the
// first start: 1/(g - 1) is quadratic in t for the rational form and log g
// is linear in t for the exponential.
Eigen::VectorXd linearized_start(std::span<const DecaySample> s, DecayForm form) {
  const int k = form == DecayForm::RationalQuadratic ? 3 : 2;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(s.size()), k);
  Eigen::VectorXd y(static_cast<Eigen::Index>(s.size()));
  Eigen::Index m = 0;
  for (const auto& p : s) {
    double v, w;
    if (form == DecayForm::RationalQuadratic) {
      if (p.g2 - 1.0 <= 0.0) continue;
      v = 1.0 / (p.g2 - 1.0);
      w = (p.g2 - 1.0) * (p.g2 - 1.0) / p.err;  // |dv/dg|^-1 / err
    } else {
      if (p.g2 <= 0.0) continue;
      v = std::log(p.g2);
      w = p.g2 / p.err;
    }
    X(m, 0) = w;
    X(m, 1) = w * p.t;
    if (k == 3) X(m, 2) = w * p.t * p.t;
    y[m] = w * v;
    ++m;
  }
  Eigen::VectorXd out(k);
  if (m < k) {
    out.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  const Eigen::VectorXd c = X.topRows(m).colPivHouseholderQr().solve(y.head(m));
  if (form == DecayForm::RationalQuadratic) {
    const double C = 1.0 / c[0];
    out << c[1] * C, c[2] * C, C;
  } else {
    out << std::exp(c[0]), -c[1];
  }
  return out;
}

}  // namespace

DecayFitResult fit_decay(std::span<const DecaySample> samples, DecayForm form, std::uint64_t seed) {
  const int k = form == DecayForm::RationalQuadratic ? 3 : 2;
  const std::size_t min_points = form == DecayForm::RationalQuadratic ? 4 : 2;
  if (samples.size() < min_points) {
    throw ParameterError("fit_decay needs at least " + std::to_string(min_points) + " points for " + to_string(form) +
                         ", got " + std::to_string(samples.size()));
  }
  double t_max = 0.0, y_max = 0.0;
  for (const auto& p : samples) {
    if (!(p.err > 0.0) || !std::isfinite(p.err)) throw ParameterError("fit_decay needs positive finite errors");
    if (!std::isfinite(p.t) || !std::isfinite(p.g2) || p.t < 0.0) throw ParameterError("fit_decay needs finite samples with t >= 0");
    t_max = std::max(t_max, p.t);
    y_max = std::max(y_max, p.g2);
  }
  t_max = std::max(t_max, 1.0);

  const DecayModel model{form, k};
  const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    model.eval(x, samples, r, J);
  };
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());

  RngStream rng(seed, 0x6669745f6465636bULL);
  auto log_uniform = [&](double centre, double decades) { return centre * std::pow(10.0, decades * (2.0 * rng.uniform() - 1.0)); };

  constexpr int kStarts = 16;
  std::vector<Eigen::VectorXd> starts;
  const Eigen::VectorXd lin = linearized_start(samples, form);
  if (lin.allFinite()) starts.push_back(lin.cwiseMax(lower));
  while (static_cast<int>(starts.size()) < kStarts) {
    Eigen::VectorXd x(k);
    if (form == DecayForm::RationalQuadratic) {
      x << log_uniform(1.0 / t_max, 2.0), log_uniform(1.0 / (t_max * t_max), 2.0),
          log_uniform(std::max(y_max - 1.0, 1e-3), 0.5);
    } else {
      x << log_uniform(std::max(y_max, 1e-3), 0.5), log_uniform(1.0 / t_max, 2.0);
    }
    starts.push_back(x);
  }

  DecayFitResult best;
  best.starts = kStarts;
  LmResult best_lm;
  bool have = false;
  std::ostringstream diag;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const LmResult lm = levenberg_marquardt(f, starts[i], lower, upper);
    diag << "\n  start " << i << ": chi2 = " << lm.chi2 << ", " << lm.message << " after " << lm.iterations
         << " iterations";
    if (!lm.converged || !std::isfinite(lm.chi2)) continue;
    ++best.converged_starts;
    if (!have || lm.chi2 < best_lm.chi2) {
      best_lm = lm;
      have = true;
    }
  }
  if (!have) throw FitFailure("no Levenberg-Marquardt start converged for " + to_string(form) + diag.str());

  best.params.form = form;
  best.params.a = best_lm.x[0];
  best.params.b = best_lm.x[1];
  best.params.c = k == 3 ? best_lm.x[2] : 0.0;
  best.chi2 = best_lm.chi2;
  best.dof = static_cast<int>(samples.size()) - k;
  best.reduced_chi2 = best.dof > 0 ? best.chi2 / best.dof : std::numeric_limits<double>::quiet_NaN();

  // Invert in scaled coordinates; the raw J^T J spans many decades.
  const Eigen::VectorXd scale = best_lm.jtj.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = scale.asDiagonal() * best_lm.jtj * scale.asDiagonal();
  const Eigen::MatrixXd cov = scale.asDiagonal() * scaled.completeOrthogonalDecomposition().pseudoInverse() *
                              scale.asDiagonal();
  best.covariance.assign(k, std::vector<double>(k));
  best.std_errors.resize(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) best.covariance[i][j] = cov(i, j);
    best.std_errors[i] = std::sqrt(std::max(cov(i, i), 0.0));
  }
  return best;
}

TimeNs lifetime_1e(const DecayFitParams& params, LifetimeConvention convention, TimeNs t_max) {
  const double peak = g2_decay_model(TimeNs{0.0}, params);
  const double target =
      convention == LifetimeConvention::Peak ? peak / std::numbers::e : 1.0 + (peak - 1.0) / std::numbers::e;
  auto below = [&](double t) { return g2_decay_model(TimeNs{t}, params) <= target; };
  if (below(0.0)) throw NoCrossingError("curve starts at or below its 1/e target");

  double hi = 1.0;
  while (!below(hi)) {
    hi *= 2.0;
    if (hi > t_max.value) {
      std::ostringstream msg;
      msg << "curve does not reach " << target << " (" << to_string(convention) << " convention) before "
          << t_max.value << " ns";
      throw NoCrossingError(msg.str());
    }
  }
  double lo = hi / 2.0 < 1.0 ? 0.0 : hi / 2.0;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) ? hi : lo) = mid;
  }
  return TimeNs{0.5 * (lo + hi)};
}

PulseFit pulse_duration_fit(const Histogram& h) {
  if (h.counts.size() < 5) throw ParameterError("pulse fit needs at least 5 bins");
  if (!(h.bin_width > 0.0)) throw ParameterError("bin width must be > 0");
  PulseFit out;
  const auto n = h.counts.size();
  const auto peak_it = std::max_element(h.counts.begin(), h.counts.end());
  const double peak = *peak_it;
  if (!(peak > 0.0)) throw ParameterError("histogram is empty");

  std::size_t occupied = 0;
  for (double c : h.counts) occupied += c > 0.0;
  const auto ipeak = static_cast<std::size_t>(peak_it - h.counts.begin());
  if (occupied == 1) {
    out.upper_bound = true;
    out.fwhm = TimeNs{h.bin_width};
    out.center = TimeNs{h.center(ipeak)};
    out.amplitude = peak;
    return out;
  }

  int maxima = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? h.counts[i - 1] : 0.0;
    const double right = i + 1 < n ? h.counts[i + 1] : 0.0;
    if (h.counts[i] >= 0.5 * peak && h.counts[i] > left && h.counts[i] >= right) ++maxima;
  }
  out.multi_peak = maxima > 1;

  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s0 += h.counts[i];
    s1 += h.counts[i] * h.center(i);
  }
  const double mean = s1 / s0;
  for (std::size_t i = 0; i < n; ++i) s2 += h.counts[i] * (h.center(i) - mean) * (h.center(i) - mean);
  const double sd = std::max(std::sqrt(s2 / s0), h.bin_width / 2.0);

  const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    r.resize(static_cast<Eigen::Index>(n));
    J.resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double t = h.center(i);
      const double w = 1.0 / std::sqrt(std::max(h.counts[i], 1.0));
      const double u = (t - x[1]) / x[2];
      const double e = std::exp(-0.5 * u * u);
      r[ii] = (x[0] * e - h.counts[i]) * w;
      J(ii, 0) = e * w;
      J(ii, 1) = x[0] * e * u / x[2] * w;
      J(ii, 2) = x[0] * e * u * u / x[2] * w;
    }
  };
  Eigen::VectorXd x0(3);
  x0 << peak, mean, sd;
  Eigen::VectorXd lo(3), hi(3);
  lo << 0.0, h.start, h.bin_width * 1e-3;
  hi << INFINITY, h.start + h.bin_width * static_cast<double>(n), h.bin_width * static_cast<double>(n);
  const LmResult lm = levenberg_marquardt(f, x0, lo, hi);
  if (!lm.converged) throw FitFailure("pulse fit did not converge: " + lm.message);
  out.amplitude = lm.x[0];
  out.center = TimeNs{lm.x[1]};
  out.fwhm = TimeNs{2.0 * std::sqrt(2.0 * std::numbers::ln2) * lm.x[2]};
  return out;
}

double bandwidth_deconvolve(double scan_fwhm_mhz, double cavity_fwhm_mhz) {
  if (!(cavity_fwhm_mhz > 0.0) || !(scan_fwhm_mhz > cavity_fwhm_mhz)) {
    std::ostringstream msg;
    msg << "scan width " << scan_fwhm_mhz << " MHz must exceed the cavity width " << cavity_fwhm_mhz << " MHz > 0";
    throw UnphysicalInput(msg.str());
  }
  return std::sqrt(scan_fwhm_mhz * scan_fwhm_mhz - cavity_fwhm_mhz * cavity_fwhm_mhz);
}

}  // namespace hqm
