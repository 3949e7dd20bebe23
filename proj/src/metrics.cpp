#include "gridpass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

void check_window(const std::vector<double>& t, double t0, double t1) {
  const double eps = 1e-9;
  if (t.empty() || !(t0 < t1) || t0 < t.front() - eps || t1 > t.back() + eps) {
    std::ostringstream os;
    os << "window (" << t0 << ", " << t1 << ") outside trajectory span";
    if (!t.empty()) os << " (" << t.front() << ", " << t.back() << ")";
    fail(ErrorKind::WindowOutOfRange, os.str());
  }
}

}  // namespace

double integrate_window(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1) {
  check_window(t, t0, t1);
  if (y.size() != t.size()) fail(ErrorKind::LengthMismatch, "channel length differs from time base");
  const double eps = 1e-9;
  double s = 0.0;
  for (size_t k = 1; k < t.size(); ++k) {
    if (t[k - 1] < t0 - eps || t[k] > t1 + eps) continue;
    s += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  }
  return s;
}

EnergyReport energy_report(const Trajectory& tr, double t0, double t1) {
  check_window(tr.t, t0, t1);
  EnergyReport r;
  r.t0 = t0;
  r.t1 = t1;
  for (const auto& n : tr.ibr_names) {
    const double E = integrate_window(tr.t, tr[n + ".p"], t0, t1);
    double Ec = 0.0, Ev = 0.0;
    if (tr.has(n + ".pei.P_c")) {
      Ec = integrate_window(tr.t, tr[n + ".pei.P_c"], t0, t1);
      Ev = integrate_window(tr.t, tr[n + ".pei.P_v"], t0, t1);
    }
    r.ibr.push_back(n);
    r.E.push_back(E);
    r.E_c.push_back(Ec);
    r.E_v.push_back(Ev);
    r.ratio.push_back(E != 0.0 ? std::abs((Ec + Ev) / E) : 0.0);
  }
  return r;
}

double tail_mean(const Trajectory& tr, const std::string& channel, double tail, double max_relative_std) {
  const auto& y = tr[channel];
  const double t_from = tr.t.back() - tail;
  double s = 0, s2 = 0;
  int n = 0;
  for (size_t k = 0; k < y.size(); ++k) {
    if (tr.t[k] < t_from) continue;
    s += y[k];
    s2 += y[k] * y[k];
    ++n;
  }
  if (n == 0) fail(ErrorKind::WindowOutOfRange, "empty tail window");
  const double mean = s / n;
  const double sd = std::sqrt(std::max(0.0, s2 / n - mean * mean));
  if (tr.diverged || sd > max_relative_std * std::max(std::abs(mean), 1e-12)) {
    std::ostringstream os;
    os << "'" << channel << "' not settled in the final " << tail << " s (std " << sd << " around " << mean << ")";
    fail(ErrorKind::NotSettled, os.str());
  }
  return mean;
}

std::vector<double> power_sharing_error(const Trajectory& run, const Trajectory& ref, const SharingOptions& o) {
  if (run.ibr_names != ref.ibr_names) fail(ErrorKind::InvalidArgument, "runs describe different inverters");
  std::vector<double> out;
  for (const auto& n : run.ibr_names) {
    // the filtered power state is the droop's own measure of the shared power
    const double p = tail_mean(run, n + ".P", o.tail, o.max_relative_std);
    const double pr = tail_mean(ref, n + ".P", o.tail, o.max_relative_std);
    out.push_back(std::abs(p - pr) / std::abs(pr) * 100.0);
  }
  return out;
}

GrowthResult detect_growth(const std::vector<double>& t, const std::vector<double>& y, double t_start,
                           const GrowthOptions& o) {
  GrowthResult r;
  size_t k0 = 0;
  while (k0 < t.size() && t[k0] < t_start) ++k0;
  if (t.size() - k0 < 3) return r;
  const auto [lo, hi] = std::minmax_element(y.begin() + k0, y.end());
  const double h = o.hysteresis * std::max(*hi - *lo, 1e-12);
  // alternate between searching for a maximum and a minimum
  std::vector<std::pair<double, double>> ext;
  size_t k = k0 + 1;
  while (k < y.size() && std::abs(y[k] - y[k0]) <= h) ++k;
  if (k == y.size()) return r;
  int dir = y[k] > y[k0] ? 1 : -1;
  double best = y[k], best_t = t[k];
  for (; k < y.size(); ++k) {
    if ((dir > 0 && y[k] > best) || (dir < 0 && y[k] < best)) {
      best = y[k];
      best_t = t[k];
    } else if (std::abs(y[k] - best) > h) {
      ext.emplace_back(best_t, best);
      dir = -dir;
      best = y[k];
      best_t = t[k];
    }
  }
  for (size_t k = 1; k < ext.size(); ++k) {
    r.swing_time.push_back(ext[k].first);
    r.swing.push_back(std::abs(ext[k].second - ext[k - 1].second));
  }
  int run = 0;
  for (size_t k = 1; k < r.swing.size(); ++k) {
    run = r.swing[k] > o.ratio * r.swing[k - 1] ? run + 1 : 0;
    if (run >= o.consecutive) {
      r.growing = true;
      r.detected_at = r.swing_time[k];
      break;
    }
  }
  return r;
}

GrowthResult detect_growth(const Trajectory& tr, double t_start, const GrowthOptions& o) {
  GrowthResult best;
  for (const auto& n : tr.ibr_names) {
    GrowthResult g = detect_growth(tr.t, tr[n + ".i_od"], t_start, o);
    if (g.growing && (!best.growing || g.detected_at < best.detected_at)) best = g;
  }
  if (!best.growing && tr.diverged && tr.divergence_time >= t_start) {
    best.growing = true;
    best.detected_at = tr.divergence_time;
  }
  return best;
}

SettlingResult settling_time(const Trajectory& tr, double t_event, double band, double tail) {
  SettlingResult r;
  if (tr.diverged || tr.t.empty()) return r;
  const double t_from = tr.t.back() - tail;
  double last_out = t_event;
  bool tail_ok = true;
  for (const auto& n : tr.ibr_names) {
    const auto& d = tr[n + ".i_od"];
    const auto& q = tr[n + ".i_oq"];
    double fd = 0, fq = 0;
    int cnt = 0;
    for (size_t k = 0; k < d.size(); ++k)
      if (tr.t[k] >= t_from) { fd += d[k]; fq += q[k]; ++cnt; }
    fd /= cnt;
    fq /= cnt;
    const double ref = std::hypot(fd, fq);
    for (size_t k = 0; k < d.size(); ++k) {
      if (tr.t[k] < t_event) continue;
      const double e = std::hypot(d[k] - fd, q[k] - fq) / ref;
      if (e > band) last_out = std::max(last_out, tr.t[k]);
      if (tr.t[k] >= t_from) r.worst = std::max(r.worst, e);
    }
    if (r.worst > band) tail_ok = false;
  }
  r.settled = tail_ok && last_out < t_from;
  r.time = last_out - t_event;
  return r;
}

double peak_phase_current(const Trajectory& tr, const std::string& ibr, double t0, double t1) {
  check_window(tr.t, t0, t1);
  double m = 0.0;
  for (const char* ph : {".i_a", ".i_b", ".i_c"}) {
    const auto& y = tr[ibr + ph];
    for (size_t k = 0; k < y.size(); ++k)
      if (tr.t[k] >= t0 && tr.t[k] <= t1) m = std::max(m, std::abs(y[k]));
  }
  return m;
}

}  // namespace gridpass
