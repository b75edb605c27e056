#include "sp360/schedule.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "sp360/error.hpp"

namespace sp360 {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Quadratic: return "quadratic";
    case ScheduleKind::Cosine: return "cosine";
  }
  return "constant";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "constant") return ScheduleKind::Constant;
  if (text == "linear") return ScheduleKind::Linear;
  if (text == "quadratic") return ScheduleKind::Quadratic;
  if (text == "cosine") return ScheduleKind::Cosine;
  throw Error(ErrorCode::InvalidConfig, "unknown schedule kind '" + std::string(text) + "'");
}

GrowthModel parse_growth_model(std::string_view text) {
  if (text == "recurrence") return GrowthModel::Recurrence;
  if (text == "polynomial") return GrowthModel::Polynomial;
  throw Error(ErrorCode::InvalidConfig, "unknown growth model '" + std::string(text) + "'");
}

std::int64_t Schedule::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

std::string Schedule::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(kind));
  j["m"] = m;
  j["steps"] = counts.size();
  j["growth"] = growth;
  j["total"] = total();
  j["counts"] = counts;
  return j.dump(2);
}

std::size_t schedule_steps(std::size_t views, std::size_t m) {
  if (m == 0) throw Error(ErrorCode::InvalidConfig, "m must be at least 1");
  return (views + m - 1) / m;
}

namespace {

// Floors real-valued counts, lifts zeros to 1 and moves the residual to the
// last entry. If the lifts overshoot, the largest entries give back.
std::vector<std::int64_t> finalize(const std::vector<double>& raw, std::int64_t total) {
  std::vector<std::int64_t> counts(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    counts[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(raw[k])));
  }
  std::int64_t sum = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  if (sum <= total) {
    counts.back() += total - sum;
    return counts;
  }
  while (sum > total) {
    auto it = std::max_element(counts.rbegin(), counts.rend());
    --*it;
    --sum;
  }
  return counts;
}

std::vector<double> recurrence(double n1, double a, bool quadratic, std::size_t steps) {
  std::vector<double> n(steps);
  n[0] = n1;
  const double base = quadratic ? a * a : a;
  for (std::size_t k = 1; k < steps; ++k) n[k] = base * static_cast<double>(k) * n[k - 1];
  return n;
}

std::int64_t floored_sum(const std::vector<double>& n) {
  std::int64_t s = 0;
  for (double v : n) {
    if (!std::isfinite(v) || v > 1e18) return std::numeric_limits<std::int64_t>::max();
    s += std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(v)));
  }
  return s;
}

}  // namespace

Schedule solve_schedule(std::int64_t total, std::size_t views, std::size_t m, ScheduleKind kind,
                        std::optional<double> n1_hint, GrowthModel model) {
  const std::size_t steps = schedule_steps(views, m);
  if (steps == 0) throw Error(ErrorCode::InvalidConfig, "no views to schedule");
  if (total < static_cast<std::int64_t>(steps)) {
    throw Error(ErrorCode::BudgetTooSmall, std::to_string(total) + " iterations cannot cover " +
                                               std::to_string(steps) + " updates");
  }
  Schedule s;
  s.kind = kind;
  s.m = m;
  const double t = static_cast<double>(total);
  const double k_steps = static_cast<double>(steps);

  if (steps == 1) {
    s.counts = {total};
    return s;
  }

  std::vector<double> raw(steps);
  switch (kind) {
    case ScheduleKind::Constant:
      std::fill(raw.begin(), raw.end(), std::floor(t / k_steps));
      break;
    case ScheduleKind::Cosine: {
      double sum = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        raw[k] = 1.0 - std::cos(std::numbers::pi * static_cast<double>(k + 1) / k_steps);
        sum += raw[k];
      }
      for (auto& v : raw) v *= t / sum;
      break;
    }
    case ScheduleKind::Linear:
    case ScheduleKind::Quadratic: {
      const bool quadratic = kind == ScheduleKind::Quadratic;
      if (model == GrowthModel::Polynomial) {
        double sum = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
          const double kk = static_cast<double>(k + 1);
          raw[k] = quadratic ? kk * kk : kk;
          sum += raw[k];
        }
        s.growth = t / sum;
        for (auto& v : raw) v *= s.growth;
        break;
      }
      const double n1 = std::clamp(n1_hint.value_or(t / (2.0 * k_steps)), 0.0, t - (k_steps - 1.0));
      double lo = 0.0, hi = 1.0;
      while (floored_sum(recurrence(n1, hi, quadratic, steps)) <= total && hi < 1e12) hi *= 2.0;
      for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (floored_sum(recurrence(n1, mid, quadratic, steps)) <= total) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      s.growth = lo;
      raw = recurrence(n1, lo, quadratic, steps);
      break;
    }
  }
  s.counts = finalize(raw, total);
  return s;
}

}  // namespace sp360
