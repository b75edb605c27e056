#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sp360 {

enum class ScheduleKind { Constant, Linear, Quadratic, Cosine };

// Recurrence: n_{k+1} = f(k)·n_k with f(k) = a·k or a²·k.
// Polynomial: n_k ∝ k or k², the arithmetic alternative.
enum class GrowthModel { Recurrence, Polynomial };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);
GrowthModel parse_growth_model(std::string_view text);

struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  std::size_t m = 1;
  std::vector<std::int64_t> counts;
  double growth = 1.0;  // solved a for linear/quadratic, 1 otherwise

  std::int64_t total() const;
  std::string to_json() const;
};

/// Number of updates, ⌈views / m⌉.
std::size_t schedule_steps(std::size_t views, std::size_t m);

/// Splits total iterations over ⌈views/m⌉ updates; the counts sum to total
/// exactly and each is at least 1.
Schedule solve_schedule(std::int64_t total, std::size_t views, std::size_t m, ScheduleKind kind,
                        std::optional<double> n1_hint = std::nullopt,
                        GrowthModel model = GrowthModel::Recurrence);

}  // namespace sp360
