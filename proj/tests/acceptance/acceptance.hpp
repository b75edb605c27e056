#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace sp360::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::vector<Criterion> geometry_criteria();
std::vector<Criterion> render_criteria();
std::vector<Criterion> pipeline_criteria();

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 3);

}  // namespace sp360::acceptance
