#include "carbcal/calcurve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "carbcal/error.hpp"
#include "text_util.hpp"

namespace carbcal {

CalibrationCurve::CalibrationCurve(std::vector<double> cal_age, std::vector<double> c14_mean,
                                   std::vector<double> c14_sd)
    : cal_age_(std::move(cal_age)), c14_mean_(std::move(c14_mean)), c14_sd_(std::move(c14_sd)) {
  if (cal_age_.size() != c14_mean_.size() || cal_age_.size() != c14_sd_.size())
    throw DataError("calibration curve columns have unequal lengths");
  if (cal_age_.size() < 2) throw DataError("calibration curve needs at least two knots");

  if (cal_age_.front() > cal_age_.back()) {
    std::ranges::reverse(cal_age_);
    std::ranges::reverse(c14_mean_);
    std::ranges::reverse(c14_sd_);
  }
  for (std::size_t k = 0; k < cal_age_.size(); ++k) {
    if (!std::isfinite(cal_age_[k]) || !std::isfinite(c14_mean_[k]) || !std::isfinite(c14_sd_[k]))
      throw DataError("calibration curve knot " + std::to_string(k) + " is not finite");
    if (c14_sd_[k] <= 0.0)
      throw DataError("calibration curve knot at " + format_number(cal_age_[k]) +
                      " cal BP has non-positive sd");
    if (k > 0 && cal_age_[k] <= cal_age_[k - 1])
      throw DataError("calibration curve ages not strictly monotone at " +
                      format_number(cal_age_[k]) + " cal BP");
  }
}

CurvePoint CalibrationCurve::at(double theta) const {
  if (!(theta >= min_age() && theta <= max_age()))
    throw std::out_of_range("calendar age " + format_number(theta) +
                            " outside calibration curve support [" + format_number(min_age()) +
                            ", " + format_number(max_age()) + "]");
  auto it = std::ranges::upper_bound(cal_age_, theta);
  if (it == cal_age_.end()) return {c14_mean_.back(), c14_sd_.back()};
  const auto hi = static_cast<std::size_t>(it - cal_age_.begin());
  const auto lo = hi - 1;
  const double t = (theta - cal_age_[lo]) / (cal_age_[hi] - cal_age_[lo]);
  if (t == 0.0) return {c14_mean_[lo], c14_sd_[lo]};
  return {c14_mean_[lo] + t * (c14_mean_[hi] - c14_mean_[lo]),
          c14_sd_[lo] + t * (c14_sd_[hi] - c14_sd_[lo])};
}

CalibrationCurve parse_curve(std::istream& in, const std::string& source) {
  std::vector<double> age, mean, sd;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_csv(body);
    const auto where = source + ":" + std::to_string(line_no);
    if (fields.size() < 3) throw DataError(where + ": expected at least 3 comma-separated columns");
    const double a = parse_double(fields[0], where);
    const double m = parse_double(fields[1], where);
    const double s = parse_double(fields[2], where);
    if (!(s > 0.0)) throw DataError(where + ": sigma must be positive, got " + std::string(fields[2]));
    if (!age.empty() && a == age.back())
      throw DataError(where + ": duplicate calendar age " + std::string(fields[0]));
    age.push_back(a);
    mean.push_back(m);
    sd.push_back(s);
    lines.push_back(line_no);
  }
  if (age.size() < 2) throw DataError(source + ": calibration curve needs at least two rows");
  // Row-level monotonicity check so the error names the offending line.
  const bool descending = age.front() > age.back();
  for (std::size_t k = 1; k < age.size(); ++k) {
    if (descending ? age[k] >= age[k - 1] : age[k] <= age[k - 1])
      throw DataError(source + ":" + std::to_string(lines[k]) +
                      ": calendar ages not strictly monotone");
  }
  return CalibrationCurve(std::move(age), std::move(mean), std::move(sd));
}

CalibrationCurve load_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration curve file " + path.string());
  return parse_curve(in, path.string());
}

}  // namespace carbcal
