#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace carbcal {

struct CurvePoint {
  double mean;  // m(theta), 14C yr BP
  double sd;    // rho(theta), 14C yr
};

// Gridded radiocarbon calibration curve, immutable after construction.
// Knots are stored ascending in calendar age (cal yr BP).
class CalibrationCurve {
 public:
  // Validates and normalises to ascending order. Throws DataError on
  // fewer than two knots, duplicate ages, unequal lengths or sd <= 0.
  CalibrationCurve(std::vector<double> cal_age, std::vector<double> c14_mean,
                   std::vector<double> c14_sd);

  // Linear interpolation in both mean and sd; exact at knots.
  // Throws std::out_of_range outside [min_age(), max_age()].
  CurvePoint at(double theta) const;

  double min_age() const { return cal_age_.front(); }
  double max_age() const { return cal_age_.back(); }
  bool contains(double theta) const { return theta >= min_age() && theta <= max_age(); }
  std::size_t size() const { return cal_age_.size(); }

  std::span<const double> cal_age() const { return cal_age_; }
  std::span<const double> c14_mean() const { return c14_mean_; }
  std::span<const double> c14_sd() const { return c14_sd_; }

 private:
  std::vector<double> cal_age_;
  std::vector<double> c14_mean_;
  std::vector<double> c14_sd_;
};

// Parses `CAL BP, 14C age, Sigma[, Delta14C, Sigma]` rows; '#' lines and
// blank lines are skipped. `source` names the input in error messages.
CalibrationCurve parse_curve(std::istream& in, const std::string& source = "<stream>");

CalibrationCurve load_curve(const std::filesystem::path& path);

}  // namespace carbcal
