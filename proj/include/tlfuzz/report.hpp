#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tlfuzz {

struct CampaignCurve {
  std::string dir;
  bool guided = true;
  std::vector<std::int64_t> distinct;  // cumulative distinct states per step
};

struct ReportData {
  std::vector<CampaignCurve> curves;
  std::size_t max_steps = 0;

  std::vector<double> mean(bool guided) const;
  std::vector<std::int64_t> min(bool guided) const;
  std::vector<std::int64_t> max(bool guided) const;
  bool has(bool guided) const;
};

// Reads steps.csv/meta.json from each campaign directory.
ReportData load_report_data(const std::vector<std::string>& dirs);

// distinct-states-vs-steps table; deterministic for fixed inputs.
std::string report_csv(const ReportData& data);

// Static line chart: mean curves with min/max bands per group.
std::string report_svg(const ReportData& data);

// Plain-text comparison, including how many steps the baseline needs to reach
// the guided group's final distinct-state count.
std::string report_summary(const ReportData& data);

}  // namespace tlfuzz
