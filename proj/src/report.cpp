#include "tlfuzz/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tlfuzz/harness.hpp"

namespace tlfuzz {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::int64_t value_at(const CampaignCurve& c, std::size_t i) {
  if (c.distinct.empty()) return 1;
  // Early-stopped campaigns hold their final count.
  return i < c.distinct.size() ? c.distinct[i] : c.distinct.back();
}

}  // namespace

bool ReportData::has(bool guided) const {
  for (const CampaignCurve& c : curves) {
    if (c.guided == guided) return true;
  }
  return false;
}

std::vector<double> ReportData::mean(bool guided) const {
  std::vector<double> out(max_steps, 0.0);
  std::size_t count = 0;
  for (const CampaignCurve& c : curves) {
    if (c.guided != guided) continue;
    ++count;
    for (std::size_t i = 0; i < max_steps; ++i) {
      out[i] += static_cast<double>(value_at(c, i));
    }
  }
  if (count == 0) return {};
  for (double& v : out) v /= static_cast<double>(count);
  return out;
}

std::vector<std::int64_t> ReportData::min(bool guided) const {
  std::vector<std::int64_t> out;
  for (const CampaignCurve& c : curves) {
    if (c.guided != guided) continue;
    if (out.empty()) {
      out.assign(max_steps, 0);
      for (std::size_t i = 0; i < max_steps; ++i) out[i] = value_at(c, i);
    } else {
      for (std::size_t i = 0; i < max_steps; ++i) {
        out[i] = std::min(out[i], value_at(c, i));
      }
    }
  }
  return out;
}

std::vector<std::int64_t> ReportData::max(bool guided) const {
  std::vector<std::int64_t> out;
  for (const CampaignCurve& c : curves) {
    if (c.guided != guided) continue;
    if (out.empty()) {
      out.assign(max_steps, 0);
      for (std::size_t i = 0; i < max_steps; ++i) out[i] = value_at(c, i);
    } else {
      for (std::size_t i = 0; i < max_steps; ++i) {
        out[i] = std::max(out[i], value_at(c, i));
      }
    }
  }
  return out;
}

ReportData load_report_data(const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw std::invalid_argument("report: no campaign directories");
  ReportData data;
  for (const std::string& dir : dirs) {
    nlohmann::json meta = nlohmann::json::parse(slurp(dir + "/meta.json"));
    CampaignCurve curve;
    curve.dir = dir;
    curve.guided = meta["mode"].get<std::string>() == "guided";
    std::istringstream steps(slurp(dir + "/steps.csv"));
    std::string line;
    std::getline(steps, line);  // header
    std::int64_t distinct = 1;  // the post-reset steady state
    while (std::getline(steps, line)) {
      if (line.empty()) continue;
      StepRecord r = StepRecord::from_csv_row(line);
      if (r.was_new) ++distinct;
      curve.distinct.push_back(distinct);
    }
    data.max_steps = std::max(data.max_steps, curve.distinct.size());
    data.curves.push_back(std::move(curve));
  }
  return data;
}

std::string report_csv(const ReportData& data) {
  std::ostringstream os;
  os << "step";
  bool g = data.has(true), b = data.has(false);
  if (g) os << ",guided_mean,guided_min,guided_max";
  if (b) os << ",baseline_mean,baseline_min,baseline_max";
  os << "\n";
  auto gm = data.mean(true), bm = data.mean(false);
  auto gmin = data.min(true), gmax = data.max(true);
  auto bmin = data.min(false), bmax = data.max(false);
  os.precision(6);
  for (std::size_t i = 0; i < data.max_steps; ++i) {
    os << (i + 1);
    if (g) os << "," << gm[i] << "," << gmin[i] << "," << gmax[i];
    if (b) os << "," << bm[i] << "," << bmin[i] << "," << bmax[i];
    os << "\n";
  }
  return os.str();
}

namespace {

constexpr double kW = 720, kH = 420, kMl = 60, kMr = 20, kMt = 24, kMb = 44;

double sx(std::size_t i, std::size_t n) {
  return kMl + (kW - kMl - kMr) * (n <= 1 ? 1.0 : static_cast<double>(i) /
                                                      static_cast<double>(n - 1));
}

double sy(double v, double vmax) {
  return kH - kMb - (kH - kMt - kMb) * (vmax <= 0 ? 0.0 : v / vmax);
}

void polyline(std::ostringstream& os, const std::vector<double>& ys, std::size_t n,
              double vmax, const char* color, double width) {
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
     << "\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    os << sx(i, n) << "," << sy(ys[i], vmax) << " ";
  }
  os << "\"/>\n";
}

void band(std::ostringstream& os, const std::vector<std::int64_t>& lo,
          const std::vector<std::int64_t>& hi, std::size_t n, double vmax,
          const char* color) {
  os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    os << sx(i, n) << "," << sy(static_cast<double>(hi[i]), vmax) << " ";
  }
  for (std::size_t i = n; i-- > 0;) {
    os << sx(i, n) << "," << sy(static_cast<double>(lo[i]), vmax) << " ";
  }
  os << "\"/>\n";
}

}  // namespace

std::string report_svg(const ReportData& data) {
  std::ostringstream os;
  os.precision(7);
  bool g = data.has(true), b = data.has(false);
  double vmax = 1.0;
  auto gmax = data.max(true), bmax = data.max(false);
  for (std::size_t i = 0; i < data.max_steps; ++i) {
    if (g) vmax = std::max(vmax, static_cast<double>(gmax[i]));
    if (b) vmax = std::max(vmax, static_cast<double>(bmax[i]));
  }
  std::size_t n = data.max_steps;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
     << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kMl << "\" y1=\"" << kH - kMb << "\" x2=\"" << kW - kMr
     << "\" y2=\"" << kH - kMb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMl << "\" y1=\"" << kMt << "\" x2=\"" << kMl << "\" y2=\""
     << kH - kMb << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double v = vmax * tick / 4.0;
    double y = sy(v, vmax);
    os << "<text x=\"" << kMl - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << static_cast<int>(v)
       << "</text>\n";
    os << "<line x1=\"" << kMl << "\" y1=\"" << y << "\" x2=\"" << kW - kMr
       << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "<text x=\"" << (kW / 2) << "\" y=\"" << kH - 10
     << "\" font-size=\"12\" text-anchor=\"middle\">fault steps</text>\n";
  os << "<text x=\"16\" y=\"" << (kH / 2)
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (kH / 2) << ")\">distinct states</text>\n";
  if (b) {
    band(os, data.min(false), data.max(false), n, vmax, "#d62728");
    polyline(os, data.mean(false), n, vmax, "#d62728", 2.0);
  }
  if (g) {
    band(os, data.min(true), data.max(true), n, vmax, "#1f77b4");
    polyline(os, data.mean(true), n, vmax, "#1f77b4", 2.0);
  }
  double ly = kMt + 8;
  if (g) {
    os << "<rect x=\"" << kMl + 12 << "\" y=\"" << ly << "\" width=\"14\" height=\"4\""
       << " fill=\"#1f77b4\"/><text x=\"" << kMl + 32 << "\" y=\"" << ly + 6
       << "\" font-size=\"11\">guided</text>\n";
    ly += 16;
  }
  if (b) {
    os << "<rect x=\"" << kMl + 12 << "\" y=\"" << ly << "\" width=\"14\" height=\"4\""
       << " fill=\"#d62728\"/><text x=\"" << kMl + 32 << "\" y=\"" << ly + 6
       << "\" font-size=\"11\">random baseline</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string report_summary(const ReportData& data) {
  std::ostringstream os;
  os.precision(4);
  bool g = data.has(true), b = data.has(false);
  auto gm = data.mean(true), bm = data.mean(false);
  if (g) os << "guided: " << std::count_if(data.curves.begin(), data.curves.end(),
                                           [](const auto& c) { return c.guided; })
            << " campaigns, final mean distinct states " << gm.back() << "\n";
  if (b) os << "baseline: " << std::count_if(data.curves.begin(), data.curves.end(),
                                             [](const auto& c) { return !c.guided; })
            << " campaigns, final mean distinct states " << bm.back() << "\n";
  if (g && b) {
    double guided_final = gm.back();
    std::size_t reach = data.max_steps;
    for (std::size_t i = 0; i < data.max_steps; ++i) {
      if (bm[i] >= guided_final) {
        reach = i + 1;
        break;
      }
    }
    if (reach < data.max_steps) {
      os << "baseline reaches the guided final count after " << reach << " of "
         << data.max_steps << " steps\n";
    } else {
      os << "baseline does not reach the guided final count (" << guided_final
         << ") within " << data.max_steps << " steps\n";
    }
    double baseline_final = bm.back();
    std::size_t greach = data.max_steps;
    for (std::size_t i = 0; i < data.max_steps; ++i) {
      if (gm[i] >= baseline_final) {
        greach = i + 1;
        break;
      }
    }
    if (greach > 0) {
      os << "guided reaches the baseline final count (" << baseline_final << ") after "
         << greach << " steps; speed-up "
         << static_cast<double>(data.max_steps) / static_cast<double>(greach) << "x\n";
    }
  }
  return os.str();
}

}  // namespace tlfuzz
