#include "pstrat/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pstrat {

std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return in;
}

}  // namespace

ObservedDataset read_dataset_csv(const std::string& path, const ColumnSpec& columns, Family family,
                                 bool log_y1) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  const auto header = split_csv_line(line);

  const bool need_y2 = family != Family::Univariate;
  int col_z = -1, col_d = -1, col_y1 = -1, col_y2 = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h == columns.z) col_z = static_cast<int>(i);
    else if (h == columns.d) col_d = static_cast<int>(i);
    else if (h == columns.y1) col_y1 = static_cast<int>(i);
    else if (h == columns.y2) col_y2 = static_cast<int>(i);
    else throw ValidationError(path + ": unknown column '" + h + "'");
  }
  if (col_z < 0) throw ValidationError(path + ": missing column '" + columns.z + "'");
  if (col_d < 0) throw ValidationError(path + ": missing column '" + columns.d + "'");
  if (col_y1 < 0) throw ValidationError(path + ": missing column '" + columns.y1 + "'");
  if (need_y2 && col_y2 < 0) throw ValidationError(path + ": missing column '" + columns.y2 + "'");

  ObservedDataset data;
  std::vector<int> missing_rows;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << path << ": row " << row << ": expected " << header.size() << " fields, found "
          << fields.size();
      throw ValidationError(msg.str());
    }
    auto field = [&](int col) -> const std::string& { return fields[static_cast<std::size_t>(col)]; };
    const bool row_missing = is_missing(field(col_z)) || is_missing(field(col_d)) ||
                             is_missing(field(col_y1)) ||
                             (need_y2 && is_missing(field(col_y2)));
    if (row_missing) {
      missing_rows.push_back(row);
      continue;
    }
    ObservedUnit u;
    double z, d;
    if (!parse_double(field(col_z), &z) || (z != 0.0 && z != 1.0))
      throw ValidationError(path + ": row " + std::to_string(row) + ": z must be 0 or 1");
    if (!parse_double(field(col_d), &d) || (d != 0.0 && d != 1.0))
      throw ValidationError(path + ": row " + std::to_string(row) + ": d must be 0 or 1");
    u.z = static_cast<int>(z);
    u.d = static_cast<int>(d);
    if (u.z == 0 && u.d == 1)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            ": one-sided noncompliance violated (z=0 with d=1)");
    if (!parse_double(field(col_y1), &u.y1))
      throw ValidationError(path + ": row " + std::to_string(row) + ": malformed y1");
    if (need_y2 && !parse_double(field(col_y2), &u.y2))
      throw ValidationError(path + ": row " + std::to_string(row) + ": malformed y2");
    if (log_y1) {
      if (!(u.y1 > 0.0))
        throw ValidationError(path + ": row " + std::to_string(row) +
                              ": y1 must be positive for the log transform");
      u.y1 = std::log(u.y1);
    }
    data.units.push_back(u);
  }
  if (!missing_rows.empty()) {
    std::ostringstream msg;
    msg << path << ": rows with missing values:";
    for (int r : missing_rows) msg << ' ' << r;
    throw ValidationError(msg.str());
  }
  return data;
}

void write_dataset_csv(const std::string& path, const ObservedDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  const bool any_y2 = !data.units.empty() && data.units.front().has_y2();
  out << (any_y2 ? "z,d,y1,y2\n" : "z,d,y1\n");
  for (const auto& u : data.units) {
    out << u.z << ',' << u.d << ',' << format_g17(u.y1);
    if (any_y2) out << ',' << format_g17(u.y2);
    out << '\n';
  }
}

void write_truth_csv(const std::string& path, const std::vector<Stratum>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "s_true\n";
  for (Stratum s : labels) out << (s == Stratum::Complier ? "c" : "n") << '\n';
}

namespace {

const char* kCellTags[4] = {"c0", "c1", "n0", "n1"};

std::vector<std::string> draw_columns(Family family) {
  std::vector<std::string> cols{"chain", "draw", "pi_c"};
  for (const char* tag : kCellTags) {
    cols.push_back(std::string("mu1_") + tag);
    if (family != Family::Univariate) cols.push_back(std::string("mu2_") + tag);
    cols.push_back(std::string("s11_") + tag);
    if (family != Family::Univariate) {
      cols.push_back(std::string("s12_") + tag);
      cols.push_back(std::string("s22_") + tag);
    }
  }
  return cols;
}

std::map<std::string, std::string> parse_meta(const std::string& line) {
  std::map<std::string, std::string> meta;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return meta;
}

}  // namespace

void write_draws_csv(const std::string& path, const DrawStore& draws, Variant variant) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  const Family family = draws.spec.family;
  out << "# pstrat-draws v=1 variant=" << variant_name(variant)
      << " family=" << family_name(family)
      << " restriction=" << restriction_name(draws.spec.restriction)
      << " chains=" << draws.chains.size() << " iters=" << draws.config.n_iter
      << " burnin=" << draws.config.n_burnin << " thin=" << draws.config.thin
      << " seed=" << draws.config.seed << '\n';
  const auto cols = draw_columns(family);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    for (std::size_t t = 0; t < draws.chains[c].size(); ++t) {
      const Theta& theta = draws.chains[c][t];
      out << c << ',' << t << ',' << format_g17(theta.pi_c);
      for (int idx = 0; idx < 4; ++idx) {
        const CellParams& cell = theta.cells[idx];
        out << ',' << format_g17(cell.mu[0]);
        if (family != Family::Univariate) out << ',' << format_g17(cell.mu[1]);
        out << ',' << format_g17(cell.sigma(0, 0));
        if (family != Family::Univariate) {
          out << ',' << format_g17(cell.sigma(0, 1));
          out << ',' << format_g17(cell.sigma(1, 1));
        }
      }
      out << '\n';
    }
  }
}

LoadedDraws read_draws_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# pstrat-draws", 0) != 0)
    throw ValidationError(path + ": not a pstrat draw dump");
  const auto meta = parse_meta(line);
  LoadedDraws loaded;
  loaded.variant = variant_from_name(meta.at("variant"));
  DrawStore& store = loaded.store;
  store.spec.family = family_from_name(meta.at("family"));
  store.spec.restriction = restriction_from_name(meta.at("restriction"));
  store.config.n_chains = std::stoi(meta.at("chains"));
  store.config.n_iter = std::stoi(meta.at("iters"));
  store.config.n_burnin = std::stoi(meta.at("burnin"));
  store.config.thin = std::stoi(meta.at("thin"));
  store.config.seed = std::stoull(meta.at("seed"));
  store.chains.resize(static_cast<std::size_t>(store.config.n_chains));

  if (!std::getline(in, line)) throw ValidationError(path + ": missing header");
  const auto header = split_csv_line(line);
  const auto expected = draw_columns(store.spec.family);
  if (header != expected) throw ValidationError(path + ": unexpected draw columns");

  const Family family = store.spec.family;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected.size())
      throw ValidationError(path + ": row " + std::to_string(row) + ": wrong field count");
    std::size_t k = 0;
    auto next = [&]() -> double {
      double v;
      if (!parse_double(fields[k], &v))
        throw ValidationError(path + ": row " + std::to_string(row) + ": malformed value");
      ++k;
      return v;
    };
    const int chain = static_cast<int>(next());
    next();  // draw index, implied by order
    if (chain < 0 || chain >= store.config.n_chains)
      throw ValidationError(path + ": row " + std::to_string(row) + ": chain out of range");
    Theta theta = Theta::make(family);
    theta.pi_c = next();
    for (int idx = 0; idx < 4; ++idx) {
      CellParams& cell = theta.cells[idx];
      cell.mu[0] = next();
      if (family != Family::Univariate) cell.mu[1] = next();
      cell.sigma(0, 0) = next();
      if (family != Family::Univariate) {
        cell.sigma(0, 1) = next();
        cell.sigma(1, 0) = cell.sigma(0, 1);
        cell.sigma(1, 1) = next();
      }
    }
    store.chains[static_cast<std::size_t>(chain)].push_back(std::move(theta));
  }
  return loaded;
}

DatasetSummary dataset_summary(const ObservedDataset& data) {
  struct Pred {
    std::string name;
    bool (*in)(const ObservedUnit&);
  };
  static const Pred preds[] = {
      {"all", [](const ObservedUnit&) { return true; }},
      {"z=0", [](const ObservedUnit& u) { return u.z == 0; }},
      {"z=1", [](const ObservedUnit& u) { return u.z == 1; }},
      {"z=1,d=0", [](const ObservedUnit& u) { return u.z == 1 && u.d == 0; }},
      {"z=1,d=1", [](const ObservedUnit& u) { return u.z == 1 && u.d == 1; }},
      {"d=0", [](const ObservedUnit& u) { return u.d == 0; }},
  };
  DatasetSummary s;
  for (const auto& p : preds) {
    DatasetSummary::Group g;
    g.name = p.name;
    double sz = 0, sd = 0, sy1 = 0, sy2 = 0;
    int ny2 = 0;
    for (const auto& u : data.units) {
      if (!p.in(u)) continue;
      ++g.n;
      sz += u.z;
      sd += u.d;
      sy1 += u.y1;
      if (u.has_y2()) {
        sy2 += u.y2;
        ++ny2;
      }
    }
    if (g.n > 0) {
      g.mean_z = sz / g.n;
      g.mean_d = sd / g.n;
      g.mean_y1 = sy1 / g.n;
      if (ny2 == g.n) {
        g.mean_y2 = sy2 / g.n;
        g.has_y2 = true;
      }
    }
    s.groups.push_back(g);
  }
  return s;
}

std::string render_dataset_summary(const DatasetSummary& s) {
  std::ostringstream out;
  out << "group        n      mean(z)  mean(d)  mean(y1)  mean(y2)\n";
  for (const auto& g : s.groups) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %6d  %8.3f %8.3f %9.3f", g.name.c_str(), g.n, g.mean_z,
                  g.mean_d, g.mean_y1);
    out << buf;
    if (g.has_y2) {
      std::snprintf(buf, sizeof(buf), " %9.3f", g.mean_y2);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

void write_summary_csv(const std::string& path, const std::vector<FitResult>& fits) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "variant,estimand,median,q025,q975,width,prob_negative,mean,psrf\n";
  for (const auto& fit : fits) {
    for (std::size_t i = 0; i < fit.estimands.size(); ++i) {
      const PosteriorSummary& s = fit.summaries[i];
      out << variant_name(fit.variant) << ',' << fit.estimands[i] << ',' << format_g17(s.median)
          << ',' << format_g17(s.q025) << ',' << format_g17(s.q975) << ',' << format_g17(s.width)
          << ',' << format_g17(s.prob_negative) << ',' << format_g17(s.mean) << ',';
      if (std::isfinite(fit.psrf[i])) out << format_g17(fit.psrf[i]);
      out << '\n';
    }
  }
}

void write_kde_csv(const std::string& path, const std::vector<FitResult>& fits) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "variant,estimand,x,density\n";
  for (const auto& fit : fits) {
    for (const auto& name : fit.estimands) {
      if (name != "tau_c" && name != "tau_n") continue;
      auto extract = [&name](const Theta& t) { return estimand_value(name, t); };
      const KdeGrid grid = kde(fit.draws.flat(extract));
      for (std::size_t i = 0; i < grid.x.size(); ++i)
        out << variant_name(fit.variant) << ',' << name << ',' << format_g17(grid.x[i]) << ','
            << format_g17(grid.density[i]) << '\n';
    }
  }
}

void write_pvalues_csv(const std::string& path,
                       const std::vector<std::pair<std::string, PValueReport>>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "method,variant,measure,p,n_valid,n_undefined\n";
  for (const auto& [variant, report] : reports) {
    for (std::size_t i = 0; i < report.measures.size(); ++i) {
      out << report.method << ',' << variant << ',' << measure_name(report.measures[i]) << ',';
      if (report.p[i]) out << format_g17(*report.p[i]);
      out << ',' << report.n_valid[i] << ',' << report.n_undefined[i] << '\n';
    }
  }
}

}  // namespace pstrat
