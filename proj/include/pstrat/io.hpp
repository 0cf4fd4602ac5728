#ifndef PSTRAT_IO_HPP
#define PSTRAT_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "pstrat/fit.hpp"
#include "pstrat/gibbs.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

/// Shortest round-trippable decimal rendering (17 significant digits), so
/// written values re-ingest to identical doubles.
std::string format_g17(double v);

struct ColumnSpec {
  std::string z = "z";
  std::string d = "d";
  std::string y1 = "y1";
  std::string y2 = "y2";
};

/// CSV ingestion with a header row. Column names are configurable; every
/// header column must be one of the configured names (the y2 column is
/// required only for bivariate families and is skipped entirely for the
/// univariate family). Missing or malformed fields are reported with
/// 1-based data row numbers; `log_y1` applies a natural-log transform at
/// ingestion and rejects non-positive y1.
ObservedDataset read_dataset_csv(const std::string& path, const ColumnSpec& columns, Family family,
                                 bool log_y1);

void write_dataset_csv(const std::string& path, const ObservedDataset& data);
void write_truth_csv(const std::string& path, const std::vector<Stratum>& labels);

/// Draw dump: one metadata comment line, then one row per stored draw with
/// the full parameter vector. Reading reconstructs the store (including
/// chain boundaries) exactly, value for value.
void write_draws_csv(const std::string& path, const DrawStore& draws, Variant variant);

struct LoadedDraws {
  DrawStore store;
  Variant variant = Variant::Bivariate;
};
LoadedDraws read_draws_csv(const std::string& path);

/// Per-group means in the layout of a compliance-by-assignment summary
/// table: all units, control, treated, treated non-compliers, treated
/// compliers, and all non-treated units.
struct DatasetSummary {
  struct Group {
    std::string name;
    int n = 0;
    double mean_z = 0.0, mean_d = 0.0, mean_y1 = 0.0, mean_y2 = 0.0;
    bool has_y2 = false;
  };
  std::vector<Group> groups;
};
DatasetSummary dataset_summary(const ObservedDataset& data);
std::string render_dataset_summary(const DatasetSummary& s);

void write_summary_csv(const std::string& path, const std::vector<FitResult>& fits);
void write_kde_csv(const std::string& path, const std::vector<FitResult>& fits);
void write_pvalues_csv(const std::string& path,
                       const std::vector<std::pair<std::string, PValueReport>>& reports);

}  // namespace pstrat

#endif
