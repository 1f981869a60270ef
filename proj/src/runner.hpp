#pragma once

#include <optional>
#include <string>
#include <vector>

#include "density.hpp"
#include "metrics.hpp"
#include "mixture.hpp"
#include "samplers.hpp"

namespace difftv {

struct RunConfig {
  std::string target_path;
  std::vector<int> T_list;
  double c0 = 2.0;
  double c1 = 4.0;
  std::vector<SamplerKind> samplers;
  GridSpec grid;
  int oracle_n = 200000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  static RunConfig from_json_file(const std::string& path);
};

struct ValidationItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_pass() const;
};

// Schedule property checks, oracle agreement, Jacobian FD checks and the
// accelerated-DDPM form equivalence, as configured. Writes
// <output_dir>/validation_report.json.
ValidationReport run_validate(const RunConfig& config);

// For each T and sampler kind: compute p_1 on the grid, q_1 in closed form,
// TV and KL; fit per-sampler rates. Writes report.csv, report.json,
// schedule CSVs and per-sampler log-log plot data under output_dir.
ConvergenceReport run_sweep(const RunConfig& config);

// Re-reads a sweep output directory, prints the slope table and writes
// tv_rates.svg. Deterministic and idempotent.
int run_report(const std::string& results_dir, std::string* rendered_table = nullptr);

// Endpoint dump with run metadata (CSV matrix + JSON sidecar).
void dump_samples(const MixtureTarget& target, const Schedule& sched, const SamplerSpec& spec,
                  int n, const std::string& csv_path, const std::string& meta_path,
                  const std::string& target_name);

void write_report_files(const ConvergenceReport& report, const RunConfig& config);

}  // namespace difftv
