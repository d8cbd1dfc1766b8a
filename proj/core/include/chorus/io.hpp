#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chorus/mcmc.hpp"
#include "chorus/simulate.hpp"
#include "chorus/study.hpp"
#include "chorus/types.hpp"

namespace chorus {

// Everything stamped into manifest.json. The manifest's digest is echoed as
// a "# manifest <hex>" first line in every CSV written next to it, tying
// outputs to the run that produced them.
struct OutputManifest {
  std::string command;            // CLI invocation or a library-side label
  uint64_t seed = 0;
  std::string config_json = "{}"; // canonical JSON for the config block
  std::map<std::string, std::string> inputs;  // name -> digest hex
};

// True when SOURCE_DATE_EPOCH is set; outputs then avoid wall-clock values
// so reruns are byte-identical.
bool deterministic_output();

// SOURCE_DATE_EPOCH when set, otherwise the current unix time.
int64_t manifest_timestamp();

// Canonical manifest bytes (sorted keys, two-space indent, trailing newline).
std::string manifest_json(const OutputManifest& manifest);

// Writes manifest.json into dir and returns the hex digest of its bytes.
std::string write_manifest(const std::filesystem::path& dir,
                           const OutputManifest& manifest);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

// Dataset directory: acoustic.csv, validation.csv, counts.csv, sites.csv,
// and truth.json when truth is given. Masked cells are written as NA.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const TruthRecord* truth, const std::string& manifest_hex);

// Rebuilds a dataset from a directory written by write_dataset (or laid out
// the same way by hand). Missing optional files leave their block empty.
Dataset read_dataset(const std::filesystem::path& dir);

// draws.csv (long format), summary.csv (per parameter), acceptance.csv.
void write_chain_output(const std::filesystem::path& dir,
                        const ChainOutput& output,
                        const std::string& manifest_hex);

// Long-format fit table; one row per (fit, parameter), failures keep a
// single row carrying the error. read_fits feeds --resume.
void write_fits(const std::filesystem::path& path,
                std::span<const FitRecord> fits,
                const std::string& manifest_hex);
std::vector<FitRecord> read_fits(const std::filesystem::path& path);

void write_aggregates(const std::filesystem::path& path,
                      std::span<const AggregateRow> rows,
                      const std::string& manifest_hex);

}  // namespace chorus
