#include "chorus/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "chorus/digest.hpp"
#include "chorus/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace chorus {

std::string digest_hex(uint64_t digest) {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[digest & 0xF];
    digest >>= 4;
  }
  return out;
}

uint64_t dataset_digest(const Dataset& dataset) {
  Fnv1a64 h;
  h.str("dataset-v1");
  h.i64(dataset.design.num_acoustic_sites);
  h.i64(dataset.design.num_count_sites);
  h.i64(dataset.design.acoustic_surveys);
  h.i64(dataset.design.count_surveys);
  for (int s : dataset.design.site_map) h.i64(s);
  h.u64(dataset.acoustic.has_value() ? 1 : 0);
  if (dataset.acoustic) {
    const AcousticData& ac = *dataset.acoustic;
    for (int i = 0; i < ac.y.rows(); ++i)
      for (int j = 0; j < ac.y.cols(); ++j) {
        h.i64(ac.missing(i, j));
        h.i64(ac.y(i, j));
        h.i64(ac.v(i, j));
      }
  }
  h.u64(dataset.validation.has_value() ? 1 : 0);
  if (dataset.validation) {
    const ValidationData& val = *dataset.validation;
    for (int i = 0; i < val.n.rows(); ++i)
      for (int j = 0; j < val.n.cols(); ++j) {
        h.i64(val.n(i, j));
        h.i64(val.k(i, j));
      }
  }
  h.u64(dataset.counts.has_value() ? 1 : 0);
  if (dataset.counts) {
    const CountData& cd = *dataset.counts;
    for (int i = 0; i < cd.c.rows(); ++i)
      for (int t = 0; t < cd.c.cols(); ++t) {
        h.i64(cd.missing(i, t));
        h.i64(cd.c(i, t));
      }
  }
  h.u64(dataset.covariate.size());
  for (double x : dataset.covariate) h.f64(x);
  return h.value();
}

bool deterministic_output() {
  return std::getenv("SOURCE_DATE_EPOCH") != nullptr;
}

int64_t manifest_timestamp() {
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    int64_t value = 0;
    const char* end = env;
    while (*end) ++end;
    const auto res = std::from_chars(env, end, value);
    if (res.ec == std::errc() && res.ptr == end) return value;
  }
  return static_cast<int64_t>(std::time(nullptr));
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::string format_or_na(double value) {
  return std::isnan(value) ? "NA" : format_double(value);
}

std::string csv_quote(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string sanitize_one_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

struct CsvTable {
  fs::path path;
  std::vector<std::vector<std::string>> rows;  // header excluded
};

CsvTable read_csv(const fs::path& path, const std::string& expected_header) {
  const std::string content = read_text_file(path);
  CsvTable table;
  table.path = path;
  std::size_t pos = 0;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && pos > content.size()) break;
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != expected_header)
        throw IoError(path.string() + ": expected header '" +
                      expected_header + "', found '" + line + "'");
      header_seen = true;
      continue;
    }
    table.rows.push_back(split_csv_line(line));
  }
  if (!header_seen)
    throw IoError(path.string() + ": missing header '" + expected_header +
                  "'");
  return table;
}

long parse_long_field(const std::string& field, const fs::path& path,
                      std::size_t row, const char* column) {
  long value = 0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw IoError(path.string() + ": row " + std::to_string(row + 1) +
                  ", column " + column + ": bad integer '" + field + "'");
  return value;
}

double parse_double_field(const std::string& field, const fs::path& path,
                          std::size_t row, const char* column) {
  double value = 0.0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw IoError(path.string() + ": row " + std::to_string(row + 1) +
                  ", column " + column + ": bad number '" + field + "'");
  return value;
}

uint64_t parse_hex_field(const std::string& field, const fs::path& path,
                         std::size_t row, const char* column) {
  uint64_t value = 0;
  const auto res = std::from_chars(field.data(),
                                   field.data() + field.size(), value, 16);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw IoError(path.string() + ": row " + std::to_string(row + 1) +
                  ", column " + column + ": bad digest '" + field + "'");
  return value;
}

void require_columns(const CsvTable& table, std::size_t row,
                     std::size_t expected) {
  if (table.rows[row].size() != expected)
    throw IoError(table.path.string() + ": row " + std::to_string(row + 1) +
                  ": expected " + std::to_string(expected) +
                  " fields, found " + std::to_string(table.rows[row].size()));
}

std::string manifest_line(const std::string& manifest_hex) {
  return "# manifest " + manifest_hex + "\n";
}

json abundance_to_json(const AbundanceModel& abundance) {
  json j;
  if (abundance.kind == AbundanceKind::kConstant) {
    j["kind"] = "constant";
    j["lambda"] = abundance.lambda;
  } else {
    j["kind"] = "log-linear";
    j["beta0"] = abundance.beta0;
    j["beta1"] = abundance.beta1;
  }
  return j;
}

}  // namespace

std::string manifest_json(const OutputManifest& manifest) {
  json config;
  try {
    config = json::parse(manifest.config_json);
  } catch (const json::exception&) {
    throw ConfigError("manifest config block is not valid JSON");
  }
  json j;
  j["command"] = manifest.command;
  j["config"] = config;
  j["conventions"] = {
      {"aggregation", "converged_only"},
      {"ci", "central 95%"},
      {"convergence_monitor", "scalars_only"},
      {"quantile_type", 7},
      {"retained_rule", "floor((iterations - burn_in - adapt) / thin)"},
      {"rhat_threshold", 1.1},
      {"validation_rounding", "half_even"},
      {"validation_sampling", "per_cell"},
  };
  j["created_unix"] = manifest_timestamp();
  j["deterministic"] = deterministic_output();
  json inputs = json::object();
  for (const auto& [name, hexdigest] : manifest.inputs) inputs[name] = hexdigest;
  j["inputs"] = inputs;
  j["seed"] = manifest.seed;
  j["tool"] = "chorus";
  j["tool_version"] = kVersion;
  return j.dump(2) + "\n";
}

std::string write_manifest(const fs::path& dir,
                           const OutputManifest& manifest) {
  const std::string bytes = manifest_json(manifest);
  write_text_file(dir / "manifest.json", bytes);
  return digest_hex(Fnv1a64().str(bytes).value());
}

void write_dataset(const fs::path& dir, const Dataset& dataset,
                   const TruthRecord* truth,
                   const std::string& manifest_hex) {
  fs::create_directories(dir);
  const SurveyDesign& design = dataset.design;

  if (dataset.acoustic) {
    const AcousticData& ac = *dataset.acoustic;
    std::string out = manifest_line(manifest_hex) + "site,survey,y,v\n";
    for (int i = 0; i < ac.y.rows(); ++i)
      for (int j = 0; j < ac.y.cols(); ++j) {
        out += std::to_string(i) + ',' + std::to_string(j) + ',';
        if (ac.missing(i, j)) {
          out += "NA,NA\n";
        } else {
          out += std::to_string(static_cast<int>(ac.y(i, j))) + ',' +
                 std::to_string(ac.v(i, j)) + '\n';
        }
      }
    write_text_file(dir / "acoustic.csv", out);
  }

  if (dataset.validation) {
    const ValidationData& val = *dataset.validation;
    std::string out = manifest_line(manifest_hex) + "site,survey,n,k\n";
    for (int i = 0; i < val.n.rows(); ++i)
      for (int j = 0; j < val.n.cols(); ++j)
        out += std::to_string(i) + ',' + std::to_string(j) + ',' +
               std::to_string(val.n(i, j)) + ',' +
               std::to_string(val.k(i, j)) + '\n';
    write_text_file(dir / "validation.csv", out);
  }

  if (dataset.counts) {
    const CountData& cd = *dataset.counts;
    std::string out = manifest_line(manifest_hex) + "site,visit,c\n";
    for (int r = 0; r < cd.c.rows(); ++r) {
      const int global = design.site_map[static_cast<std::size_t>(r)];
      for (int t = 0; t < cd.c.cols(); ++t) {
        out += std::to_string(global) + ',' + std::to_string(t) + ',';
        if (cd.missing(r, t)) out += "NA\n";
        else out += std::to_string(cd.c(r, t)) + '\n';
      }
    }
    write_text_file(dir / "counts.csv", out);
  }

  {
    const std::vector<int> count_site = design.count_site_by_global();
    std::string out =
        manifest_line(manifest_hex) + "site,x_covariate,is_acoustic,is_count\n";
    for (int g = 0; g < design.num_global_sites(); ++g) {
      out += std::to_string(g) + ',';
      if (dataset.covariate.empty())
        out += "NA";
      else
        out += format_double(dataset.covariate[static_cast<std::size_t>(g)]);
      out += ',';
      out += g < design.num_acoustic_sites ? '1' : '0';
      out += ',';
      out += count_site[static_cast<std::size_t>(g)] >= 0 ? '1' : '0';
      out += '\n';
    }
    write_text_file(dir / "sites.csv", out);
  }

  if (truth) {
    json j;
    j["abundance"] = abundance_to_json(truth->abundance);
    j["alpha0"] = truth->alpha0;
    j["alpha1"] = truth->alpha1;
    j["delta"] = truth->delta;
    j["omega"] = truth->omega;
    j["p"] = truth->p;
    j["manifest"] = manifest_hex;
    j["site_abundance"] = truth->site_abundance;
    json tc = json::array();
    json fc = json::array();
    for (int i = 0; i < truth->true_calls.rows(); ++i) {
      json tc_row = json::array();
      json fc_row = json::array();
      for (int j2 = 0; j2 < truth->true_calls.cols(); ++j2) {
        tc_row.push_back(truth->true_calls(i, j2));
        fc_row.push_back(truth->false_calls(i, j2));
      }
      tc.push_back(tc_row);
      fc.push_back(fc_row);
    }
    j["true_calls"] = tc;
    j["false_calls"] = fc;
    j["validation_sampling"] = "per_cell";
    write_text_file(dir / "truth.json", j.dump(2) + "\n");
  }
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path sites_path = dir / "sites.csv";
  if (!fs::exists(sites_path))
    throw IoError(sites_path.string() + " not found");
  const CsvTable sites =
      read_csv(sites_path, "site,x_covariate,is_acoustic,is_count");
  const int global = static_cast<int>(sites.rows.size());
  if (global == 0) throw IoError(sites_path.string() + ": no sites");
  std::vector<double> covariate;
  std::vector<char> flag_acoustic(static_cast<std::size_t>(global), 0);
  std::vector<char> flag_count(static_cast<std::size_t>(global), 0);
  int n_na = 0;
  for (std::size_t r = 0; r < sites.rows.size(); ++r) {
    require_columns(sites, r, 4);
    const auto& row = sites.rows[r];
    const long site = parse_long_field(row[0], sites_path, r, "site");
    if (site != static_cast<long>(r))
      throw IoError(sites_path.string() + ": row " + std::to_string(r + 1) +
                    ": sites must be listed in order 0..G-1");
    if (row[1] == "NA") {
      ++n_na;
    } else {
      covariate.push_back(
          parse_double_field(row[1], sites_path, r, "x_covariate"));
    }
    flag_acoustic[r] =
        parse_long_field(row[2], sites_path, r, "is_acoustic") != 0;
    flag_count[r] = parse_long_field(row[3], sites_path, r, "is_count") != 0;
  }
  if (n_na != 0 && n_na != global)
    throw IoError(sites_path.string() +
                  ": x_covariate must be NA for all sites or none");

  std::optional<AcousticData> acoustic;
  int num_acoustic = 0;
  int acoustic_surveys = 0;
  const fs::path acoustic_path = dir / "acoustic.csv";
  if (fs::exists(acoustic_path)) {
    const CsvTable table = read_csv(acoustic_path, "site,survey,y,v");
    long max_site = -1;
    long max_survey = -1;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      require_columns(table, r, 4);
      max_site = std::max(max_site,
                          parse_long_field(table.rows[r][0], acoustic_path, r,
                                           "site"));
      max_survey = std::max(
          max_survey,
          parse_long_field(table.rows[r][1], acoustic_path, r, "survey"));
    }
    num_acoustic = static_cast<int>(max_site + 1);
    acoustic_surveys = static_cast<int>(max_survey + 1);
    if (num_acoustic <= 0 || acoustic_surveys <= 0)
      throw IoError(acoustic_path.string() + ": empty acoustic table");
    AcousticData ac;
    ac.y = Grid<int8_t>(num_acoustic, acoustic_surveys);
    ac.v = Grid<int>(num_acoustic, acoustic_surveys);
    ac.missing = Grid<uint8_t>(num_acoustic, acoustic_surveys);
    Grid<uint8_t> seen(num_acoustic, acoustic_surveys);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const int i =
          static_cast<int>(parse_long_field(row[0], acoustic_path, r, "site"));
      const int j = static_cast<int>(
          parse_long_field(row[1], acoustic_path, r, "survey"));
      if (seen(i, j))
        throw IoError(acoustic_path.string() + ": row " +
                      std::to_string(r + 1) + ": duplicate cell");
      seen(i, j) = 1;
      if (row[2] == "NA" || row[3] == "NA") {
        if (row[2] != row[3])
          throw IoError(acoustic_path.string() + ": row " +
                        std::to_string(r + 1) +
                        ": y and v must both be NA for a masked cell");
        ac.missing(i, j) = 1;
      } else {
        ac.y(i, j) = static_cast<int8_t>(
            parse_long_field(row[2], acoustic_path, r, "y"));
        ac.v(i, j) =
            static_cast<int>(parse_long_field(row[3], acoustic_path, r, "v"));
      }
    }
    for (int i = 0; i < num_acoustic; ++i)
      for (int j = 0; j < acoustic_surveys; ++j)
        if (!seen(i, j))
          throw IoError(acoustic_path.string() + ": cell (" +
                        std::to_string(i) + "," + std::to_string(j) +
                        ") missing");
    acoustic = std::move(ac);
  }
  for (int g = 0; g < global; ++g) {
    const bool expected = g < num_acoustic;
    if (static_cast<bool>(flag_acoustic[static_cast<std::size_t>(g)]) !=
        expected)
      throw IoError(sites_path.string() + ": is_acoustic flags disagree " +
                    "with acoustic.csv (site " + std::to_string(g) + ")");
  }

  std::optional<ValidationData> validation;
  const fs::path validation_path = dir / "validation.csv";
  if (fs::exists(validation_path)) {
    if (!acoustic)
      throw IoError(validation_path.string() +
                    " present without acoustic.csv");
    const CsvTable table = read_csv(validation_path, "site,survey,n,k");
    ValidationData val;
    val.n = Grid<int>(num_acoustic, acoustic_surveys);
    val.k = Grid<int>(num_acoustic, acoustic_surveys);
    Grid<uint8_t> seen(num_acoustic, acoustic_surveys);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      require_columns(table, r, 4);
      const auto& row = table.rows[r];
      const long site = parse_long_field(row[0], validation_path, r, "site");
      const long survey =
          parse_long_field(row[1], validation_path, r, "survey");
      if (site < 0 || site >= num_acoustic || survey < 0 ||
          survey >= acoustic_surveys)
        throw IoError(validation_path.string() + ": row " +
                      std::to_string(r + 1) +
                      ": cell outside the acoustic table");
      const int i = static_cast<int>(site);
      const int j = static_cast<int>(survey);
      if (seen(i, j))
        throw IoError(validation_path.string() + ": row " +
                      std::to_string(r + 1) + ": duplicate cell");
      seen(i, j) = 1;
      val.n(i, j) =
          static_cast<int>(parse_long_field(row[2], validation_path, r, "n"));
      val.k(i, j) =
          static_cast<int>(parse_long_field(row[3], validation_path, r, "k"));
    }
    for (int i = 0; i < num_acoustic; ++i)
      for (int j = 0; j < acoustic_surveys; ++j)
        if (!seen(i, j))
          throw IoError(validation_path.string() + ": cell (" +
                        std::to_string(i) + "," + std::to_string(j) +
                        ") missing");
    validation = std::move(val);
  }

  std::optional<CountData> counts;
  std::vector<int> site_map;
  int count_surveys = 0;
  const fs::path counts_path = dir / "counts.csv";
  if (fs::exists(counts_path)) {
    const CsvTable table = read_csv(counts_path, "site,visit,c");
    std::set<long> distinct;
    long max_visit = -1;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      require_columns(table, r, 3);
      distinct.insert(parse_long_field(table.rows[r][0], counts_path, r,
                                       "site"));
      max_visit = std::max(
          max_visit,
          parse_long_field(table.rows[r][1], counts_path, r, "visit"));
    }
    if (distinct.empty())
      throw IoError(counts_path.string() + ": empty count table");
    count_surveys = static_cast<int>(max_visit + 1);
    std::map<long, int> row_of;
    for (long g : distinct) {
      if (g < 0 || g >= global)
        throw IoError(counts_path.string() + ": site " + std::to_string(g) +
                      " outside sites.csv");
      row_of[g] = static_cast<int>(site_map.size());
      site_map.push_back(static_cast<int>(g));
    }
    CountData cd;
    cd.c = Grid<int>(static_cast<int>(site_map.size()), count_surveys);
    cd.missing =
        Grid<uint8_t>(static_cast<int>(site_map.size()), count_surveys);
    Grid<uint8_t> seen(static_cast<int>(site_map.size()), count_surveys);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const int i =
          row_of[parse_long_field(row[0], counts_path, r, "site")];
      const int t = static_cast<int>(
          parse_long_field(row[1], counts_path, r, "visit"));
      if (seen(i, t))
        throw IoError(counts_path.string() + ": row " + std::to_string(r + 1) +
                      ": duplicate cell");
      seen(i, t) = 1;
      if (row[2] == "NA")
        cd.missing(i, t) = 1;
      else
        cd.c(i, t) =
            static_cast<int>(parse_long_field(row[2], counts_path, r, "c"));
    }
    for (int i = 0; i < static_cast<int>(site_map.size()); ++i)
      for (int t = 0; t < count_surveys; ++t)
        if (!seen(i, t))
          throw IoError(counts_path.string() + ": site " +
                        std::to_string(site_map[static_cast<std::size_t>(i)]) +
                        " visit " + std::to_string(t) + " missing");
    counts = std::move(cd);
  }
  for (int g = 0; g < global; ++g) {
    const bool expected =
        std::find(site_map.begin(), site_map.end(), g) != site_map.end();
    if (static_cast<bool>(flag_count[static_cast<std::size_t>(g)]) != expected)
      throw IoError(sites_path.string() + ": is_count flags disagree with " +
                    "counts.csv (site " + std::to_string(g) + ")");
  }

  SurveyDesign design;
  design.num_acoustic_sites = num_acoustic;
  design.num_count_sites = static_cast<int>(site_map.size());
  design.acoustic_surveys = acoustic_surveys;
  design.count_surveys = count_surveys;
  design.site_map = site_map;

  ModelVariant variant;
  if (acoustic && validation && counts) variant = ModelVariant::kACV;
  else if (acoustic && counts) variant = ModelVariant::kAC;
  else if (acoustic && validation) variant = ModelVariant::kAV;
  else if (counts) variant = ModelVariant::kC;
  else throw IoError(dir.string() + ": no usable data blocks found");

  try {
    return validate_dataset(design, std::move(acoustic),
                            std::move(validation), std::move(counts),
                            std::move(covariate), variant);
  } catch (const ValidationError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
}

void write_chain_output(const fs::path& dir, const ChainOutput& output,
                        const std::string& manifest_hex) {
  fs::create_directories(dir);
  {
    std::string out = manifest_line(manifest_hex) +
                      "chain,draw,parameter,value\n";
    for (std::size_t chain = 0; chain < output.draws.size(); ++chain) {
      const auto& params = output.draws[chain];
      const std::size_t retained = params.empty() ? 0 : params.front().size();
      for (std::size_t d = 0; d < retained; ++d)
        for (std::size_t s = 0; s < params.size(); ++s) {
          out += std::to_string(chain) + ',' + std::to_string(d) + ',';
          out += csv_quote(output.parameter_names[s]);
          out += ',';
          out += format_double(params[s][d]);
          out += '\n';
        }
    }
    write_text_file(dir / "draws.csv", out);
  }
  {
    std::string out =
        manifest_line(manifest_hex) +
        "parameter,median,ci_lower,ci_upper,ci_width,rhat,ess,degenerate\n";
    for (const std::string& name : output.parameter_names) {
      const PosteriorSummary s = summarize(output.parameter_chains(name));
      out += csv_quote(name) + ',' + format_double(s.median) + ',' +
             format_double(s.ci_lower) + ',' + format_double(s.ci_upper) +
             ',' + format_double(s.ci_width) + ',' + format_double(s.rhat) +
             ',' + format_double(s.ess) + ',' + (s.degenerate ? "1" : "0") +
             '\n';
    }
    write_text_file(dir / "summary.csv", out);
  }
  {
    std::string out = manifest_line(manifest_hex) + "chain,block,rate\n";
    for (std::size_t chain = 0; chain < output.acceptance_rates.size();
         ++chain) {
      const auto& rates = output.acceptance_rates[chain];
      for (std::size_t b = 0; b < rates.size(); ++b) {
        out += std::to_string(chain) + ',' +
               csv_quote(b < output.block_names.size()
                             ? output.block_names[b]
                             : "block" + std::to_string(b)) +
               ',' + format_double(rates[b]) + '\n';
      }
    }
    write_text_file(dir / "acceptance.csv", out);
  }
}

namespace {

const char* kFitsHeader =
    "scenario,scenario_label,variant,replicate,failed,converged,"
    "wall_seconds,data_digest,parameter,median,ci_lower,ci_upper,ci_width,"
    "rhat,ess,degenerate,truth,error";

}  // namespace

void write_fits(const fs::path& path, std::span<const FitRecord> fits,
                const std::string& manifest_hex) {
  std::string out = manifest_line(manifest_hex) + kFitsHeader + "\n";
  const bool hide_wall = deterministic_output();
  for (const FitRecord& rec : fits) {
    const std::string prefix =
        std::to_string(rec.scenario) + ',' + csv_quote(rec.scenario_label) +
        ',' + rec.variant + ',' + std::to_string(rec.replicate) + ',' +
        (rec.failed ? '1' : '0') + std::string(1, ',') +
        (rec.converged ? '1' : '0') + std::string(1, ',') +
        format_double(hide_wall ? 0.0 : rec.wall_seconds) + ',' +
        digest_hex(rec.data_digest) + ',';
    if (rec.summaries.empty()) {
      out += prefix + "NA,NA,NA,NA,NA,NA,NA,0,NA," +
             csv_quote(sanitize_one_line(rec.error)) + '\n';
      continue;
    }
    for (const auto& [name, s] : rec.summaries) {
      const auto truth_it = rec.truth.find(name);
      out += prefix + csv_quote(name) + ',' + format_double(s.median) + ',' +
             format_double(s.ci_lower) + ',' + format_double(s.ci_upper) +
             ',' + format_double(s.ci_width) + ',' + format_double(s.rhat) +
             ',' + format_double(s.ess) + ',' + (s.degenerate ? "1" : "0") +
             ',' +
             (truth_it == rec.truth.end() ? "NA"
                                          : format_double(truth_it->second)) +
             ',' + csv_quote(sanitize_one_line(rec.error)) + '\n';
    }
  }
  write_text_file(path, out);
}

std::vector<FitRecord> read_fits(const fs::path& path) {
  const CsvTable table = read_csv(path, kFitsHeader);
  std::map<std::tuple<int, std::string, int>, FitRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    require_columns(table, r, 18);
    const auto& row = table.rows[r];
    const int scenario =
        static_cast<int>(parse_long_field(row[0], path, r, "scenario"));
    const std::string& variant = row[2];
    const int replicate =
        static_cast<int>(parse_long_field(row[3], path, r, "replicate"));
    FitRecord& rec = records[{scenario, variant, replicate}];
    rec.scenario = scenario;
    rec.scenario_label = row[1];
    rec.variant = variant;
    rec.replicate = replicate;
    rec.failed = parse_long_field(row[4], path, r, "failed") != 0;
    rec.converged = parse_long_field(row[5], path, r, "converged") != 0;
    rec.wall_seconds = parse_double_field(row[6], path, r, "wall_seconds");
    rec.data_digest = parse_hex_field(row[7], path, r, "data_digest");
    if (!row[17].empty()) rec.error = row[17];
    if (row[8] != "NA") {
      PosteriorSummary s;
      s.median = parse_double_field(row[9], path, r, "median");
      s.ci_lower = parse_double_field(row[10], path, r, "ci_lower");
      s.ci_upper = parse_double_field(row[11], path, r, "ci_upper");
      s.ci_width = parse_double_field(row[12], path, r, "ci_width");
      s.rhat = parse_double_field(row[13], path, r, "rhat");
      s.ess = parse_double_field(row[14], path, r, "ess");
      s.degenerate = parse_long_field(row[15], path, r, "degenerate") != 0;
      rec.summaries[row[8]] = s;
      if (row[16] != "NA")
        rec.truth[row[8]] = parse_double_field(row[16], path, r, "truth");
    }
  }
  std::vector<FitRecord> out;
  out.reserve(records.size());
  for (auto& [key, rec] : records) out.push_back(std::move(rec));
  sort_fits(out);
  return out;
}

void write_aggregates(const fs::path& path,
                      std::span<const AggregateRow> rows,
                      const std::string& manifest_hex) {
  std::string out =
      manifest_line(manifest_hex) +
      "scenario,scenario_label,variant,parameter,fits,converged_fits,"
      "converged_fraction,median_bias,bias_is_absolute,median_ci_width,"
      "coverage\n";
  for (const AggregateRow& row : rows) {
    out += std::to_string(row.scenario) + ',' +
           csv_quote(row.scenario_label) + ',' + row.variant + ',' +
           csv_quote(row.parameter) + ',' + std::to_string(row.fits) + ',' +
           std::to_string(row.converged_fits) + ',' +
           format_or_na(row.converged_fraction) + ',' +
           format_or_na(row.median_bias) + ',' +
           (row.bias_is_absolute ? '1' : '0') + std::string(1, ',') +
           format_or_na(row.median_ci_width) + ',' +
           format_or_na(row.coverage) + '\n';
  }
  write_text_file(path, out);
}

}  // namespace chorus
