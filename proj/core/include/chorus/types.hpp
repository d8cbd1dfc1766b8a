#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chorus {

// Error taxonomy; the CLI maps these to fixed exit codes (2, 2, 3, 4).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix; fixed shape after construction.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows),
        cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
              fill) {
    assert(rows >= 0 && cols >= 0);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  const T& operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// Survey dimensions and the acoustic/count site-sharing map.
//
// Global site indices: acoustic sites occupy 0..R-1; count sites are placed
// by site_map (count site i lives at global index site_map[i]). The global
// list is the union, so a count site either shares an acoustic site's index
// (< R) or extends the list (>= R). Every global site must be referenced by
// at least one survey type.
struct SurveyDesign {
  int num_acoustic_sites = 0;  // R
  int num_count_sites = 0;     // I
  int acoustic_surveys = 0;    // J
  int count_surveys = 0;       // T
  std::vector<int> site_map;   // count site -> global site, injective

  int num_global_sites() const;
  // Throws ValidationError on any dimension or site_map violation.
  void validate() const;
  // Global site -> count-site index, or -1 where no count site sits.
  std::vector<int> count_site_by_global() const;
};

struct AcousticData {
  Grid<int8_t> y;          // R x J, 1 = species detected
  Grid<int> v;             // R x J, vocalization counts
  Grid<uint8_t> missing;   // R x J, 1 = no recording
};

// Manual-verification pairs; cells with n = 0 carry no validation evidence.
struct ValidationData {
  Grid<int> n;  // R x J, vocalizations checked
  Grid<int> k;  // R x J, checked vocalizations confirmed true
};

struct CountData {
  Grid<int> c;            // I x T, point counts
  Grid<uint8_t> missing;  // I x T
};

enum class AbundanceKind { kConstant, kLogLinear };

// Expected abundance per site: a shared constant, or exp(beta0 + beta1 * X).
struct AbundanceModel {
  AbundanceKind kind = AbundanceKind::kConstant;
  double lambda = 1.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  std::vector<double> covariate;  // per global site; log-linear kind only

  double mean_at(int global_site) const;
};

enum class ModelVariant { kAV, kC, kAC, kACV };

std::string_view variant_name(ModelVariant variant);
ModelVariant variant_from_name(std::string_view name);

// Which data blocks each variant's likelihood consumes.
bool variant_uses_acoustic(ModelVariant variant);
bool variant_uses_validation(ModelVariant variant);
bool variant_uses_counts(ModelVariant variant);

// Validated bundle of data blocks sharing one design. Immutable after
// validate_dataset; safe to share read-only across chains and threads.
struct Dataset {
  SurveyDesign design;
  std::optional<AcousticData> acoustic;
  std::optional<ValidationData> validation;
  std::optional<CountData> counts;
  std::vector<double> covariate;        // per global site; empty = none
  std::vector<int> count_by_global;     // global site -> count site or -1
};

// Checks every type invariant and the variant's data-block requirements.
// The covariate may be empty (constant-abundance fits) or sized to the
// global site list.
Dataset validate_dataset(const SurveyDesign& design,
                         std::optional<AcousticData> acoustic,
                         std::optional<ValidationData> validation,
                         std::optional<CountData> counts,
                         std::vector<double> covariate, ModelVariant variant);

// One MCMC state. true_calls (K) is meaningful only at unmasked acoustic
// cells with n > 0; elsewhere it is storage.
struct ParameterState {
  std::vector<long> site_abundance;  // N per global site
  Grid<int> true_calls;              // K, R x J
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double delta = 0.0;
  double omega = 0.0;
  double p = 0.5;
  AbundanceModel abundance;
};

// delta*N / (delta*N + omega). The 0/0 corner (N = 0 or delta = 0, with
// omega = 0) returns 0 by convention and sets *degenerate when provided.
double true_positive_rate(long abundance, double delta, double omega,
                          bool* degenerate = nullptr);

// inverse-logit(alpha0 + alpha1 * N); strictly increasing in N for
// alpha1 > 0.
double detection_prob(long abundance, double alpha0, double alpha1);

// Global sites whose latent N enters the variant's likelihood. Sites outside
// the active data blocks marginalize out exactly and are skipped.
std::vector<int> active_sites(const SurveyDesign& design, ModelVariant variant);

}  // namespace chorus
