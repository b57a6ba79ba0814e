#pragma once

// Symbolic k-body operators built from elementary tensors
//     c * |psi_1><chi_1| (x) ... (x) |psi_k><chi_k|,
// which is all a finitely atomic de Finetti marginal ever needs.  Kernels of
// k-body operators are never formed.

#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gpdf/ensemble.hpp"
#include "gpdf/nls.hpp"
#include "gpdf/spectral.hpp"

namespace gpdf {

/// A one-body factor: a grid field, an analytic Gaussian, or both.  Factors
/// are shared, so equal slots of a marginal cost one field.
struct Orbital {
  std::shared_ptr<const Field> field;
  std::optional<GaussianProfile> profile;

  static Orbital of(Field f);
  static Orbital of(std::shared_ptr<const Field> f);
  static Orbital of(const GaussianProfile& g);

  bool same_as(const Orbital& other) const;
  /// ||f||_{H^alpha}; analytic orbitals use radial quadrature.
  double h_alpha_norm(double alpha) const;
  const Field& require_field() const;
};

struct ElementaryTensorOp {
  Complex coefficient{1.0, 0.0};
  std::vector<Orbital> left;   // psi_1..psi_k
  std::vector<Orbital> right;  // chi_1..chi_k

  int k() const { return static_cast<int>(left.size()); }
};

struct WeightedTensor {
  double weight = 1.0;
  /// log of weight, kept for weights that underflow
  double log_weight = 0.0;
  ElementaryTensorOp op;
};

class TensorMixture {
 public:
  explicit TensorMixture(int k) : k_(k) {}

  int k() const { return k_; }
  const std::vector<WeightedTensor>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  /// Throws when the factor counts do not match k.
  void add(double weight, ElementaryTensorOp op);
  void add_log_weighted(double log_weight, ElementaryTensorOp op);

 private:
  int k_;
  std::vector<WeightedTensor> terms_;
};

/// gamma^(k) = sum_i w_i (|phi_i><phi_i|)^{(x) k}
TensorMixture marginal(const AtomicMeasure& mu, int k);

/// Trace over the last slot: each coefficient picks up <chi_k, psi_k>.
TensorMixture partial_trace_last(const TensorMixture& gamma);

/// Full trace sum_i w_i c_i prod_j <chi_j, psi_j>.
Complex trace(const TensorMixture& gamma);

enum class GrowthClass { bounded_power, super_exponential };
std::string to_string(GrowthClass g);

struct TraceDiagnostics {
  int k = 0;
  double alpha = 0.0;
  double t = 0.0;
  double value_log = 0.0;  // log Tr(S^(k,alpha) gamma^(k))
  GrowthClass classification = GrowthClass::bounded_power;
};

/// Tr(S^(k,alpha) gamma) for mixtures of positive rank-one powers (equal left
/// and right factors, positive real coefficients), in log space.  The value
/// is classified bounded_power when it stays below the total weight times
/// R^{2k}; R defaults to the largest factor norm.
TraceDiagnostics trace_S_alpha(const TensorMixture& gamma, double alpha, double t = 0.0,
                               std::optional<double> reference_radius = std::nullopt);

enum class ContractionSign { plus, minus };

/// B^{+/-}_{j;k+1}: contracts slot k+1 into slot j (1-based) by the pointwise
/// product rule.  Needs grid orbitals.
TensorMixture apply_B(const TensorMixture& gamma, int j, ContractionSign sign);
/// B_{k+1} = sum_j (B^+_{j;k+1} - B^-_{j;k+1}).
TensorMixture apply_B_full(const TensorMixture& gamma);

/// Kernel value at grid points x_1..x_k (left) and x'_1..x'_k (right), given
/// as flat sample indices.
Complex kernel_at(const TensorMixture& gamma, std::span<const std::size_t> x,
                  std::span<const std::size_t> x_prime);

struct KFunctionalValue {
  double slot_product = 0.0;  // sum_i w_i (1/2 ||phi_i||_H1^2 + 1/4 ||phi_i||_4^4)^m
  double energy_form = 0.0;   // sum_i w_i E[phi_i]^m (focusing-free form, lambda = +1)
};

/// Evaluates Tr(K_1 K_3 ... K_{2m-1} gamma^(2m)) on the marginal: each pair
/// of slots (l, l+1) contributes 1/2 <chi_l,(1-Laplacian)psi_l><chi_{l+1},psi_{l+1}>
/// + 1/4 int psi_l conj(chi_l) psi_{l+1} conj(chi_{l+1}).  Throws for
/// unnormalized atoms.  With include_potential = false the quartic term is dropped.
KFunctionalValue K_functional(const AtomicMeasure& mu, int m, bool include_potential = true);

struct ResidualRow {
  double t = 0.0;
  double one_body = 0.0;  // ||i phi_t + Laplacian phi - lambda |phi|^2 phi||_2
  double k_body_bound = 0.0;  // 2 k ||r|| ||phi||^{2k-1}
};

/// Residual of the hierarchy along a factorized trajectory; time derivative by
/// centred differences on uniformly spaced snapshots.  k in {1, 2}.
std::vector<ResidualRow> hierarchy_residual(const Trajectory& trajectory, double lambda, int k);

struct TraceNormResult {
  double value = 0.0;
  /// Condition number of the 2x2 one-body Gram matrix of (u~, v~).
  double gram_condition = 1.0;
  bool ill_conditioned = false;
  /// "dense" (2^k word Gram) or "reduced" (two-dimensional span)
  std::string route;
};

/// Tr|S^(k,alpha)[(|u><u|)^{(x)k} - (|v><v|)^{(x)k}]| on the span of k-fold
/// words in {u~, v~}, u~ = (1-Laplacian)^{alpha/2} u.  k <= 12; the dense
/// route is used up to k = 8.
TraceNormResult rank_one_diff_trace_norm(const Field& u, const Field& v, int k, double alpha);
/// Same from the one-body Gram entries <u~,u~>, <u~,v~>, <v~,v~>.
TraceNormResult rank_one_diff_trace_norm(double uu, Complex uv, double vv, int k, bool dense);

/// k ||u~ - v~|| (||u~|| + ||v~||)^{2k-1}
double telescoping_bound(const Field& u, const Field& v, int k, double alpha);

void write_trace_csv(std::ostream& out, std::span<const TraceDiagnostics> rows);

}  // namespace gpdf
