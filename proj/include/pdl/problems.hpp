#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdl/autodiff.hpp"
#include "pdl/tensor.hpp"

namespace pdl::problems {

enum class Kind { convex_qp, nonconvex_qp, qcqp };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct Dims {
  std::size_t n = 0;       // decision variables
  std::size_t n_eq = 0;    // QP equality rows
  std::size_t n_ineq = 0;  // QP inequality rows
  std::size_t n_aff = 0;   // QCQP affine-space dimension
};

// Parametric optimization family: fixed data shared across instances, an
// instance being a parameter vector x.
//
// convex_qp:    min 1/2 y'Qy + r'y   s.t. Ay = x, Gy <= h
// nonconvex_qp: min 1/2 y'Qy + r'sin(y), same constraints
// qcqp:         min (Ay - x)'(Ay - x) s.t. y_i^2 = 1
struct ProblemFamily {
  Kind kind = Kind::convex_qp;
  Dims dims;
  std::uint64_t seed = 0;

  Tensor q_diag;  // [n], diagonal of Q (QP)
  Tensor r;       // [n] (QP)
  Tensor A;       // [n_eq x n] (QP) or [n_aff x n] (QCQP)
  Tensor G;       // [n_ineq x n] (QP)
  Tensor h;       // [n_ineq] (QP)
  Tensor A_pinv;  // [n x n_eq] Moore-Penrose pseudo-inverse of A (QP)

  std::size_t input_dim() const {
    return kind == Kind::qcqp ? dims.n_aff : dims.n_eq;
  }
  std::size_t eq_count() const {
    return kind == Kind::qcqp ? dims.n : dims.n_eq;
  }
  std::size_t ineq_count() const {
    return kind == Kind::qcqp ? 0 : dims.n_ineq;
  }
};

// Fixed data drawn per the family's generation recipe; pure in (kind, dims,
// seed). QCQP regenerates A until it has full column rank.
ProblemFamily family_generate(Kind kind, const Dims& dims, std::uint64_t seed);

enum class Split { train, valid, test, all };
const char* split_name(Split s);

struct Dataset {
  Split split = Split::all;
  std::uint64_t seed = 0;
  Tensor X;  // [count x input_dim]

  std::size_t count() const { return X.rows(); }
  Tensor row(std::size_t i) const;
};

// count instances with x ~ U(-1,1)^p, one derived RNG stream per instance.
Dataset sample_instances(const ProblemFamily& family, std::size_t count,
                         std::uint64_t seed);

// Disjoint contiguous index blocks with tags train/valid/test; the train
// share rounds up.
std::array<Dataset, 3> split_dataset(const Dataset& all, std::size_t ratio_train,
                                     std::size_t ratio_valid, std::size_t ratio_test);

// Batch evaluators; Y is [B x n], X is [B x input_dim].
Tensor objective_batch(const ProblemFamily& f, const Tensor& Y, const Tensor& X);
Tensor eq_batch(const ProblemFamily& f, const Tensor& Y, const Tensor& X);
Tensor ineq_batch(const ProblemFamily& f, const Tensor& Y);

// Differentiable variants on graph values (X enters as a constant).
ad::Value objective_batch(const ProblemFamily& f, const ad::Value& Y, const Tensor& X);
ad::Value eq_batch(const ProblemFamily& f, const ad::Value& Y, const Tensor& X);
ad::Value ineq_batch(const ProblemFamily& f, const ad::Value& Y);

// Single-instance conveniences; x [p], y [n].
double objective_one(const ProblemFamily& f, const Tensor& x, const Tensor& y);
Tensor eq_one(const ProblemFamily& f, const Tensor& x, const Tensor& y);
Tensor ineq_one(const ProblemFamily& f, const Tensor& y);

// Feasible point for generated QP instances with x in [-1,1]^p: y = A+ x.
Tensor feasible_witness(const ProblemFamily& f, const Tensor& x);

// Exact QCQP minimizer over {-1,1}^n by enumeration; ties resolve to the
// lexicographically smallest y (with -1 < 1). n is capped at 20.
struct BruteforceResult {
  Tensor y;
  double f = 0.0;
};
BruteforceResult qcqp_bruteforce(const ProblemFamily& f, const Tensor& x);

// -- serialization ----------------------------------------------------------

// Binary dataset file: self-contained header (magic, version, kind, dims,
// seeds, split, count) + family arrays + instance parameters, all
// little-endian real64.
void dataset_save(const std::filesystem::path& path, const ProblemFamily& family,
                  const Dataset& ds);
struct LoadedDataset {
  ProblemFamily family;
  Dataset dataset;
};
LoadedDataset dataset_load(const std::filesystem::path& path);

// Ground-truth sidecar: instance index -> (y*, f*).
struct Sidecar {
  Tensor Y;               // [count x n]
  std::vector<double> f;  // [count]
};
void sidecar_save(const std::filesystem::path& path, const Sidecar& sc);
Sidecar sidecar_load(const std::filesystem::path& path);

// Key-value family descriptor (text).
void family_descriptor_save(const std::filesystem::path& path,
                            const ProblemFamily& family);
ProblemFamily family_from_descriptor(const std::filesystem::path& path);

}  // namespace pdl::problems
