#include "pdl/problems.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pdl/common.hpp"
#include "pdl/kernels.hpp"
#include "pdl/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian");

namespace pdl::problems {

namespace {

const kernels::Ops& K() { return kernels::active(); }

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo,
                     double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(m.cols())});
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) t.at(i, j) = m(i, j);
  return t;
}

// Moore-Penrose pseudo-inverse by SVD with cutoff 1e-10 * sigma_max.
Tensor pseudo_inverse(const Tensor& a) {
  const Eigen::MatrixXd m = to_eigen(a);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() ? 1e-10 * sv(0) : 0.0;
  Eigen::VectorXd inv = sv;
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    inv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  }
  return from_eigen(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose());
}

void check_y(const ProblemFamily& f, const Tensor& Y) {
  if (Y.cols() != f.dims.n) {
    throw dim_error("y width " + std::to_string(Y.cols()) + " != n = " +
                    std::to_string(f.dims.n));
  }
}

void check_x(const ProblemFamily& f, const Tensor& X) {
  if (X.cols() != f.input_dim()) {
    throw dim_error("x width " + std::to_string(X.cols()) + " != " +
                    std::to_string(f.input_dim()));
  }
}

}  // namespace

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::convex_qp: return "convex_qp";
    case Kind::nonconvex_qp: return "nonconvex_qp";
    case Kind::qcqp: return "qcqp";
  }
  return "convex_qp";
}

Kind kind_from_name(const std::string& name) {
  if (name == "convex_qp") return Kind::convex_qp;
  if (name == "nonconvex_qp") return Kind::nonconvex_qp;
  if (name == "qcqp") return Kind::qcqp;
  throw config_error("unknown problem kind '" + name + "'");
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::all: return "all";
  }
  return "all";
}

ProblemFamily family_generate(Kind kind, const Dims& dims, std::uint64_t seed) {
  ProblemFamily f;
  f.kind = kind;
  f.dims = dims;
  f.seed = seed;
  if (dims.n == 0) throw config_error("family_generate: n must be positive");
  Rng rng(seed);

  if (kind == Kind::qcqp) {
    if (dims.n_aff < dims.n) {
      throw config_error(
          "family_generate: qcqp needs n_aff >= n for full column rank");
    }
    // standard-normal A, regenerated until full column rank
    const int max_tries = 64;
    for (int attempt = 0; attempt < max_tries; ++attempt) {
      Tensor a = Tensor::zeros({dims.n_aff, dims.n});
      for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(to_eigen(a));
      if (static_cast<std::size_t>(qr.rank()) == dims.n) {
        f.A = std::move(a);
        return f;
      }
    }
    throw generation_error("qcqp A rank-deficient after retries");
  }

  if (dims.n_eq > dims.n) {
    throw config_error("family_generate: qp needs n_eq <= n");
  }
  // draw order is part of the reproducibility contract:
  // q_diag, r, A, G (all row-major, U(0,1))
  f.q_diag = random_tensor(rng, {dims.n}, 0.0, 1.0);
  f.r = random_tensor(rng, {dims.n}, 0.0, 1.0);
  f.A = random_tensor(rng, {dims.n_eq, dims.n}, 0.0, 1.0);
  f.G = random_tensor(rng, {dims.n_ineq, dims.n}, 0.0, 1.0);
  f.A_pinv = pseudo_inverse(f.A);

  // h_i = sum_j |G A+|_ij makes every x in [-1,1]^n_eq feasible at y = A+ x
  f.h = Tensor::zeros({dims.n_ineq});
  if (dims.n_ineq > 0) {
    Tensor ga = Tensor::zeros({dims.n_ineq, dims.n_eq});
    K().gemm_nn(f.G.data(), f.A_pinv.data(), ga.data(), dims.n_ineq, dims.n,
                dims.n_eq, false);
    for (std::size_t i = 0; i < dims.n_ineq; ++i) {
      f.h[i] = K().abs_sum(ga.data() + i * dims.n_eq, dims.n_eq);
    }
  }
  return f;
}

Tensor Dataset::row(std::size_t i) const {
  const std::size_t p = X.cols();
  std::vector<double> v(X.data() + i * p, X.data() + (i + 1) * p);
  return Tensor::unchecked({p}, std::move(v));
}

Dataset sample_instances(const ProblemFamily& family, std::size_t count,
                         std::uint64_t seed) {
  if (count == 0) throw config_error("sample_instances: count must be positive");
  const std::size_t p = family.input_dim();
  Dataset ds;
  ds.split = Split::all;
  ds.seed = seed;
  ds.X = Tensor::zeros({count, p});
  Rng base(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Rng row = base.fork(i);
    for (std::size_t j = 0; j < p; ++j) {
      ds.X.at(i, j) = row.uniform(-1.0, 1.0);
    }
  }
  return ds;
}

std::array<Dataset, 3> split_dataset(const Dataset& all, std::size_t ratio_train,
                                     std::size_t ratio_valid,
                                     std::size_t ratio_test) {
  const std::size_t total = ratio_train + ratio_valid + ratio_test;
  if (total == 0 || ratio_train == 0 || ratio_valid == 0 || ratio_test == 0) {
    throw config_error("split ratio components must be positive");
  }
  const std::size_t count = all.count();
  const std::size_t p = all.X.cols();
  const std::size_t n_train =
      (count * ratio_train + total - 1) / total;  // round up
  const std::size_t n_valid =
      std::min(count - n_train, count * ratio_valid / total);
  const std::size_t n_test = count - n_train - n_valid;

  auto take = [&](std::size_t begin, std::size_t n, Split tag) {
    Dataset d;
    d.split = tag;
    d.seed = all.seed;
    d.X = Tensor::zeros({n, p});
    std::memcpy(d.X.data(), all.X.data() + begin * p, n * p * sizeof(double));
    return d;
  };
  return {take(0, n_train, Split::train),
          take(n_train, n_valid, Split::valid),
          take(n_train + n_valid, n_test, Split::test)};
}

// -- batch evaluators --------------------------------------------------------

Tensor objective_batch(const ProblemFamily& f, const Tensor& Y, const Tensor& X) {
  check_y(f, Y);
  const std::size_t B = Y.rows(), n = f.dims.n;
  Tensor out = Tensor::zeros({B});
  if (f.kind == Kind::qcqp) {
    check_x(f, X);
    const std::size_t m = f.dims.n_aff;
    Tensor res = Tensor::zeros({B, m});
    K().gemm_nt(Y.data(), f.A.data(), res.data(), B, n, m, false);
    K().sub(res.data(), X.data(), res.data(), res.numel());
    for (std::size_t i = 0; i < B; ++i) {
      out[i] = K().dot(res.data() + i * m, res.data() + i * m, m);
    }
    return out;
  }
  for (std::size_t i = 0; i < B; ++i) {
    const double* y = Y.data() + i * n;
    double quad = 0.0, lin = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      quad += f.q_diag[j] * y[j] * y[j];
      lin += f.kind == Kind::nonconvex_qp ? f.r[j] * std::sin(y[j])
                                          : f.r[j] * y[j];
    }
    out[i] = 0.5 * quad + lin;
  }
  return out;
}

Tensor eq_batch(const ProblemFamily& f, const Tensor& Y, const Tensor& X) {
  check_y(f, Y);
  const std::size_t B = Y.rows(), n = f.dims.n;
  if (f.kind == Kind::qcqp) {
    Tensor out = Tensor::zeros({B, n});
    K().square(Y.data(), out.data(), out.numel());
    K().add_scalar(out.data(), -1.0, out.data(), out.numel());
    return out;
  }
  check_x(f, X);
  const std::size_t m = f.dims.n_eq;
  Tensor out = Tensor::zeros({B, m});
  K().gemm_nt(Y.data(), f.A.data(), out.data(), B, n, m, false);
  K().sub(out.data(), X.data(), out.data(), out.numel());
  return out;
}

Tensor ineq_batch(const ProblemFamily& f, const Tensor& Y) {
  check_y(f, Y);
  const std::size_t B = Y.rows(), n = f.dims.n;
  const std::size_t m = f.ineq_count();
  Tensor out = Tensor::zeros({B, m});
  if (m == 0) return out;
  K().gemm_nt(Y.data(), f.G.data(), out.data(), B, n, m, false);
  for (std::size_t i = 0; i < B; ++i) {
    K().sub(out.data() + i * m, f.h.data(), out.data() + i * m, m);
  }
  return out;
}

ad::Value objective_batch(const ProblemFamily& f, const ad::Value& Y,
                          const Tensor& X) {
  check_y(f, Y.tensor());
  if (f.kind == Kind::qcqp) {
    check_x(f, X);
    auto res = ad::sub(ad::matmul_nt(Y, ad::Value::constant(f.A)),
                       ad::Value::constant(X));
    return ad::rowsum(ad::square(res));
  }
  auto q = ad::Value::constant(f.q_diag);
  auto r = ad::Value::constant(f.r);
  auto quad = ad::scale(ad::rowsum(ad::mul_rowvec(ad::square(Y), q)), 0.5);
  auto lin = f.kind == Kind::nonconvex_qp
                 ? ad::rowsum(ad::mul_rowvec(ad::sin(Y), r))
                 : ad::rowsum(ad::mul_rowvec(Y, r));
  return ad::add(quad, lin);
}

ad::Value eq_batch(const ProblemFamily& f, const ad::Value& Y, const Tensor& X) {
  check_y(f, Y.tensor());
  if (f.kind == Kind::qcqp) {
    return ad::add_scalar(ad::square(Y), -1.0);
  }
  check_x(f, X);
  return ad::sub(ad::matmul_nt(Y, ad::Value::constant(f.A)),
                 ad::Value::constant(X));
}

ad::Value ineq_batch(const ProblemFamily& f, const ad::Value& Y) {
  check_y(f, Y.tensor());
  if (f.ineq_count() == 0) {
    return ad::Value::constant(Tensor::zeros({Y.tensor().rows(), 0}));
  }
  return ad::sub_rowvec(ad::matmul_nt(Y, ad::Value::constant(f.G)),
                        ad::Value::constant(f.h));
}

namespace {

Tensor as_row(const Tensor& v) {
  return Tensor::unchecked({1, v.numel()}, v.vec());
}

}  // namespace

double objective_one(const ProblemFamily& f, const Tensor& x, const Tensor& y) {
  return objective_batch(f, as_row(y), as_row(x))[0];
}

Tensor eq_one(const ProblemFamily& f, const Tensor& x, const Tensor& y) {
  Tensor out = eq_batch(f, as_row(y), as_row(x));
  return Tensor::unchecked({out.numel()}, out.vec());
}

Tensor ineq_one(const ProblemFamily& f, const Tensor& y) {
  Tensor out = ineq_batch(f, as_row(y));
  return Tensor::unchecked({out.numel()}, out.vec());
}

Tensor feasible_witness(const ProblemFamily& f, const Tensor& x) {
  if (f.kind == Kind::qcqp) {
    throw contract_error("feasible_witness applies to qp families only");
  }
  const std::size_t n = f.dims.n, m = f.dims.n_eq;
  if (x.numel() != m) throw dim_error("feasible_witness: bad x length");
  Tensor y = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = K().dot(f.A_pinv.data() + i * m, x.data(), m);
  }
  return y;
}

BruteforceResult qcqp_bruteforce(const ProblemFamily& f, const Tensor& x) {
  if (f.kind != Kind::qcqp) {
    throw contract_error("qcqp_bruteforce requires a qcqp family");
  }
  const std::size_t n = f.dims.n, m = f.dims.n_aff;
  if (n > 20) {
    throw budget_error("qcqp_bruteforce: n = " + std::to_string(n) +
                       " exceeds the 2^20 enumeration budget");
  }
  if (x.numel() != m) throw dim_error("qcqp_bruteforce: bad x length");

  // Lexicographic enumeration of y in {-1,1}^n (all -1 first); incrementing
  // the counter flips only trailing bits, so the residual Ay - x is updated
  // with ~2 column saxpys per step. Strict improvement keeps the first
  // (lexicographically smallest) minimizer on ties.
  std::vector<double> y(n, -1.0);
  std::vector<double> res(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = -x[i];
    const double* arow = f.A.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc -= arow[j];  // y = -1 everywhere
    res[i] = acc;
  }
  // column-major copy of A for cheap column updates
  std::vector<double> acol(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) acol[j * m + i] = f.A.at(i, j);

  auto res_sq = [&] { return K().dot(res.data(), res.data(), m); };
  std::vector<double> best_y = y;
  double best_f = res_sq();

  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t s = 1; s < total; ++s) {
    std::uint64_t changed = s ^ (s - 1);
    while (changed) {
      const unsigned bit = static_cast<unsigned>(std::countr_zero(changed));
      changed &= changed - 1;
      const std::size_t j = n - 1 - bit;
      y[j] = -y[j];
      K().axpy(2.0 * y[j], acol.data() + j * m, res.data(), m);
    }
    const double fv = res_sq();
    if (fv < best_f) {
      best_f = fv;
      best_y = y;
    }
  }

  // recompute the objective fresh to shed accumulated update error
  BruteforceResult out;
  out.y = Tensor({n}, std::move(best_y));
  out.f = objective_one(f, x, out.y);
  return out;
}

// -- serialization -----------------------------------------------------------

namespace {

constexpr char kDatasetMagic[8] = {'P', 'D', 'L', 'D', 'S', '0', '0', '1'};
constexpr char kSidecarMagic[8] = {'P', 'D', 'L', 'G', 'T', '0', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64s(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw parse_error(std::string("truncated file reading ") + what);
  return v;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw parse_error(std::string("truncated file reading ") + what);
  return v;
}

Tensor read_f64s(std::istream& in, std::vector<std::size_t> shape,
                 const char* what) {
  Tensor t = Tensor::zeros(std::move(shape));
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != t.numel() * sizeof(double)) {
    throw parse_error(std::string("truncated file reading ") + what);
  }
  return t;
}

}  // namespace

void dataset_save(const std::filesystem::path& path, const ProblemFamily& family,
                  const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open dataset for writing: " + path.string());
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(family.kind));
  write_u64(out, family.dims.n);
  write_u64(out, family.dims.n_eq);
  write_u64(out, family.dims.n_ineq);
  write_u64(out, family.dims.n_aff);
  write_u64(out, family.seed);
  write_u64(out, ds.seed);
  write_u32(out, static_cast<std::uint32_t>(ds.split));
  write_u64(out, ds.count());
  if (family.kind == Kind::qcqp) {
    write_f64s(out, family.A);
  } else {
    write_f64s(out, family.q_diag);
    write_f64s(out, family.r);
    write_f64s(out, family.A);
    write_f64s(out, family.G);
    write_f64s(out, family.h);
    write_f64s(out, family.A_pinv);
  }
  write_f64s(out, ds.X);
  if (!out) throw io_error("short write on dataset: " + path.string());
}

LoadedDataset dataset_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open dataset: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, 5) != 0) {
    throw parse_error("not a dataset file: " + path.string());
  }
  if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw version_error("dataset magic version mismatch in " + path.string());
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion) {
    throw version_error("dataset version " + std::to_string(version) +
                        " unsupported");
  }
  LoadedDataset out;
  const std::uint32_t kind = read_u32(in, "kind");
  if (kind > 2) throw parse_error("bad problem kind in " + path.string());
  out.family.kind = static_cast<Kind>(kind);
  out.family.dims.n = read_u64(in, "n");
  out.family.dims.n_eq = read_u64(in, "n_eq");
  out.family.dims.n_ineq = read_u64(in, "n_ineq");
  out.family.dims.n_aff = read_u64(in, "n_aff");
  out.family.seed = read_u64(in, "family seed");
  out.dataset.seed = read_u64(in, "dataset seed");
  const std::uint32_t split = read_u32(in, "split");
  if (split > 3) throw parse_error("bad split tag in " + path.string());
  out.dataset.split = static_cast<Split>(split);
  const std::uint64_t count = read_u64(in, "count");
  const Dims& d = out.family.dims;
  if (out.family.kind == Kind::qcqp) {
    out.family.A = read_f64s(in, {d.n_aff, d.n}, "A");
  } else {
    out.family.q_diag = read_f64s(in, {d.n}, "q_diag");
    out.family.r = read_f64s(in, {d.n}, "r");
    out.family.A = read_f64s(in, {d.n_eq, d.n}, "A");
    out.family.G = read_f64s(in, {d.n_ineq, d.n}, "G");
    out.family.h = read_f64s(in, {d.n_ineq}, "h");
    out.family.A_pinv = read_f64s(in, {d.n, d.n_eq}, "A_pinv");
  }
  out.dataset.X = read_f64s(in, {count, out.family.input_dim()}, "X");
  return out;
}

void sidecar_save(const std::filesystem::path& path, const Sidecar& sc) {
  if (sc.Y.rows() != sc.f.size()) {
    throw dim_error("sidecar: y rows and f length differ");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open sidecar for writing: " + path.string());
  out.write(kSidecarMagic, sizeof(kSidecarMagic));
  write_u32(out, kFormatVersion);
  write_u64(out, sc.f.size());
  write_u64(out, sc.Y.cols());
  for (std::size_t i = 0; i < sc.f.size(); ++i) {
    write_u64(out, i);
    out.write(reinterpret_cast<const char*>(&sc.f[i]), sizeof(double));
    out.write(reinterpret_cast<const char*>(sc.Y.data() + i * sc.Y.cols()),
              static_cast<std::streamsize>(sc.Y.cols() * sizeof(double)));
  }
  if (!out) throw io_error("short write on sidecar: " + path.string());
}

Sidecar sidecar_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open sidecar: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSidecarMagic, 5) != 0) {
    throw parse_error("not a sidecar file: " + path.string());
  }
  if (std::memcmp(magic, kSidecarMagic, sizeof(magic)) != 0) {
    throw version_error("sidecar magic version mismatch in " + path.string());
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion) {
    throw version_error("sidecar version " + std::to_string(version) +
                        " unsupported");
  }
  const std::uint64_t count = read_u64(in, "count");
  const std::uint64_t n = read_u64(in, "n");
  Sidecar sc;
  sc.Y = Tensor::zeros({count, n});
  sc.f.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t idx = read_u64(in, "record index");
    if (idx != i) throw parse_error("sidecar records out of order");
    in.read(reinterpret_cast<char*>(&sc.f[i]), sizeof(double));
    in.read(reinterpret_cast<char*>(sc.Y.data() + i * n),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw parse_error("truncated sidecar record");
  }
  return sc;
}

void family_descriptor_save(const std::filesystem::path& path,
                            const ProblemFamily& family) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write family descriptor: " + path.string());
  out << "pdl-family 1\n";
  out << "kind " << kind_name(family.kind) << "\n";
  out << "n " << family.dims.n << "\n";
  out << "n_eq " << family.dims.n_eq << "\n";
  out << "n_ineq " << family.dims.n_ineq << "\n";
  out << "n_aff " << family.dims.n_aff << "\n";
  out << "seed " << family.seed << "\n";
}

ProblemFamily family_from_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open family descriptor: " + path.string());
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pdl-family") {
    throw parse_error("not a family descriptor: " + path.string());
  }
  if (version != 1) {
    throw version_error("family descriptor version " + std::to_string(version));
  }
  std::string key, kind_str;
  Dims dims;
  std::uint64_t seed = 0;
  while (in >> key) {
    if (key == "kind") in >> kind_str;
    else if (key == "n") in >> dims.n;
    else if (key == "n_eq") in >> dims.n_eq;
    else if (key == "n_ineq") in >> dims.n_ineq;
    else if (key == "n_aff") in >> dims.n_aff;
    else if (key == "seed") in >> seed;
    else throw parse_error("unknown family descriptor key '" + key + "'");
  }
  return family_generate(kind_from_name(kind_str), dims, seed);
}

}  // namespace pdl::problems
