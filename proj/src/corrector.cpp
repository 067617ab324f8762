#include "parahom/corrector.hpp"

#include <omp.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "parahom/fft.hpp"
#include "parahom/stats.hpp"

namespace parahom {

std::vector<cplx> phase_vector(std::span<const double> xi) {
  std::vector<cplx> e(xi.size());
  for (std::size_t j = 0; j < xi.size(); ++j) e[j] = std::polar(1.0, -xi[j]) - 1.0;
  return e;
}

double phase_norm2(std::span<const double> xi) {
  double s = 0.0;
  for (double x : xi) s += 2.0 - 2.0 * std::cos(x);
  return s;
}

std::vector<int> SpaceTimeGrid::fft_dims() const {
  std::vector<int> dims{steps};
  for (int s : space.sides()) dims.push_back(s);
  return dims;
}

std::vector<cplx> twisted_gradient(const SpaceTimeGrid& grid, std::span<const cplx> psi,
                                   std::span<const double> xi) {
  const int d = grid.dim();
  const std::size_t n = grid.space.size();
  const std::size_t M = grid.size();
  if (psi.size() != M) throw DimensionError("twisted_gradient: field size mismatch");
  if (static_cast<int>(xi.size()) != d) throw DimensionError("twisted_gradient: xi dimension mismatch");
  std::vector<cplx> out(static_cast<std::size_t>(d) * M);
  for (int j = 0; j < d; ++j) {
    const cplx ph = std::polar(1.0, -xi[static_cast<std::size_t>(j)]);
    cplx* oj = out.data() + static_cast<std::size_t>(j) * M;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t tt = 0; tt < grid.steps; ++tt) {
      const std::size_t base = static_cast<std::size_t>(tt) * n;
      for (std::size_t s = 0; s < n; ++s) oj[base + s] = ph * psi[base + grid.space.plus(s, j)] - psi[base + s];
    }
  }
  return out;
}

std::vector<cplx> twisted_divergence(const SpaceTimeGrid& grid, std::span<const cplx> g,
                                     std::span<const double> xi) {
  const int d = grid.dim();
  const std::size_t n = grid.space.size();
  const std::size_t M = grid.size();
  if (g.size() != static_cast<std::size_t>(d) * M) throw DimensionError("twisted_divergence: field size mismatch");
  if (static_cast<int>(xi.size()) != d) throw DimensionError("twisted_divergence: xi dimension mismatch");
  std::vector<cplx> out(M, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t tt = 0; tt < grid.steps; ++tt) {
    const std::size_t base = static_cast<std::size_t>(tt) * n;
    for (std::size_t s = 0; s < n; ++s) {
      cplx acc = 0.0;
      for (int j = 0; j < d; ++j) {
        const cplx ph = std::polar(1.0, xi[static_cast<std::size_t>(j)]);
        const cplx* gj = g.data() + static_cast<std::size_t>(j) * M;
        acc += ph * gj[base + grid.space.minus(s, j)] - gj[base + s];
      }
      out[base + s] = acc;
    }
  }
  return out;
}

namespace {

// (1 - e^{-x}) / x
cplx phi1(cplx x) {
  if (std::abs(x) < 1e-3) return 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0;
  return (1.0 - std::exp(-x)) / x;
}

// (1 - phi1(x)) / x
cplx phi2(cplx x) {
  if (std::abs(x) < 1e-3) return 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0 + x * x * x * x / 720.0;
  return (1.0 - phi1(x)) / x;
}

void omega_phase(const SpaceTimeGrid& grid, std::size_t s, std::span<const double> xi, std::vector<int>& k,
                 std::vector<cplx>& e) {
  grid.space.coords(s, k);
  for (int a = 0; a < grid.dim(); ++a) {
    const auto au = static_cast<std::size_t>(a);
    const double omega = fft::frequency(k[au], grid.space.side(a)) - xi[au];
    e[au] = std::polar(1.0, -omega) - 1.0;
  }
}

void check_eta(cplx eta) {
  if (!(eta.real() > 0.0)) throw ConfigError("resolvent requires Re eta > 0");
}

}  // namespace

ResolventOperator ResolventOperator::from_symbol(const SpaceTimeGrid& grid, std::span<const double> xi, cplx eta,
                                                 double Lambda) {
  check_eta(eta);
  const int d = grid.dim();
  if (static_cast<int>(xi.size()) != d) throw DimensionError("resolvent: xi dimension mismatch");
  if (!grid.continuous && 4.0 * d * Lambda > 1.0 + 1e-15)
    throw StabilityError("discrete resolvent requires 4 d Lambda <= 1");
  ResolventOperator T;
  T.grid_ = grid;
  T.xi_.assign(xi.begin(), xi.end());
  T.eta_ = eta;
  T.Lambda_ = Lambda;
  const auto dd = static_cast<std::size_t>(d * d);
  const std::size_t n = grid.space.size();
  T.transfer_.assign(grid.size() * dd, 0.0);
  std::vector<int> k(static_cast<std::size_t>(d));
  std::vector<cplx> e(static_cast<std::size_t>(d));
  for (int ft = 0; ft < grid.steps; ++ft) {
    const double theta = fft::frequency(ft, grid.steps);
    for (std::size_t s = 0; s < n; ++s) {
      omega_phase(grid, s, xi, k, e);
      double e2 = 0.0;
      for (auto& v : e) e2 += std::norm(v);
      cplx w;
      if (!grid.continuous) {
        w = 1.0 / (std::exp(eta + cplx(0.0, theta)) - 1.0 + Lambda * e2);
      } else {
        const cplx kap = eta + Lambda * e2;
        const cplx x = kap * grid.dt;
        const cplx w0 = grid.dt * phi2(x);
        const cplx A = grid.dt * phi1(x) * phi1(-x);
        const cplx r = std::exp(-x - cplx(0.0, theta));
        w = w0 + A * r / (1.0 - r);
      }
      cplx* m = T.transfer_.data() + (static_cast<std::size_t>(ft) * n + s) * dd;
      for (int j = 0; j < d; ++j)
        for (int c = 0; c < d; ++c)
          m[j * d + c] = Lambda * w * std::conj(e[static_cast<std::size_t>(j)]) * e[static_cast<std::size_t>(c)];
    }
  }
  return T;
}

int kernel_horizon(cplx eta, int cap) {
  check_eta(eta);
  const double h = std::ceil(8.0 / eta.real());
  return static_cast<int>(std::min<double>(h, cap));
}

double kernel_tail_bound(cplx eta, int T) {
  check_eta(eta);
  const double r = eta.real();
  return std::exp(-r * (T + 1.0)) / ((T + 1.0) * (1.0 - std::exp(-r)));
}

ResolventOperator ResolventOperator::from_kernel(const SpaceTimeGrid& grid, std::span<const double> xi, cplx eta,
                                                 const KernelTable& kernel, double tail_tol) {
  check_eta(eta);
  const int d = grid.dim();
  if (kernel.dim() != d) throw DimensionError("resolvent: kernel dimension mismatch");
  if (static_cast<int>(xi.size()) != d) throw DimensionError("resolvent: xi dimension mismatch");
  const bool cont = kernel.flavor == KernelFlavor::continuous_time;
  if (cont != grid.continuous) throw ConfigError("resolvent: kernel flavor does not match the grid");
  if (kernel.times.size() < 2) throw SizingError("resolvent: kernel table too short");
  ResolventOperator T;
  T.grid_ = grid;
  T.xi_.assign(xi.begin(), xi.end());
  T.eta_ = eta;
  T.Lambda_ = kernel.Lambda;
  const double Lam = kernel.Lambda;
  const auto dd = static_cast<std::size_t>(d * d);
  const std::size_t n = grid.space.size();
  const std::size_t nt = kernel.times.size();

  double h = 1.0;
  if (!cont) {
    T.tail_bound_ = kernel_tail_bound(eta, static_cast<int>(nt) - 1);
  } else {
    h = kernel.times[1] - kernel.times[0];
    for (std::size_t j = 1; j < nt; ++j)
      if (std::abs(kernel.times[j] - kernel.times[j - 1] - h) > 1e-9 * h)
        throw SizingError("resolvent: continuous kernel needs uniform times");
    if (kernel.times[0] != 0.0) throw SizingError("resolvent: kernel times must start at 0");
    const double ratio = grid.dt / h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) throw SizingError("resolvent: kernel step must divide dt");
    const double tmax = kernel.times.back();
    T.tail_bound_ = std::exp(-eta.real() * tmax) / (std::exp(1.0) * tmax * eta.real());
  }
  if (T.tail_bound_ > tail_tol)
    throw SizingError("resolvent: kernel tail " + std::to_string(T.tail_bound_) + " above tolerance");

  // acc[jk][lag][ζ]: spatial transforms of the twisted kernel, folded by time lag.
  const auto steps = static_cast<std::size_t>(grid.steps);
  std::vector<cplx> acc(dd * steps * n, 0.0);
  std::vector<cplx> fold(n);
  std::vector<int> x(static_cast<std::size_t>(d)), xp(x.size());
  const std::size_t W = kernel.window_size();
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (int j = 0; j < d; ++j)
      for (int c = 0; c < d; ++c) {
        std::fill(fold.begin(), fold.end(), 0.0);
        // K_jc(x) = (∇_c ∇*_j G)(x) = G(x+e_c-e_j) - G(x+e_c) - G(x-e_j) + G(x)
        for (std::size_t w = 0; w < W; ++w) {
          kernel.window_coords(w, x);
          auto g = [&](int dc, int dj) {
            xp = x;
            xp[static_cast<std::size_t>(c)] += dc;
            xp[static_cast<std::size_t>(j)] -= dj;
            return kernel.at(xp, ti);
          };
          const double K = g(1, 1) - g(1, 0) - g(0, 1) + g(0, 0);
          if (K == 0.0) continue;
          double arg = 0.0;
          for (std::size_t a = 0; a < x.size(); ++a) arg -= x[a] * xi[a];
          fold[grid.space.index(x)] += K * std::polar(1.0, arg);
        }
        fft::backward(fold, grid.space.sides());  // Σ_y F(y) e^{iζy}
        if (!cont) {
          const double t = kernel.times[ti];
          const cplx damp = Lam * std::exp(-eta * (t + 1.0));
          const auto lag = static_cast<std::size_t>(std::llround(t + 1.0)) % steps;
          cplx* dst = acc.data() + ((static_cast<std::size_t>(j * d + c) * steps) + lag) * n;
          for (std::size_t s = 0; s < n; ++s) dst[s] += damp * fold[s];
        } else {
          const double tau = kernel.times[ti];
          const double wq = (ti == 0 || ti + 1 == nt) ? 0.5 : 1.0;
          const cplx damp = Lam * wq * h * std::exp(-eta * tau);
          const double q = std::floor(tau / grid.dt + 1e-12);
          const double f = tau / grid.dt - q;
          const auto l0 = static_cast<std::size_t>(q) % steps;
          const auto l1 = (l0 + 1) % steps;
          cplx* d0 = acc.data() + ((static_cast<std::size_t>(j * d + c) * steps) + l0) * n;
          cplx* d1 = acc.data() + ((static_cast<std::size_t>(j * d + c) * steps) + l1) * n;
          for (std::size_t s = 0; s < n; ++s) {
            d0[s] += (1.0 - f) * damp * fold[s];
            d1[s] += f * damp * fold[s];
          }
        }
      }
  }
  // Lag -> θ with e^{-iθ lag}.
  T.transfer_.assign(grid.size() * dd, 0.0);
  for (std::size_t jc = 0; jc < dd; ++jc)
    for (std::size_t ft = 0; ft < steps; ++ft)
      for (std::size_t lag = 0; lag < steps; ++lag) {
        const cplx ph = std::polar(1.0, -2.0 * M_PI * static_cast<double>((ft * lag) % steps) / static_cast<double>(steps));
        const cplx* src = acc.data() + (jc * steps + lag) * n;
        for (std::size_t s = 0; s < n; ++s) T.transfer_[(ft * n + s) * dd + jc] += ph * src[s];
      }
  return T;
}

std::span<const cplx> ResolventOperator::transfer(std::size_t f) const {
  const auto dd = static_cast<std::size_t>(grid_.dim() * grid_.dim());
  return {transfer_.data() + f * dd, dd};
}

void ResolventOperator::apply(std::span<cplx> g, bool project) const {
  const int d = grid_.dim();
  const std::size_t M = grid_.size();
  if (g.size() != static_cast<std::size_t>(d) * M) throw DimensionError("resolvent: field size mismatch");
  const auto dims = grid_.fft_dims();
  fft::forward(g, dims, d);
  const auto dd = static_cast<std::size_t>(d * d);
  const double inv = 1.0 / static_cast<double>(M);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(M); ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    const cplx* m = transfer_.data() + f * dd;
    cplx in[3], out[3];
    for (int j = 0; j < d; ++j) in[j] = g[static_cast<std::size_t>(j) * M + f];
    for (int j = 0; j < d; ++j) {
      cplx acc = 0.0;
      for (int c = 0; c < d; ++c) acc += m[j * d + c] * in[c];
      out[j] = acc * inv;
    }
    for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j) * M + f] = out[j];
  }
  if (project)
    for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j) * M] = 0.0;
  fft::backward(g, dims, d);
}

std::vector<cplx> apply_T(const SpaceTimeGrid& grid, std::span<const cplx> g, std::span<const double> xi, cplx eta,
                          const KernelTable& kernel, double tail_tol) {
  auto T = ResolventOperator::from_kernel(grid, xi, eta, kernel, tail_tol);
  std::vector<cplx> out(g.begin(), g.end());
  T.apply(out, false);
  return out;
}

double CorrectorField::norm() const {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return std::sqrt(s / static_cast<double>(grid.size()));
}

namespace {

cplx shifted_mean_c(const cplx* v, std::size_t n) {
  if (n == 0) return 0.0;
  const cplx y0 = v[0];
  cplx acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += v[i] - y0;
  return y0 + acc / static_cast<double>(n);
}

}  // namespace

CorrectorField neumann_solve(const CoefficientPath& path, const ResolventOperator& T, std::span<const cplx> v,
                             const NeumannOptions& opt) {
  const auto& grid = T.grid();
  const int d = grid.dim();
  const std::size_t n = grid.space.size();
  const std::size_t M = grid.size();
  if (!(path.box == grid.space)) throw DimensionError("neumann_solve: path box differs from grid");
  if (path.steps() != static_cast<std::size_t>(grid.steps)) throw DimensionError("neumann_solve: path length differs");
  if (path.continuous != grid.continuous) throw ConfigError("neumann_solve: time flavor mismatch");
  if (static_cast<int>(v.size()) != d) throw DimensionError("neumann_solve: v dimension mismatch");
  if (path.bounds.Lambda > T.Lambda() * (1.0 + 1e-12))
    throw EllipticityError("neumann_solve: path Lambda exceeds operator Lambda");
  const double Lam = T.Lambda();
  const auto dd = static_cast<std::size_t>(d * d);

  CorrectorField out;
  out.grid = grid;
  out.xi = T.xi();
  out.eta = T.eta();
  out.v.assign(v.begin(), v.end());
  out.psi.assign(static_cast<std::size_t>(d) * M, 0.0);
  double vnorm = 0.0;
  for (auto x : v) vnorm += std::norm(x);
  vnorm = std::sqrt(vnorm);
  std::vector<cplx> g(out.psi.size()), av(static_cast<std::size_t>(d) * M);
  double prev = -1.0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    // g = b(ψ + v), also a(ψ + v) for the running q estimate.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t tt = 0; tt < grid.steps; ++tt) {
      const auto& sl = path.slice(static_cast<std::size_t>(tt));
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t f = static_cast<std::size_t>(tt) * n + s;
        const auto a = sl.at(s);
        cplx u[3];
        for (int j = 0; j < d; ++j) u[j] = out.psi[static_cast<std::size_t>(j) * M + f] + v[static_cast<std::size_t>(j)];
        for (int j = 0; j < d; ++j) {
          cplx au = 0.0;
          for (int c = 0; c < d; ++c) au += a[static_cast<std::size_t>(j * d + c)] * u[c];
          g[static_cast<std::size_t>(j) * M + f] = u[j] - au / Lam;
          av[static_cast<std::size_t>(j) * M + f] = au;
        }
      }
    }
    if (it > 1)
      for (int j = 0; j < d; ++j) out.q_partial.push_back(shifted_mean_c(av.data() + static_cast<std::size_t>(j) * M, M));
    T.apply(g, true);
    double delta = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) delta += std::norm(g[i] - out.psi[i]);
    delta = std::sqrt(delta / static_cast<double>(M));
    out.psi.swap(g);
    out.update_norms.push_back(delta);
    if (prev > 0.0) out.max_ratio = std::max(out.max_ratio, delta / prev);
    prev = delta;
    out.iterations = it;
    out.residual = delta;
    if (delta <= opt.tol * std::max(vnorm, 1e-300)) break;
    if (it == opt.max_iter)
      throw ConvergenceError("neumann_solve: no convergence in " + std::to_string(opt.max_iter) +
                             " iterations (update " + std::to_string(delta) + ")");
  }
  // Final <a(v + ψ)>.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t tt = 0; tt < grid.steps; ++tt) {
    const auto& sl = path.slice(static_cast<std::size_t>(tt));
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t f = static_cast<std::size_t>(tt) * n + s;
      const auto a = sl.at(s);
      for (int j = 0; j < d; ++j) {
        cplx au = 0.0;
        for (int c = 0; c < d; ++c)
          au += a[static_cast<std::size_t>(j * d + c)] *
                (out.psi[static_cast<std::size_t>(c) * M + f] + v[static_cast<std::size_t>(c)]);
        av[static_cast<std::size_t>(j) * M + f] = au;
      }
    }
  }
  for (int j = 0; j < d; ++j) out.q_partial.push_back(shifted_mean_c(av.data() + static_cast<std::size_t>(j) * M, M));
  (void)dd;
  return out;
}

double EffectiveMatrix::sigma() const {
  double s = 0.0;
  for (std::size_t i = 0; i < se_re.size(); ++i) s = std::max(s, std::hypot(se_re[i], se_im[i]));
  return s;
}

std::pair<double, double> EffectiveMatrix::hermitian_range() const {
  if (d == 1) return {q[0].real(), q[0].real()};
  Eigen::MatrixXcd H(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      H(i, j) = 0.5 * (q[static_cast<std::size_t>(i * d + j)] + std::conj(q[static_cast<std::size_t>(j * d + i)]));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(d - 1)};
}

namespace {

SpaceTimeGrid grid_for(const EnvironmentSpec& spec, const CorrectorConfig& cfg) {
  SpaceTimeGrid g;
  g.space = cfg.space;
  g.steps = cfg.time_steps;
  g.continuous = !spec.discrete_time();
  g.dt = g.continuous ? spec.langevin.grid_spacing : 1.0;
  if (g.steps < 2) throw ConfigError("corrector: time box needs >= 2 steps");
  if (cfg.space.dim() != spec.d) throw DimensionError("corrector: box dimension mismatch");
  return g;
}

}  // namespace

std::vector<EffectiveMatrix> effective_matrices(const EnvironmentSpec& spec, const CorrectorConfig& cfg,
                                                const std::vector<FrequencyPoint>& points, std::size_t N) {
  spec.validate();
  if (N < 2) throw ConfigError("effective_matrix: N must be >= 2");
  const auto grid = grid_for(spec, cfg);
  const int d = spec.d;
  const auto dd = static_cast<std::size_t>(d * d);
  const std::size_t P = points.size();
  std::vector<ResolventOperator> ops;
  for (const auto& p : points) ops.push_back(ResolventOperator::from_symbol(grid, p.xi, p.eta, spec.bounds.Lambda));

  struct SampleOut {
    std::vector<cplx> q;  // P x dd
    int iters = 0;
    double residual = 0.0, ratio = 0.0;
  };
  auto one_sample = [&](std::size_t idx) {
    SampleOut so;
    so.q.assign(P * dd, 0.0);
    const double horizon = grid.continuous ? grid.steps * grid.dt : grid.steps;
    auto path = sample_path(spec, grid.space, horizon, cfg.stream_offset + idx);
    for (std::size_t p = 0; p < P; ++p)
      for (int r = 0; r < d; ++r) {
        std::vector<cplx> v(static_cast<std::size_t>(d), 0.0);
        v[static_cast<std::size_t>(r)] = 1.0;
        auto cf = neumann_solve(path, ops[p], v, cfg.neumann);
        for (int j = 0; j < d; ++j)
          so.q[p * dd + static_cast<std::size_t>(j * d + r)] =
              cf.q_partial[cf.q_partial.size() - static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
        so.iters = std::max(so.iters, cf.iterations);
        so.residual = std::max(so.residual, cf.residual);
        so.ratio = std::max(so.ratio, cf.max_ratio);
      }
    return so;
  };

  std::vector<EffectiveMatrix> out(P);
  std::vector<std::vector<RunningStats>> re(P, std::vector<RunningStats>(dd)), im(P, std::vector<RunningStats>(dd));
  for (std::size_t p = 0; p < P; ++p) {
    out[p].d = d;
    out[p].point = points[p];
    out[p].N = N;
    out[p].samples.reserve(N * dd);
  }
  const std::size_t chunk = cfg.chunk ? cfg.chunk : static_cast<std::size_t>(std::max(1, 2 * omp_get_max_threads()));
  std::vector<SampleOut> buf(chunk);
  for (std::size_t start = 0; start < N; start += chunk) {
    const std::size_t m = std::min(chunk, N - start);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(m); ++j)
      buf[static_cast<std::size_t>(j)] = one_sample(start + static_cast<std::size_t>(j));
    for (std::size_t j = 0; j < m; ++j) {
      const auto& so = buf[j];
      for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t e = 0; e < dd; ++e) {
          re[p][e].push(so.q[p * dd + e].real());
          im[p][e].push(so.q[p * dd + e].imag());
          out[p].samples.push_back(so.q[p * dd + e]);
        }
        out[p].max_iterations = std::max(out[p].max_iterations, so.iters);
        out[p].max_residual = std::max(out[p].max_residual, so.residual);
        out[p].max_ratio = std::max(out[p].max_ratio, so.ratio);
      }
    }
  }
  for (std::size_t p = 0; p < P; ++p) {
    out[p].q.resize(dd);
    out[p].se_re.resize(dd);
    out[p].se_im.resize(dd);
    for (std::size_t e = 0; e < dd; ++e) {
      out[p].q[e] = {re[p][e].mean, im[p][e].mean};
      out[p].se_re[e] = re[p][e].stderr_mean();
      out[p].se_im[e] = im[p][e].stderr_mean();
    }
  }
  return out;
}

EffectiveMatrix effective_matrix(const EnvironmentSpec& spec, const CorrectorConfig& cfg, const FrequencyPoint& point,
                                 std::size_t N) {
  return effective_matrices(spec, cfg, {point}, N).front();
}

std::vector<double> eta_ladder(double Lambda, int k_min, int k_max) {
  if (k_max < k_min) throw ConfigError("eta ladder: k_max < k_min");
  std::vector<double> etas;
  for (int k = k_min; k <= k_max; ++k) etas.push_back(Lambda * std::ldexp(1.0, -k));
  return etas;
}

namespace {

struct InterceptFit {
  double intercept = 0.0;
  double se_fit = 0.0;
  double rms = 0.0;
};

// y ≈ I + s x by ordinary least squares, centered so constant y is reproduced exactly.
InterceptFit intercept_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t K = x.size();
  InterceptFit f;
  const double xbar = shifted_mean(x);
  const double ybar = shifted_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    sxx += (x[k] - xbar) * (x[k] - xbar);
    sxy += (x[k] - xbar) * (y[k] - ybar);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = ybar - slope * xbar;
  double rss = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double r = y[k] - f.intercept - slope * x[k];
    rss += r * r;
  }
  f.rms = std::sqrt(rss / static_cast<double>(K));
  if (K > 2 && sxx > 0.0) f.se_fit = std::sqrt(rss / static_cast<double>(K - 2) * (1.0 / K + xbar * xbar / sxx));
  return f;
}

}  // namespace

Extrapolation extrapolate_q00(const EnvironmentSpec& spec, const CorrectorConfig& cfg, const std::vector<double>& etas,
                              std::size_t N) {
  if (etas.size() < 2) throw ConfigError("extrapolate_q00: ladder needs at least 2 rungs");
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (!(etas[k] > 0.0)) throw ConfigError("extrapolate_q00: eta must be positive");
    if (k > 0 && !(etas[k] < etas[k - 1])) throw ConfigError("extrapolate_q00: non-monotone eta ladder");
  }
  const int d = spec.d;
  const auto dd = static_cast<std::size_t>(d * d);
  std::vector<FrequencyPoint> pts;
  for (double e : etas) pts.push_back({std::vector<double>(static_cast<std::size_t>(d), 0.0), cplx(e, 0.0)});
  Extrapolation ex;
  ex.etas = etas;
  ex.rungs = effective_matrices(spec, cfg, pts, N);
  const std::size_t K = etas.size();
  std::vector<double> x(K);
  for (std::size_t k = 0; k < K; ++k) x[k] = std::sqrt(etas[k]);

  auto& q = ex.q00;
  q.d = d;
  q.point = {std::vector<double>(static_cast<std::size_t>(d), 0.0), cplx(0.0, 0.0)};
  q.N = N;
  q.q.resize(dd);
  q.se_re.resize(dd);
  q.se_im.resize(dd);
  q.samples.assign(N * dd, 0.0);
  for (const auto& r : ex.rungs) {
    q.max_iterations = std::max(q.max_iterations, r.max_iterations);
    q.max_residual = std::max(q.max_residual, r.max_residual);
    q.max_ratio = std::max(q.max_ratio, r.max_ratio);
  }
  std::vector<double> y(K);
  for (std::size_t e = 0; e < dd; ++e) {
    for (int part = 0; part < 2; ++part) {
      auto get = [&](cplx z) { return part == 0 ? z.real() : z.imag(); };
      for (std::size_t k = 0; k < K; ++k) y[k] = get(ex.rungs[k].q[e]);
      const auto f = intercept_fit(x, y);
      RunningStats per_sample;
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < K; ++k) y[k] = get(ex.rungs[k].samples[n * dd + e]);
        const double I = intercept_fit(x, y).intercept;
        per_sample.push(I);
        if (part == 0)
          q.samples[n * dd + e].real(I);
        else
          q.samples[n * dd + e].imag(I);
      }
      const double se = std::hypot(per_sample.stderr_mean(), f.se_fit);
      if (part == 0) {
        q.q[e].real(f.intercept);
        q.se_re[e] = se;
      } else {
        q.q[e].imag(f.intercept);
        q.se_im[e] = se;
      }
      q.fit_residual = std::max(q.fit_residual, f.rms);
    }
  }
  return ex;
}

HolderProbe holder_probe(const EnvironmentSpec& spec, const CorrectorConfig& cfg, const FrequencyPoint& base,
                         const std::vector<HolderOffset>& offsets, std::size_t N) {
  const int d = spec.d;
  const auto dd = static_cast<std::size_t>(d * d);
  const double Lam = spec.bounds.Lambda;
  std::vector<FrequencyPoint> pts{base};
  std::vector<double> scale;
  for (const auto& o : offsets) {
    FrequencyPoint p = base;
    double dx = 0.0;
    if (!o.dxi.empty()) {
      if (static_cast<int>(o.dxi.size()) != d) throw DimensionError("holder_probe: offset dimension mismatch");
      for (int a = 0; a < d; ++a) {
        p.xi[static_cast<std::size_t>(a)] += o.dxi[static_cast<std::size_t>(a)];
        dx += o.dxi[static_cast<std::size_t>(a)] * o.dxi[static_cast<std::size_t>(a)];
      }
    }
    p.eta += o.deta;
    if (!(p.eta.real() > 0.0)) throw ConfigError("holder_probe: offset leaves Re eta > 0");
    if (spec.discrete_time() && !(p.eta.real() < Lam)) throw ConfigError("holder_probe: offset leaves Re eta < Lambda");
    const bool has_xi = dx > 0.0, has_eta = std::abs(o.deta) > 0.0;
    if (has_xi && has_eta) throw ConfigError("holder_probe: offsets move xi or eta, not both");
    scale.push_back(has_xi ? std::sqrt(dx) : std::sqrt(std::abs(o.deta) / Lam));
    pts.push_back(p);
  }
  auto qs = effective_matrices(spec, cfg, pts, N);
  HolderProbe hp;
  hp.scale = scale;
  std::vector<double> X, Y, Sz;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const auto& qa = qs[i + 1];
    const auto& qb = qs[0];
    // Per-sample differences share environments, so their scatter gives the error.
    double norm2 = 0.0, var = 0.0;
    for (std::size_t e = 0; e < dd; ++e) {
      RunningStats re, im;
      for (std::size_t n = 0; n < N; ++n) {
        const cplx dq = qa.samples[n * dd + e] - qb.samples[n * dd + e];
        re.push(dq.real());
        im.push(dq.imag());
      }
      norm2 += re.mean * re.mean + im.mean * im.mean;
      var += re.stderr_mean() * re.stderr_mean() + im.stderr_mean() * im.stderr_mean();
    }
    hp.diff.push_back(std::sqrt(norm2));
    hp.diff_se.push_back(std::sqrt(var));
  }
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (!(scale[i] > 0.0)) continue;
    if (!(hp.diff[i] > 3.0 * hp.diff_se[i]) || !(hp.diff[i] > 0.0)) {
      ++excluded;
      continue;
    }
    X.push_back(scale[i]);
    Y.push_back(hp.diff[i]);
    Sz.push_back(hp.diff_se[i]);
  }
  DecayFit& f = hp.fit;
  f.npoints = X.size();
  f.excluded = excluded;
  if (X.size() < 4) {
    f.verdict = Verdict::inconclusive;
    f.note = X.empty() ? "all differences at the Monte Carlo noise floor" : "fewer than 4 offsets above noise floor";
    return hp;
  }
  auto pl = power_law_fit(X, Y, Sz);
  f.C = std::exp(pl.log_c);
  f.alpha = pl.exponent;
  f.band_lo = pl.band_lo;
  f.band_hi = pl.band_hi;
  f.t_lo = *std::min_element(X.begin(), X.end());
  f.t_hi = *std::max_element(X.begin(), X.end());
  f.verdict = pl.band_lo > 0.0 ? Verdict::pass : (pl.band_hi < 0.0 ? Verdict::fail : Verdict::inconclusive);
  f.note = "alpha from ||q(p') - q(p)|| ~ C scale^alpha";
  return hp;
}

}  // namespace parahom
