#include "tsdl/layers/recurrent.hpp"

#include <algorithm>
#include <cmath>

#include "tsdl/error.hpp"

namespace tsdl {

namespace {

inline real sigmoid(real v) { return real{1} / (real{1} + std::exp(-v)); }

}  // namespace

RecurrentLayer::RecurrentLayer(RecurrentOptions opts) : opts_(opts) {
  if (opts_.units < 1) throw ParameterError("recurrent layer needs at least one unit");
}

std::string RecurrentLayer::summary() const {
  return "units=" + std::to_string(opts_.units) +
         " return_sequences=" + (opts_.return_sequences ? "true" : "false");
}

Shape RecurrentLayer::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) {
    throw ShapeError(std::string(to_string(kind())) + " expects [time, channels] input, got " +
                     to_string(input));
  }
  const std::size_t u = opts_.units, g = gate_count();
  const Shape kshape{input[1], g * u};
  if (kernel_.value.shape() != kshape) {
    const real limit = real{1} / std::sqrt(static_cast<real>(u));
    kernel_ = Parameter(init::uniform(kshape, limit, rng));
    recurrent_ = Parameter(init::uniform({u, g * u}, limit, rng));
    bias_ = Parameter(Tensor({g * u}));
  }
  if (opts_.return_sequences) return {input[0], u};
  return {u};
}

void RecurrentLayer::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "kernel", &kernel_});
  out.push_back({prefix + "recurrent_kernel", &recurrent_});
  out.push_back({prefix + "bias", &bias_});
}

void RecurrentLayer::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.extent(2) != kernel_.value.extent(0)) {
    throw ShapeError(std::string(to_string(kind())) + " input " + to_string(x.shape()) +
                     " does not match kernel " + to_string(kernel_.value.shape()));
  }
}

// ---- LSTM -----------------------------------------------------------------

Shape Lstm::configure_single(const Shape& input, Rng& rng) {
  const bool fresh = kernel_.value.shape() != Shape{input.size() == 2 ? input[1] : 0, 4 * opts_.units};
  Shape out = RecurrentLayer::configure_single(input, rng);
  if (fresh) {
    for (std::size_t j = 0; j < opts_.units; ++j) bias_.value.raw()[opts_.units + j] = 1;
  }
  return out;
}

Tensor Lstm::forward_single(const Tensor& x, Mode, bool record) {
  check_input(x);
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  const std::size_t u = opts_.units, g4 = 4 * u;

  // Input projections for every step at once: [batch*time, 4U].
  std::vector<real> xw(batch * time * g4);
  for (std::size_t r = 0; r < batch * time; ++r) std::copy_n(bias_.value.raw(), g4, xw.data() + r * g4);
  kernels::gemm(false, false, batch * time, g4, ch, 1, x.raw(), ch, kernel_.value.raw(), g4, 1,
                xw.data(), g4);

  std::vector<real> gates(time * batch * g4);
  std::vector<real> cells((time + 1) * batch * u, 0);
  std::vector<real> hidden((time + 1) * batch * u, 0);
  std::vector<real> z(batch * g4);

  for (std::size_t t = 0; t < time; ++t) {
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(xw.data() + (b * time + t) * g4, g4, z.data() + b * g4);
    const real* h_prev = hidden.data() + t * batch * u;
    kernels::gemm(false, false, batch, g4, u, 1, h_prev, u, recurrent_.value.raw(), g4, 1, z.data(), g4);
    real* gt = gates.data() + t * batch * g4;
    const real* c_prev = cells.data() + t * batch * u;
    real* c_now = cells.data() + (t + 1) * batch * u;
    real* h_now = hidden.data() + (t + 1) * batch * u;
    for (std::size_t b = 0; b < batch; ++b) {
      const real* zb = z.data() + b * g4;
      real* gb = gt + b * g4;
      for (std::size_t j = 0; j < u; ++j) {
        const real i = sigmoid(zb[j]);
        const real f = sigmoid(zb[u + j]);
        const real gc = std::tanh(zb[2 * u + j]);
        const real o = sigmoid(zb[3 * u + j]);
        gb[j] = i;
        gb[u + j] = f;
        gb[2 * u + j] = gc;
        gb[3 * u + j] = o;
        const real c = f * c_prev[b * u + j] + i * gc;
        c_now[b * u + j] = c;
        h_now[b * u + j] = o * std::tanh(c);
      }
    }
  }

  Tensor y;
  if (opts_.return_sequences) {
    y = Tensor({batch, time, u});
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(hidden.data() + ((t + 1) * batch + b) * u, u, y.raw() + (b * time + t) * u);
  } else {
    y = Tensor({batch, u});
    std::copy_n(hidden.data() + time * batch * u, batch * u, y.raw());
  }
  if (record) {
    input_ = x;
    batch_ = batch;
    time_ = time;
    gates_ = std::move(gates);
    cells_ = std::move(cells);
    hidden_ = std::move(hidden);
    cached_ = true;
  }
  return y;
}

Tensor Lstm::backward_single(const Tensor& dy) {
  if (!cached_) throw StateError("lstm backward called before a recorded forward");
  const std::size_t batch = batch_, time = time_, ch = input_.extent(2);
  const std::size_t u = opts_.units, g4 = 4 * u;
  const Shape expected = opts_.return_sequences ? Shape{batch, time, u} : Shape{batch, u};
  if (dy.shape() != expected) throw ShapeError("lstm gradient shape mismatch");

  std::vector<real> dxw(batch * time * g4, 0);
  std::vector<real> dz(batch * g4);
  std::vector<real> dh_next(batch * u, 0), dc_next(batch * u, 0), dh(batch * u);

  for (std::size_t t = time; t-- > 0;) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < u; ++j) {
        real up = 0;
        if (opts_.return_sequences) {
          up = dy.raw()[(b * time + t) * u + j];
        } else if (t == time - 1) {
          up = dy.raw()[b * u + j];
        }
        dh[b * u + j] = dh_next[b * u + j] + up;
      }
    const real* gt = gates_.data() + t * batch * g4;
    const real* c_prev = cells_.data() + t * batch * u;
    const real* c_now = cells_.data() + (t + 1) * batch * u;
    for (std::size_t b = 0; b < batch; ++b) {
      const real* gb = gt + b * g4;
      real* dzb = dz.data() + b * g4;
      for (std::size_t j = 0; j < u; ++j) {
        const real i = gb[j], f = gb[u + j], gc = gb[2 * u + j], o = gb[3 * u + j];
        const real tc = std::tanh(c_now[b * u + j]);
        const real dhv = dh[b * u + j];
        const real d_o = dhv * tc;
        const real dc = dhv * o * (1 - tc * tc) + dc_next[b * u + j];
        dzb[j] = dc * gc * i * (1 - i);
        dzb[u + j] = dc * c_prev[b * u + j] * f * (1 - f);
        dzb[2 * u + j] = dc * i * (1 - gc * gc);
        dzb[3 * u + j] = d_o * o * (1 - o);
        dc_next[b * u + j] = dc * f;
      }
      std::copy_n(dzb, g4, dxw.data() + (b * time + t) * g4);
    }
    const real* h_prev = hidden_.data() + t * batch * u;
    kernels::gemm(true, false, u, g4, batch, 1, h_prev, u, dz.data(), g4, 1, recurrent_.grad.raw(), g4);
    kernels::gemm(false, true, batch, u, g4, 1, dz.data(), g4, recurrent_.value.raw(), g4, 0,
                  dh_next.data(), u);
  }

  for (std::size_t r = 0; r < batch * time; ++r)
    for (std::size_t j = 0; j < g4; ++j) bias_.grad.raw()[j] += dxw[r * g4 + j];
  kernels::gemm(true, false, ch, g4, batch * time, 1, input_.raw(), ch, dxw.data(), g4, 1,
                kernel_.grad.raw(), g4);
  Tensor dx(input_.shape());
  kernels::gemm(false, true, batch * time, ch, g4, 1, dxw.data(), g4, kernel_.value.raw(), g4, 0,
                dx.raw(), ch);
  return dx;
}

// ---- GRU ------------------------------------------------------------------

Tensor Gru::forward_single(const Tensor& x, Mode, bool record) {
  check_input(x);
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  const std::size_t u = opts_.units, g3 = 3 * u;

  std::vector<real> xw(batch * time * g3);
  for (std::size_t r = 0; r < batch * time; ++r) std::copy_n(bias_.value.raw(), g3, xw.data() + r * g3);
  kernels::gemm(false, false, batch * time, g3, ch, 1, x.raw(), ch, kernel_.value.raw(), g3, 1,
                xw.data(), g3);

  std::vector<real> gates(time * batch * g3);
  std::vector<real> hidden((time + 1) * batch * u, 0);
  std::vector<real> hr(batch * 2 * u);  // h R[:, 0:2U]
  std::vector<real> rh(batch * u);      // r * h
  std::vector<real> cand(batch * u);    // (r*h) R[:, 2U:3U]
  const real* rk = recurrent_.value.raw();

  for (std::size_t t = 0; t < time; ++t) {
    const real* h_prev = hidden.data() + t * batch * u;
    real* h_now = hidden.data() + (t + 1) * batch * u;
    real* gt = gates.data() + t * batch * g3;
    kernels::gemm(false, false, batch, 2 * u, u, 1, h_prev, u, rk, g3, 0, hr.data(), 2 * u);
    for (std::size_t b = 0; b < batch; ++b) {
      const real* xb = xw.data() + (b * time + t) * g3;
      for (std::size_t j = 0; j < u; ++j) {
        const real zg = sigmoid(xb[j] + hr[b * 2 * u + j]);
        const real rg = sigmoid(xb[u + j] + hr[b * 2 * u + u + j]);
        gt[b * g3 + j] = zg;
        gt[b * g3 + u + j] = rg;
        rh[b * u + j] = rg * h_prev[b * u + j];
      }
    }
    kernels::gemm(false, false, batch, u, u, 1, rh.data(), u, rk + 2 * u, g3, 0, cand.data(), u);
    for (std::size_t b = 0; b < batch; ++b) {
      const real* xb = xw.data() + (b * time + t) * g3;
      for (std::size_t j = 0; j < u; ++j) {
        const real hc = std::tanh(xb[2 * u + j] + cand[b * u + j]);
        const real zg = gt[b * g3 + j];
        gt[b * g3 + 2 * u + j] = hc;
        h_now[b * u + j] = (1 - zg) * h_prev[b * u + j] + zg * hc;
      }
    }
  }

  Tensor y;
  if (opts_.return_sequences) {
    y = Tensor({batch, time, u});
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(hidden.data() + ((t + 1) * batch + b) * u, u, y.raw() + (b * time + t) * u);
  } else {
    y = Tensor({batch, u});
    std::copy_n(hidden.data() + time * batch * u, batch * u, y.raw());
  }
  if (record) {
    input_ = x;
    batch_ = batch;
    time_ = time;
    gates_ = std::move(gates);
    hidden_ = std::move(hidden);
    cached_ = true;
  }
  return y;
}

Tensor Gru::backward_single(const Tensor& dy) {
  if (!cached_) throw StateError("gru backward called before a recorded forward");
  const std::size_t batch = batch_, time = time_, ch = input_.extent(2);
  const std::size_t u = opts_.units, g3 = 3 * u;
  const Shape expected = opts_.return_sequences ? Shape{batch, time, u} : Shape{batch, u};
  if (dy.shape() != expected) throw ShapeError("gru gradient shape mismatch");

  const real* rk = recurrent_.value.raw();
  real* drk = recurrent_.grad.raw();
  std::vector<real> dxw(batch * time * g3, 0);
  std::vector<real> dh_next(batch * u, 0), dh(batch * u);
  std::vector<real> dzr(batch * 2 * u);  // pre-activation grads of z, r
  std::vector<real> dhc(batch * u);      // pre-activation grad of candidate
  std::vector<real> drh(batch * u);      // grad wrt r*h
  std::vector<real> rh(batch * u);

  for (std::size_t t = time; t-- > 0;) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < u; ++j) {
        real up = 0;
        if (opts_.return_sequences) {
          up = dy.raw()[(b * time + t) * u + j];
        } else if (t == time - 1) {
          up = dy.raw()[b * u + j];
        }
        dh[b * u + j] = dh_next[b * u + j] + up;
      }
    const real* gt = gates_.data() + t * batch * g3;
    const real* h_prev = hidden_.data() + t * batch * u;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < u; ++j) {
        const real zg = gt[b * g3 + j], rg = gt[b * g3 + u + j], hc = gt[b * g3 + 2 * u + j];
        const real dhv = dh[b * u + j];
        const real hp = h_prev[b * u + j];
        dzr[b * 2 * u + j] = dhv * (hc - hp) * zg * (1 - zg);
        dhc[b * u + j] = dhv * zg * (1 - hc * hc);
        rh[b * u + j] = rg * hp;
        dh_next[b * u + j] = dhv * (1 - zg);
      }
    // Candidate path: dRh += (r*h)^T dhc, d(r*h) = dhc Rh^T.
    kernels::gemm(true, false, u, u, batch, 1, rh.data(), u, dhc.data(), u, 1, drk + 2 * u, g3);
    kernels::gemm(false, true, batch, u, u, 1, dhc.data(), u, rk + 2 * u, g3, 0, drh.data(), u);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < u; ++j) {
        const real rg = gt[b * g3 + u + j];
        const real hp = h_prev[b * u + j];
        dzr[b * 2 * u + u + j] = drh[b * u + j] * hp * rg * (1 - rg);
        dh_next[b * u + j] += drh[b * u + j] * rg;
      }
    // Gate path: dR[:, 0:2U] += h^T dzr, dh += dzr R[:, 0:2U]^T.
    kernels::gemm(true, false, u, 2 * u, batch, 1, h_prev, u, dzr.data(), 2 * u, 1, drk, g3);
    kernels::gemm(false, true, batch, u, 2 * u, 1, dzr.data(), 2 * u, rk, g3, 1, dh_next.data(), u);
    for (std::size_t b = 0; b < batch; ++b) {
      real* dst = dxw.data() + (b * time + t) * g3;
      std::copy_n(dzr.data() + b * 2 * u, 2 * u, dst);
      std::copy_n(dhc.data() + b * u, u, dst + 2 * u);
    }
  }

  for (std::size_t r = 0; r < batch * time; ++r)
    for (std::size_t j = 0; j < g3; ++j) bias_.grad.raw()[j] += dxw[r * g3 + j];
  kernels::gemm(true, false, ch, g3, batch * time, 1, input_.raw(), ch, dxw.data(), g3, 1,
                kernel_.grad.raw(), g3);
  Tensor dx(input_.shape());
  kernels::gemm(false, true, batch * time, ch, g3, 1, dxw.data(), g3, kernel_.value.raw(), g3, 0,
                dx.raw(), ch);
  return dx;
}

// ---- Bidirectional --------------------------------------------------------

namespace {

std::unique_ptr<RecurrentLayer> make_cell(RecurrentCell cell, RecurrentOptions opts) {
  if (cell == RecurrentCell::lstm) return std::make_unique<Lstm>(opts);
  return std::make_unique<Gru>(opts);
}

std::unique_ptr<RecurrentLayer> as_recurrent(std::unique_ptr<UnaryLayer> layer) {
  if (!layer || (layer->kind() != LayerKind::lstm && layer->kind() != LayerKind::gru)) {
    throw ParameterError("bidirectional wrapper needs an lstm or gru layer");
  }
  return std::unique_ptr<RecurrentLayer>(static_cast<RecurrentLayer*>(layer.release()));
}

}  // namespace

Bidirectional::Bidirectional(RecurrentCell cell, RecurrentOptions opts)
    : fwd_(make_cell(cell, opts)), bwd_(make_cell(cell, opts)) {}

Bidirectional::Bidirectional(std::unique_ptr<UnaryLayer> forward_dir,
                             std::unique_ptr<UnaryLayer> backward_dir)
    : fwd_(as_recurrent(std::move(forward_dir))), bwd_(as_recurrent(std::move(backward_dir))) {
  if (fwd_->kind() != bwd_->kind() || fwd_->units() != bwd_->units() ||
      fwd_->return_sequences() != bwd_->return_sequences()) {
    throw ParameterError("bidirectional directions must share kind and options");
  }
}

std::string Bidirectional::family() const {
  return fwd_->kind() == LayerKind::lstm ? "bilstm" : "bigru";
}

std::string Bidirectional::summary() const {
  return std::string(to_string(fwd_->kind())) + " " + fwd_->summary() + " merge=concat";
}

Shape Bidirectional::configure_single(const Shape& input, Rng& rng) {
  Shape out = fwd_->configure_single(input, rng);
  bwd_->configure_single(input, rng);
  out.back() *= 2;
  return out;
}

Tensor Bidirectional::forward_single(const Tensor& x, Mode mode, bool record) {
  if (x.rank() != 3) throw ShapeError("bidirectional expects rank-3 input, got " + to_string(x.shape()));
  const Tensor yf = fwd_->forward_single(x, mode, record);
  Tensor yb = bwd_->forward_single(flip(x, 1), mode, record);
  if (fwd_->return_sequences()) yb = flip(yb, 1);
  return concat({yf, yb}, yf.rank() - 1);
}

Tensor Bidirectional::backward_single(const Tensor& dy) {
  const std::size_t axis = dy.rank() - 1;
  const std::size_t u = fwd_->units();
  if (dy.shape().back() != 2 * u) throw ShapeError("bidirectional gradient shape mismatch");
  const Tensor dyf = crop(dy, axis, 0, u);
  Tensor dyb = crop(dy, axis, u, u);
  if (fwd_->return_sequences()) dyb = flip(dyb, 1);
  Tensor dx = fwd_->backward_single(dyf);
  add_into(dx, flip(bwd_->backward_single(dyb), 1));
  return dx;
}

void Bidirectional::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  fwd_->collect_parameters(prefix + "forward.", out);
  bwd_->collect_parameters(prefix + "backward.", out);
}

}  // namespace tsdl
