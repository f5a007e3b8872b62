//! Convolution, dense and GRU kernels with hand-written backward passes.
//!
//! Convolution activations use a channel-major batch layout `[C, B, H, W]`
//! so that `W x im2col` lands directly in the next layer's layout.

use crate::scalar::{gemm, MatRef, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn col_rows(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    pub fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self, batch: usize) -> usize {
        self.in_c * batch * self.in_h * self.in_w
    }

    pub fn out_len(&self, batch: usize) -> usize {
        self.out_c * batch * self.out_plane()
    }

    pub fn col_len(&self, batch: usize) -> usize {
        self.col_rows() * batch * self.out_plane()
    }
}

/// Unfolds `input` (`[C, B, H, W]`) into `col` (`[C*k*k, B*OH*OW]`).
pub fn im2col<T: Scalar>(g: &ConvGeom, batch: usize, input: &[T], col: &mut [T]) {
    let (k, s) = (g.kernel, g.stride);
    let cols = batch * g.out_plane();
    let in_plane = g.in_h * g.in_w;
    for c in 0..g.in_c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for b in 0..batch {
                    let src = &input[(c * batch + b) * in_plane..];
                    for oy in 0..g.out_h {
                        let line = &src[(oy * s + ky) * g.in_w + kx..];
                        let out = &mut dst[(b * g.out_h + oy) * g.out_w..][..g.out_w];
                        for (ox, o) in out.iter_mut().enumerate() {
                            *o = line[ox * s];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `col` into `dinput`.
pub fn col2im_add<T: Scalar>(g: &ConvGeom, batch: usize, col: &[T], dinput: &mut [T]) {
    let (k, s) = (g.kernel, g.stride);
    let cols = batch * g.out_plane();
    let in_plane = g.in_h * g.in_w;
    for c in 0..g.in_c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &col[row * cols..(row + 1) * cols];
                for b in 0..batch {
                    let dst = &mut dinput[(c * batch + b) * in_plane..(c * batch + b + 1) * in_plane];
                    for oy in 0..g.out_h {
                        let line = &src[(b * g.out_h + oy) * g.out_w..][..g.out_w];
                        let base = (oy * s + ky) * g.in_w + kx;
                        for (ox, &v) in line.iter().enumerate() {
                            dst[base + ox * s] = dst[base + ox * s] + v;
                        }
                    }
                }
            }
        }
    }
}

/// `out = relu(W * im2col(input) + b)`; `col` is scratch of `col_len`.
pub fn conv_relu_forward<T: Scalar>(
    g: &ConvGeom,
    batch: usize,
    weight: &[T],
    bias: &[T],
    input: &[T],
    col: &mut Vec<T>,
    out: &mut [T],
) {
    col.resize(g.col_len(batch), T::zero());
    im2col(g, batch, input, col);
    let n = batch * g.out_plane();
    gemm(
        T::one(),
        MatRef::new(weight, g.out_c, g.col_rows()),
        MatRef::new(col, g.col_rows(), n),
        T::zero(),
        out,
    );
    for (oc, row) in out.chunks_exact_mut(n).enumerate() {
        let b = bias[oc];
        for v in row {
            *v = (*v + b).max(T::zero());
        }
    }
}

/// Backward of one conv layer given the gradient w.r.t. its pre-activation
/// (`dpre`, already multiplied by the ReLU mask). Accumulates into `dw` and
/// `db`; writes (overwrites) `dinput` when requested.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    batch: usize,
    weight: &[T],
    input: &[T],
    dpre: &[T],
    col: &mut Vec<T>,
    dw: &mut [T],
    db: &mut [T],
    dinput: Option<&mut [T]>,
) {
    let n = batch * g.out_plane();
    col.resize(g.col_len(batch), T::zero());
    im2col(g, batch, input, col);
    let dout = MatRef::new(dpre, g.out_c, n);
    gemm(T::one(), dout, MatRef::new(col, g.col_rows(), n).t(), T::one(), dw);
    for (oc, row) in dpre.chunks_exact(n).enumerate() {
        db[oc] = db[oc] + row.iter().copied().sum::<T>();
    }
    if let Some(dinput) = dinput {
        // Reuse the scratch for d(col).
        gemm(T::one(), MatRef::new(weight, g.out_c, g.col_rows()).t(), dout, T::zero(), col);
        dinput.fill(T::zero());
        col2im_add(g, batch, col, dinput);
    }
}

/// `y[B, out] = x[B, in] * Wᵀ + b`.
pub fn linear_forward<T: Scalar>(x: &[T], w: &[T], b: &[T], batch: usize, in_dim: usize, out_dim: usize, y: &mut [T]) {
    gemm(
        T::one(),
        MatRef::new(x, batch, in_dim),
        MatRef::new(w, out_dim, in_dim).t(),
        T::zero(),
        y,
    );
    for row in y.chunks_exact_mut(out_dim).take(batch) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v = *v + bb;
        }
    }
}

/// Accumulates `dW += dyᵀ x`, `db += Σ dy`; writes `dx = dy W` when requested.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let dy_m = MatRef::new(dy, batch, out_dim);
    gemm(T::one(), dy_m.t(), MatRef::new(x, batch, in_dim), T::one(), dw);
    for row in dy.chunks_exact(out_dim).take(batch) {
        for (d, &v) in db.iter_mut().zip(row) {
            *d = *d + v;
        }
    }
    if let Some(dx) = dx {
        gemm(T::one(), dy_m, MatRef::new(w, out_dim, in_dim), T::zero(), dx);
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// GRU intermediates for one step, each `[B, H]`.
#[derive(Clone, Debug, Default)]
pub struct GruCache<T> {
    pub r: Vec<T>,
    pub z: Vec<T>,
    pub n: Vec<T>,
    /// `W_hn h + b_hn`, the recurrent part of the candidate before gating.
    pub gh_n: Vec<T>,
}

/// Standard GRU cell (reset gate applied after the recurrent product):
/// `r = σ(W_ir x + b_ir + W_hr h + b_hr)`, `z = σ(…)`,
/// `n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))`, `h' = (1 - z) ⊙ n + z ⊙ h`.
/// Gate rows are ordered `r, z, n` in the weight matrices.
#[allow(clippy::too_many_arguments)]
pub fn gru_forward<T: Scalar>(
    x: &[T],
    h: &[T],
    w_ih: &[T],
    w_hh: &[T],
    b_ih: &[T],
    b_hh: &[T],
    batch: usize,
    in_dim: usize,
    hidden: usize,
    h_out: &mut [T],
    cache: &mut GruCache<T>,
) {
    let h3 = 3 * hidden;
    let mut gi = vec![T::zero(); batch * h3];
    let mut gh = vec![T::zero(); batch * h3];
    linear_forward(x, w_ih, b_ih, batch, in_dim, h3, &mut gi);
    linear_forward(h, w_hh, b_hh, batch, hidden, h3, &mut gh);
    let len = batch * hidden;
    for buf in [&mut cache.r, &mut cache.z, &mut cache.n, &mut cache.gh_n] {
        buf.resize(len, T::zero());
    }
    for b in 0..batch {
        let gi = &gi[b * h3..(b + 1) * h3];
        let gh = &gh[b * h3..(b + 1) * h3];
        for j in 0..hidden {
            let i = b * hidden + j;
            let r = sigmoid(gi[j] + gh[j]);
            let z = sigmoid(gi[hidden + j] + gh[hidden + j]);
            let ghn = gh[2 * hidden + j];
            let n = (gi[2 * hidden + j] + r * ghn).tanh();
            h_out[i] = (T::one() - z) * n + z * h[i];
            cache.r[i] = r;
            cache.z[i] = z;
            cache.n[i] = n;
            cache.gh_n[i] = ghn;
        }
    }
}

/// Backward of [`gru_forward`]. Accumulates parameter gradients; writes the
/// gradients w.r.t. the input `dx` and the previous hidden state `dh_prev`.
#[allow(clippy::too_many_arguments)]
pub fn gru_backward<T: Scalar>(
    x: &[T],
    h: &[T],
    w_ih: &[T],
    w_hh: &[T],
    cache: &GruCache<T>,
    dh_out: &[T],
    batch: usize,
    in_dim: usize,
    hidden: usize,
    grads: [&mut [T]; 4],
    dx: &mut [T],
    dh_prev: &mut [T],
) {
    let [dw_ih, dw_hh, db_ih, db_hh] = grads;
    let h3 = 3 * hidden;
    let mut dgi = vec![T::zero(); batch * h3];
    let mut dgh = vec![T::zero(); batch * h3];
    for b in 0..batch {
        for j in 0..hidden {
            let i = b * hidden + j;
            let (r, z, n, ghn) = (cache.r[i], cache.z[i], cache.n[i], cache.gh_n[i]);
            let dh = dh_out[i];
            let dn_pre = dh * (T::one() - z) * (T::one() - n * n);
            let dz_pre = dh * (h[i] - n) * z * (T::one() - z);
            let dr_pre = dn_pre * ghn * r * (T::one() - r);
            let o = b * h3;
            dgi[o + j] = dr_pre;
            dgh[o + j] = dr_pre;
            dgi[o + hidden + j] = dz_pre;
            dgh[o + hidden + j] = dz_pre;
            dgi[o + 2 * hidden + j] = dn_pre;
            dgh[o + 2 * hidden + j] = dn_pre * r;
            dh_prev[i] = dh * z;
        }
    }
    linear_backward(x, w_ih, &dgi, batch, in_dim, h3, dw_ih, db_ih, Some(dx));
    let mut dh_rec = vec![T::zero(); batch * hidden];
    linear_backward(h, w_hh, &dgh, batch, hidden, h3, dw_hh, db_hh, Some(&mut dh_rec));
    for (d, v) in dh_prev.iter_mut().zip(dh_rec) {
        *d = *d + v;
    }
}
