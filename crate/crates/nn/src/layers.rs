//! Transformer building blocks over row-major `[rows, dim]` activations.
//!
//! Each layer is a set of parameter handles into a [`ParamStore`]. Forward
//! passes return whatever the backward pass needs; backward passes add into
//! the parameter gradient buffers and return the input gradient.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::array::{DenseArray, ParamId, ParamStore};
use crate::linalg::{dot, gemm, matmul, matmul_nt, matmul_tn_acc, View, ViewMut};
use crate::real::Real;

const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-5;

/// Normal(0, 0.02) truncated to two standard deviations.
pub(crate) fn trunc_normal<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    (0..len)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * INIT_STD {
                break v;
            }
        })
        .collect()
}

pub(crate) fn register_normal<T: Real, R: Rng>(
    store: &mut ParamStore<T>,
    name: String,
    shape: &[usize],
    rng: &mut R,
) -> ParamId {
    let len = shape.iter().product();
    let values = trunc_normal(rng, len)
        .into_iter()
        .map(T::from_f64)
        .collect();
    store.register(name, DenseArray::from_values(shape, values).expect("shape"))
}

fn register_filled<T: Real>(
    store: &mut ParamStore<T>,
    name: String,
    len: usize,
    v: f64,
) -> ParamId {
    store.register(
        name,
        DenseArray::from_values(&[len], vec![T::from_f64(v); len]).expect("shape"),
    )
}

/// `y = x W + b` with `W` stored as `[in, out]`.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    pub fn register<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inp: usize,
        out: usize,
        rng: &mut R,
    ) -> Self {
        let weight = register_normal(store, format!("{name}.weight"), &[inp, out], rng);
        let bias = register_filled(store, format!("{name}.bias"), out, 0.0);
        Linear {
            weight,
            bias,
            inp,
            out,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &[T], rows: usize) -> Vec<T> {
        let mut y = matmul(x, rows, self.inp, store.values(self.weight), self.out);
        let b = store.values(self.bias);
        for row in y.chunks_exact_mut(self.out) {
            for (v, &bv) in row.iter_mut().zip(b) {
                *v = *v + bv;
            }
        }
        y
    }

    /// Accumulates weight and bias gradients, returns `dx` when asked.
    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        x: &[T],
        rows: usize,
        dy: &[T],
        want_dx: bool,
    ) -> Option<Vec<T>> {
        matmul_tn_acc(
            x,
            rows,
            self.inp,
            dy,
            self.out,
            store.get_mut(self.weight).grad_mut(),
        );
        let db = store.get_mut(self.bias).grad_mut();
        for row in dy.chunks_exact(self.out) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g = *g + d;
            }
        }
        want_dx.then(|| matmul_nt(dy, rows, self.out, store.values(self.weight), self.inp))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

pub(crate) struct LayerNormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

impl LayerNorm {
    pub fn register<T: Real>(store: &mut ParamStore<T>, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: register_filled(store, format!("{name}.gamma"), dim, 1.0),
            beta: register_filled(store, format!("{name}.beta"), dim, 0.0),
            dim,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &[T]) -> (Vec<T>, LayerNormCache<T>) {
        let d = self.dim;
        let inv_d = T::from_f64(1.0 / d as f64);
        let eps = T::from_f64(LN_EPS);
        let (gamma, beta) = (store.values(self.gamma), store.values(self.beta));
        let rows = x.len() / d;
        let mut y = vec![T::zero(); x.len()];
        let mut xhat = vec![T::zero(); x.len()];
        let mut rstd = Vec::with_capacity(rows);
        for r in 0..rows {
            let xr = &x[r * d..(r + 1) * d];
            let mean = xr.iter().fold(T::zero(), |a, &v| a + v) * inv_d;
            let var = xr
                .iter()
                .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
                * inv_d;
            let rs = T::one() / (var + eps).sqrt();
            rstd.push(rs);
            for j in 0..d {
                let h = (xr[j] - mean) * rs;
                xhat[r * d + j] = h;
                y[r * d + j] = h * gamma[j] + beta[j];
            }
        }
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        cache: &LayerNormCache<T>,
        dy: &[T],
    ) -> Vec<T> {
        let d = self.dim;
        let inv_d = T::from_f64(1.0 / d as f64);
        {
            let dg = store.get_mut(self.gamma).grad_mut();
            for (row_dy, row_h) in dy.chunks_exact(d).zip(cache.xhat.chunks_exact(d)) {
                for j in 0..d {
                    dg[j] = dg[j] + row_dy[j] * row_h[j];
                }
            }
        }
        {
            let db = store.get_mut(self.beta).grad_mut();
            for row_dy in dy.chunks_exact(d) {
                for j in 0..d {
                    db[j] = db[j] + row_dy[j];
                }
            }
        }
        let gamma = store.values(self.gamma);
        let mut dx = vec![T::zero(); dy.len()];
        for (r, &rs) in cache.rstd.iter().enumerate() {
            let dyr = &dy[r * d..(r + 1) * d];
            let hr = &cache.xhat[r * d..(r + 1) * d];
            let mut mean_dh = T::zero();
            let mut mean_dh_h = T::zero();
            for j in 0..d {
                let dh = dyr[j] * gamma[j];
                mean_dh = mean_dh + dh;
                mean_dh_h = mean_dh_h + dh * hr[j];
            }
            mean_dh = mean_dh * inv_d;
            mean_dh_h = mean_dh_h * inv_d;
            for j in 0..d {
                let dh = dyr[j] * gamma[j];
                dx[r * d + j] = rs * (dh - mean_dh - hr[j] * mean_dh_h);
            }
        }
        dx
    }
}

fn gelu_consts<T: Real>() -> (T, T) {
    (
        T::from_f64((2.0 / std::f64::consts::PI).sqrt()),
        T::from_f64(0.044715),
    )
}

/// Tanh-approximated GELU. Also returns the tanh values for the backward pass.
pub(crate) fn gelu<T: Real>(x: &[T]) -> (Vec<T>, Vec<T>) {
    let (c, a) = gelu_consts::<T>();
    let half = T::from_f64(0.5);
    let mut t: Vec<T> = x.iter().map(|&v| c * (v + a * v * v * v)).collect();
    T::tanh_in_place(&mut t);
    let y = x.iter().zip(&t).map(|(&v, &th)| half * v * (T::one() + th)).collect();
    (y, t)
}

pub(crate) fn gelu_backward<T: Real>(x: &[T], tanh: &[T], dy: &[T]) -> Vec<T> {
    let (c, a) = gelu_consts::<T>();
    let half = T::from_f64(0.5);
    let three_a = T::from_f64(3.0) * a;
    x.iter()
        .zip(tanh)
        .zip(dy)
        .map(|((&v, &t), &g)| {
            let dt = (T::one() - t * t) * c * (T::one() + three_a * v * v);
            g * (half * (T::one() + t) + half * v * dt)
        })
        .collect()
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows<T: Real>(x: &mut [T], width: usize) {
    for row in x.chunks_exact_mut(width) {
        T::softmax_in_place(row);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Attention {
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub dim: usize,
}

pub(crate) struct AttentionCache<T> {
    qkv: Vec<T>,
    /// `heads x rows x rows` attention weights.
    pub weights: Vec<T>,
    context: Vec<T>,
}

impl Attention {
    pub fn register<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Self {
        Attention {
            qkv: Linear::register(store, &format!("{name}.qkv"), dim, 3 * dim, rng),
            proj: Linear::register(store, &format!("{name}.proj"), dim, dim, rng),
            heads,
            dim,
        }
    }

    fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Q, K or V block of head `h` inside the fused `[rows, 3 dim]` buffer.
    fn qkv_view<'a, T>(&self, qkv: &'a [T], rows: usize, part: usize, h: usize) -> View<'a, T> {
        View {
            data: qkv,
            offset: part * self.dim + h * self.head_dim(),
            rows,
            cols: self.head_dim(),
            rs: 3 * self.dim,
            cs: 1,
        }
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &[T],
        rows: usize,
    ) -> (Vec<T>, AttentionCache<T>) {
        let dh = self.head_dim();
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        let qkv = self.qkv.forward(store, x, rows);
        let mut weights = vec![T::zero(); self.heads * rows * rows];
        let mut context = vec![T::zero(); rows * self.dim];
        for h in 0..self.heads {
            let a = &mut weights[h * rows * rows..(h + 1) * rows * rows];
            gemm(
                scale,
                self.qkv_view(&qkv, rows, 0, h),
                self.qkv_view(&qkv, rows, 1, h).t(),
                T::zero(),
                ViewMut::rm(a, rows, rows),
            );
            softmax_rows(a, rows);
            gemm(
                T::one(),
                View::rm(a, rows, rows),
                self.qkv_view(&qkv, rows, 2, h),
                T::zero(),
                ViewMut {
                    data: &mut context,
                    offset: h * dh,
                    rows,
                    cols: dh,
                    rs: self.dim,
                    cs: 1,
                },
            );
        }
        let out = self.proj.forward(store, &context, rows);
        (
            out,
            AttentionCache {
                qkv,
                weights,
                context,
            },
        )
    }

    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        x: &[T],
        rows: usize,
        cache: &AttentionCache<T>,
        dout: &[T],
    ) -> Vec<T> {
        let dh = self.head_dim();
        let d = self.dim;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        let dcontext = self
            .proj
            .backward(store, &cache.context, rows, dout, true)
            .expect("dx requested");
        let mut dqkv = vec![T::zero(); rows * 3 * d];
        let mut dscores = vec![T::zero(); rows * rows];
        for h in 0..self.heads {
            let a = &cache.weights[h * rows * rows..(h + 1) * rows * rows];
            let dctx_h = View {
                data: &dcontext,
                offset: h * dh,
                rows,
                cols: dh,
                rs: d,
                cs: 1,
            };
            // dA = dC_h V_h^T
            gemm(
                T::one(),
                dctx_h,
                self.qkv_view(&cache.qkv, rows, 2, h).t(),
                T::zero(),
                ViewMut::rm(&mut dscores, rows, rows),
            );
            // dV_h = A^T dC_h
            gemm(
                T::one(),
                View::rm(a, rows, rows).t(),
                dctx_h,
                T::zero(),
                ViewMut {
                    data: &mut dqkv,
                    offset: 2 * d + h * dh,
                    rows,
                    cols: dh,
                    rs: 3 * d,
                    cs: 1,
                },
            );
            // Softmax backward, folded with the score scale.
            for r in 0..rows {
                let ar = &a[r * rows..(r + 1) * rows];
                let dr = &mut dscores[r * rows..(r + 1) * rows];
                let pg = dot(ar, dr);
                for (g, &p) in dr.iter_mut().zip(ar) {
                    *g = p * (*g - pg) * scale;
                }
            }
            // dQ_h = dS K_h, dK_h = dS^T Q_h
            gemm(
                T::one(),
                View::rm(&dscores, rows, rows),
                self.qkv_view(&cache.qkv, rows, 1, h),
                T::zero(),
                ViewMut {
                    data: &mut dqkv,
                    offset: h * dh,
                    rows,
                    cols: dh,
                    rs: 3 * d,
                    cs: 1,
                },
            );
            gemm(
                T::one(),
                View::rm(&dscores, rows, rows).t(),
                self.qkv_view(&cache.qkv, rows, 0, h),
                T::zero(),
                ViewMut {
                    data: &mut dqkv,
                    offset: d + h * dh,
                    rows,
                    cols: dh,
                    rs: 3 * d,
                    cs: 1,
                },
            );
        }
        self.qkv
            .backward(store, x, rows, &dqkv, true)
            .expect("dx requested")
    }
}

/// Pre-norm encoder block: `x + attn(ln1(x))`, then `+ mlp(ln2(.))`.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

pub(crate) struct BlockCache<T> {
    ln1: LayerNormCache<T>,
    ln1_out: Vec<T>,
    pub attn: AttentionCache<T>,
    ln2: LayerNormCache<T>,
    ln2_out: Vec<T>,
    hidden_pre: Vec<T>,
    hidden_tanh: Vec<T>,
    hidden: Vec<T>,
}

impl Block {
    pub fn register<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        mlp_ratio: usize,
        rng: &mut R,
    ) -> Self {
        let ln1 = LayerNorm::register(store, &format!("{name}.ln1"), dim);
        let attn = Attention::register(store, &format!("{name}.attn"), dim, heads, rng);
        let ln2 = LayerNorm::register(store, &format!("{name}.ln2"), dim);
        let fc1 = Linear::register(store, &format!("{name}.mlp.fc1"), dim, dim * mlp_ratio, rng);
        let fc2 = Linear::register(store, &format!("{name}.mlp.fc2"), dim * mlp_ratio, dim, rng);
        Block {
            ln1,
            attn,
            ln2,
            fc1,
            fc2,
        }
    }

    /// Updates `x` in place.
    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &mut [T],
        rows: usize,
    ) -> BlockCache<T> {
        let (ln1_out, ln1) = self.ln1.forward(store, x);
        let (attn_out, attn) = self.attn.forward(store, &ln1_out, rows);
        x.iter_mut().zip(&attn_out).for_each(|(v, &a)| *v = *v + a);
        let (ln2_out, ln2) = self.ln2.forward(store, x);
        let hidden_pre = self.fc1.forward(store, &ln2_out, rows);
        let (hidden, hidden_tanh) = gelu(&hidden_pre);
        let mlp_out = self.fc2.forward(store, &hidden, rows);
        x.iter_mut().zip(&mlp_out).for_each(|(v, &m)| *v = *v + m);
        BlockCache {
            ln1,
            ln1_out,
            attn,
            ln2,
            ln2_out,
            hidden_pre,
            hidden_tanh,
            hidden,
        }
    }

    /// Takes the gradient at the block output, returns it at the block input.
    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        cache: &BlockCache<T>,
        rows: usize,
        dx: Vec<T>,
    ) -> Vec<T> {
        let dhidden = self
            .fc2
            .backward(store, &cache.hidden, rows, &dx, true)
            .expect("dx requested");
        let dpre = gelu_backward(&cache.hidden_pre, &cache.hidden_tanh, &dhidden);
        let dln2 = self
            .fc1
            .backward(store, &cache.ln2_out, rows, &dpre, true)
            .expect("dx requested");
        let mut dmid = self.ln2.backward(store, &cache.ln2, &dln2);
        dmid.iter_mut().zip(&dx).for_each(|(a, &b)| *a = *a + b);

        let dln1 = self
            .attn
            .backward(store, &cache.ln1_out, rows, &cache.attn, &dmid);
        let mut din = self.ln1.backward(store, &cache.ln1, &dln1);
        din.iter_mut().zip(&dmid).for_each(|(a, &b)| *a = *a + b);
        din
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_check(
        f: &dyn Fn(&ParamStore<f64>, &[f64]) -> f64,
        store: &mut ParamStore<f64>,
        x: &[f64],
        analytic_dx: &[f64],
    ) {
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            let fd = (f(store, &xp) - f(store, &xm)) / (2.0 * h);
            assert!(
                (fd - analytic_dx[i]).abs() < 1e-7,
                "dx[{i}]: {fd} vs {}",
                analytic_dx[i]
            );
        }
        let names: Vec<String> = store.names().to_vec();
        for name in names {
            let id = store.id_of(&name).unwrap();
            let analytic = store.get(id).grad().unwrap().to_vec();
            for i in 0..analytic.len() {
                let orig = store.get(id).values()[i];
                store.get_mut(id).values_mut()[i] = orig + h;
                let fp = f(store, x);
                store.get_mut(id).values_mut()[i] = orig - h;
                let fm = f(store, x);
                store.get_mut(id).values_mut()[i] = orig;
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - analytic[i]).abs() < 1e-7,
                    "{name}[{i}]: {fd} vs {}",
                    analytic[i]
                );
            }
        }
    }

    /// Weighted sum of outputs, so every output position carries a distinct gradient.
    fn probe(len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
            .collect()
    }

    fn input(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn scaled_store(store: &mut ParamStore<f64>) {
        // Larger weights than the 0.02 init so nonlinearities are exercised.
        for (_, a) in store.iter_mut() {
            a.values_mut()
                .iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v = *v * 20.0 + 0.01 * (i % 3) as f64);
        }
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::default();
        let lin = Linear::register(&mut store, "lin", 4, 3, &mut rng);
        scaled_store(&mut store);
        let x = input(5 * 4, 2);
        let w = probe(5 * 3);
        let f = |s: &ParamStore<f64>, x: &[f64]| {
            lin.forward(s, x, 5)
                .iter()
                .zip(&w)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let dx = lin.backward(&mut store, &x, 5, &w, true).unwrap();
        fd_check(&f, &mut store, &x, &dx);
    }

    #[test]
    fn layer_norm_gradients() {
        let mut store = ParamStore::default();
        let ln = LayerNorm::register(&mut store, "ln", 6);
        scaled_store(&mut store);
        let x = input(3 * 6, 3);
        let w = probe(3 * 6);
        let f = |s: &ParamStore<f64>, x: &[f64]| {
            ln.forward(s, x)
                .0
                .iter()
                .zip(&w)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let (_, cache) = ln.forward(&store, &x);
        let dx = ln.backward(&mut store, &cache, &w);
        fd_check(&f, &mut store, &x, &dx);
    }

    #[test]
    fn gelu_gradient_and_values() {
        assert_eq!(gelu(&[0.0f64]).0[0], 0.0);
        assert!((gelu(&[3.0f64]).0[0] - 2.99636).abs() < 1e-4);
        let x = input(20, 4).iter().map(|v| v * 4.0).collect::<Vec<_>>();
        let ones = vec![1.0; 20];
        let g = gelu_backward(&x, &gelu(&x).1, &ones);
        for i in 0..20 {
            let h = 1e-6;
            let fd = (gelu(&[x[i] + h]).0[0] - gelu(&[x[i] - h]).0[0]) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn attention_gradients_and_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::default();
        let attn = Attention::register(&mut store, "attn", 8, 2, &mut rng);
        scaled_store(&mut store);
        let rows = 5;
        let x = input(rows * 8, 6);
        let w = probe(rows * 8);
        let f = |s: &ParamStore<f64>, x: &[f64]| {
            attn.forward(s, x, rows)
                .0
                .iter()
                .zip(&w)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let (_, cache) = attn.forward(&store, &x, rows);
        for row in cache.weights.chunks_exact(rows) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let dx = attn.backward(&mut store, &x, rows, &cache, &w);
        fd_check(&f, &mut store, &x, &dx);
    }

    #[test]
    fn block_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::default();
        let block = Block::register(&mut store, "b", 8, 2, 2, &mut rng);
        scaled_store(&mut store);
        let rows = 4;
        let x = input(rows * 8, 8);
        let w = probe(rows * 8);
        let f = |s: &ParamStore<f64>, x: &[f64]| {
            let mut y = x.to_vec();
            block.forward(s, &mut y, rows);
            y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut y = x.clone();
        let cache = block.forward(&store, &mut y, rows);
        let dx = block.backward(&mut store, &cache, rows, w.clone());
        fd_check(&f, &mut store, &x, &dx);
    }

    #[test]
    fn truncated_init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = trunc_normal(&mut rng, 10_000);
        assert!(v.iter().all(|x| x.abs() <= 0.04));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 1e-3);
    }
}
