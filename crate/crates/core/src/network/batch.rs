//! Batched jet evaluation of the dense network with a manual reverse pass.
//!
//! Activations are stored row-major as `[unit][point][k]`, so one dense
//! layer is a single matrix product over `points·(K+1)` columns: the
//! affine map acts on every Taylor coefficient alike and the bias only
//! touches `k = 0`. `tanh` is applied per `(unit, point)` coefficient group
//! using closed forms for `K ≤ 3`, and its vector-Jacobian product is the
//! exact reverse of those forms.

use crate::diffengine::{layer_views, Jet, LayerShape, MAX_ORDER};

/// A batch of input feature jets, `[feature][point][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    order: usize,
    points: usize,
    features: usize,
    data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(order: usize, points: usize, features: usize) -> Self {
        assert!(order <= MAX_ORDER);
        JetBatch {
            order,
            points,
            features,
            data: vec![0.0; features * points * (order + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn features(&self) -> usize {
        self.features
    }

    fn cols(&self) -> usize {
        self.points * (self.order + 1)
    }

    pub fn set(&mut self, feature: usize, point: usize, jet: &Jet) {
        assert_eq!(jet.order(), self.order);
        let k1 = self.order + 1;
        let start = feature * self.cols() + point * k1;
        self.data[start..start + k1].copy_from_slice(jet.coeffs());
    }

    pub fn get(&self, feature: usize, point: usize) -> Jet {
        let k1 = self.order + 1;
        let start = feature * self.cols() + point * k1;
        Jet::from_coeffs(&self.data[start..start + k1])
    }

    pub fn from_features(order: usize, rows: &[Vec<Jet>]) -> Self {
        let points = rows.len();
        let features = rows.first().map_or(0, Vec::len);
        let mut b = JetBatch::zeros(order, points, features);
        for (p, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), features);
            for (f, jet) in row.iter().enumerate() {
                b.set(f, p, jet);
            }
        }
        b
    }
}

/// Stored activations of one batched forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    order: usize,
    points: usize,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    /// Post-activations of hidden layers.
    post: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    /// Output jets, `[point][k]`.
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn output_jet(&self, point: usize) -> Jet {
        let k1 = self.order + 1;
        Jet::from_coeffs(&self.output[point * k1..(point + 1) * k1])
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// `c = alpha·a·b + beta·c` on row-major blocks with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= (m - 1) * rsa + (k.max(1) - 1) * csa + 1);
    debug_assert!(c.len() >= m * n);
    // SAFETY: the strides describe blocks lying inside the given slices,
    // checked above in debug builds and by the callers' shape bookkeeping.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[inline]
fn tanh_group(z: &[f64], y: &mut [f64]) {
    let y0 = z[0].tanh();
    let s = 1.0 - y0 * y0;
    y[0] = y0;
    match z.len() {
        1 => {}
        2 => y[1] = s * z[1],
        3 => {
            y[1] = s * z[1];
            y[2] = s * z[2] - y0 * s * z[1] * z[1];
        }
        4 => {
            let (z1, z2, z3) = (z[1], z[2], z[3]);
            y[1] = s * z1;
            y[2] = s * z2 - y0 * s * z1 * z1;
            y[3] = s * z3 - 2.0 * y0 * s * z1 * z2 + (2.0 * y0 * y0 * s - s * s) * z1 * z1 * z1 / 3.0;
        }
        _ => unreachable!("jet order above {MAX_ORDER}"),
    }
}

/// Reverse of [`tanh_group`]: `dz = (∂y/∂z)ᵀ dy`.
#[inline]
fn tanh_group_vjp(z: &[f64], y0: f64, dy: &[f64], dz: &mut [f64]) {
    let s = 1.0 - y0 * y0;
    // adjoints of the intermediates y0 (explicit use) and s
    let mut gy0 = dy[0];
    let mut gs = 0.0;
    match z.len() {
        1 => {}
        2 => {
            gs += dy[1] * z[1];
            dz[1] = dy[1] * s;
        }
        3 => {
            let (z1, z2) = (z[1], z[2]);
            gs += dy[1] * z1 + dy[2] * (z2 - y0 * z1 * z1);
            gy0 += dy[2] * (-s * z1 * z1);
            dz[1] = dy[1] * s + dy[2] * (-2.0 * y0 * s * z1);
            dz[2] = dy[2] * s;
        }
        4 => {
            let (z1, z2, z3) = (z[1], z[2], z[3]);
            let z1sq = z1 * z1;
            gs += dy[1] * z1
                + dy[2] * (z2 - y0 * z1sq)
                + dy[3] * (z3 - 2.0 * y0 * z1 * z2 + (2.0 * y0 * y0 - 2.0 * s) * z1sq * z1 / 3.0);
            gy0 += dy[2] * (-s * z1sq) + dy[3] * (-2.0 * s * z1 * z2 + 4.0 * y0 * s * z1sq * z1 / 3.0);
            dz[1] = dy[1] * s
                + dy[2] * (-2.0 * y0 * s * z1)
                + dy[3] * (-2.0 * y0 * s * z2 + (2.0 * y0 * y0 * s - s * s) * z1sq);
            dz[2] = dy[2] * s + dy[3] * (-2.0 * y0 * s * z1);
            dz[3] = dy[3] * s;
        }
        _ => unreachable!("jet order above {MAX_ORDER}"),
    }
    // dy0/dz0 = s, ds/dz0 = −2·y0·s
    dz[0] = gy0 * s - 2.0 * y0 * s * gs;
}

/// Forward pass over a batch of input jets.
pub fn forward_batch(layout: &[LayerShape], theta: &[f64], input: &JetBatch) -> Trace {
    assert_eq!(layout[0].fan_in, input.features, "input feature count");
    let views = layer_views(layout, theta);
    let k1 = input.order + 1;
    let cols = input.cols();
    let last = views.len() - 1;
    let mut pre = Vec::with_capacity(last);
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(last);
    let mut output = Vec::new();
    for (l, view) in views.iter().enumerate() {
        let (fan_in, fan_out) = (view.shape.fan_in, view.shape.fan_out);
        let a: &[f64] = if l == 0 { &input.data } else { &post[l - 1] };
        let mut z = vec![0.0; fan_out * cols];
        gemm(fan_out, fan_in, cols, view.weights, fan_in, 1, a, cols, 1, 0.0, &mut z);
        for (i, &b) in view.biases.iter().enumerate() {
            let row = &mut z[i * cols..(i + 1) * cols];
            for p in 0..input.points {
                row[p * k1] += b;
            }
        }
        if l < last {
            let mut y = vec![0.0; z.len()];
            for (zg, yg) in z.chunks_exact(k1).zip(y.chunks_exact_mut(k1)) {
                tanh_group(zg, yg);
            }
            pre.push(z);
            post.push(y);
        } else {
            output = z;
        }
    }
    Trace {
        order: input.order,
        points: input.points,
        pre,
        post,
        output,
    }
}

/// Accumulate `(∂output/∂θ)ᵀ d_output` into `grad`.
///
/// `d_output` is the adjoint of every output coefficient, `[point][k]`.
pub fn backward_batch(
    layout: &[LayerShape],
    theta: &[f64],
    input: &JetBatch,
    trace: &Trace,
    d_output: &[f64],
    grad: &mut [f64],
) {
    assert_eq!(d_output.len(), trace.output.len(), "output adjoint length");
    assert_eq!(grad.len(), theta.len(), "gradient length");
    let views = layer_views(layout, theta);
    let k1 = trace.order + 1;
    let cols = trace.points * k1;
    let mut offsets = Vec::with_capacity(layout.len());
    let mut off = 0;
    for s in layout {
        offsets.push(off);
        off += s.len();
    }
    let mut delta = d_output.to_vec();
    for l in (0..views.len()).rev() {
        let view = &views[l];
        let (fan_in, fan_out) = (view.shape.fan_in, view.shape.fan_out);
        let a: &[f64] = if l == 0 { &input.data } else { &trace.post[l - 1] };
        let w_off = offsets[l];
        let (gw, rest) = grad[w_off..w_off + view.shape.len()].split_at_mut(fan_in * fan_out);
        // dW += δ·aᵀ
        gemm(fan_out, cols, fan_in, &delta, cols, 1, a, 1, cols, 1.0, gw);
        for (i, gb) in rest.iter_mut().enumerate() {
            let row = &delta[i * cols..(i + 1) * cols];
            let mut acc = 0.0;
            for p in 0..trace.points {
                acc += row[p * k1];
            }
            *gb += acc;
        }
        if l == 0 {
            break;
        }
        // δ_prev = tanh'ᵀ (Wᵀ δ)
        let mut da = vec![0.0; fan_in * cols];
        gemm(fan_in, fan_out, cols, view.weights, 1, fan_in, &delta, cols, 1, 0.0, &mut da);
        let z = &trace.pre[l - 1];
        let y = &trace.post[l - 1];
        let mut next = vec![0.0; da.len()];
        for (((zg, yg), dag), ng) in z
            .chunks_exact(k1)
            .zip(y.chunks_exact(k1))
            .zip(da.chunks_exact(k1))
            .zip(next.chunks_exact_mut(k1))
        {
            tanh_group_vjp(zg, yg[0], dag, ng);
        }
        delta = next;
    }
}
