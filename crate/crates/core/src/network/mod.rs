//! Feed-forward trial networks `f(x, t, θ)`.
//!
//! Dense layers with `tanh` on every hidden layer and a linear scalar
//! output. The spatial input may pass through a periodic embedding layer,
//! which makes the output (and every x-derivative) periodic by
//! construction. Two evaluation routes share the same parameter layout:
//! [`forward`] pushes jets of any [`JetScalar`] through the layers one unit
//! at a time, and [`batch`] runs whole batches of jets through dense matrix
//! products with a hand-written reverse pass.

pub mod batch;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffengine::{layer_views, Jet, JetScalar, LayerShape, ParameterVector};
use crate::error::{Error, Result};

/// `sin(kωx), cos(kωx)` features for `k = 1..=k_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicEmbedding {
    omega: f64,
    k_max: usize,
}

impl PeriodicEmbedding {
    pub fn new(omega: f64, k_max: usize) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::config(format!("embedding omega must be > 0, got {omega}")));
        }
        if k_max == 0 {
            return Err(Error::config("embedding needs k_max >= 1"));
        }
        Ok(PeriodicEmbedding { omega, k_max })
    }

    /// Embedding whose period is the length of `domain`.
    pub fn for_period(period: f64) -> Result<Self> {
        PeriodicEmbedding::new(2.0 * std::f64::consts::PI / period, 1)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn features(&self) -> usize {
        2 * self.k_max
    }

    pub fn embed(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.features());
        for k in 1..=self.k_max {
            let (s, c) = (k as f64 * self.omega * x).sin_cos();
            out.push(s);
            out.push(c);
        }
        out
    }

    pub fn embed_jet<T: JetScalar>(&self, x: &Jet<T>) -> Vec<Jet<T>> {
        let mut out = Vec::with_capacity(self.features());
        for k in 1..=self.k_max {
            let (s, c) = x.scale(k as f64 * self.omega).sin_cos();
            out.push(s);
            out.push(c);
        }
        out
    }
}

/// How the spatial coordinate enters the network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialInput {
    /// No spatial coordinate (ODE problems).
    None,
    Raw,
    Periodic(PeriodicEmbedding),
}

impl SpatialInput {
    pub fn features(&self) -> usize {
        match self {
            SpatialInput::None => 0,
            SpatialInput::Raw => 1,
            SpatialInput::Periodic(e) => e.features(),
        }
    }
}

/// How the time coordinate enters the network: `(t − shift)·scale`.
/// The identity map feeds `t` raw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeInput {
    pub shift: f64,
    pub scale: f64,
}

impl TimeInput {
    pub const RAW: TimeInput = TimeInput {
        shift: 0.0,
        scale: 1.0,
    };

    pub fn is_raw(&self) -> bool {
        *self == Self::RAW
    }
}

impl Default for TimeInput {
    fn default() -> Self {
        Self::RAW
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConfig {
    /// Number of hidden layers.
    pub depth: usize,
    /// Units per hidden layer.
    pub width: usize,
    pub spatial: SpatialInput,
    pub time: TimeInput,
}

impl NetworkConfig {
    pub fn new(depth: usize, width: usize, spatial: SpatialInput) -> Result<Self> {
        let cfg = NetworkConfig {
            depth,
            width,
            spatial,
            time: TimeInput::RAW,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 {
            return Err(Error::config(format!(
                "network needs depth >= 1 and width >= 1, got {}x{}",
                self.depth, self.width
            )));
        }
        if !(self.time.scale.is_finite() && self.time.scale != 0.0 && self.time.shift.is_finite())
        {
            return Err(Error::config("time input map must be finite and invertible"));
        }
        Ok(())
    }

    pub fn with_time_input(mut self, time: TimeInput) -> Self {
        self.time = time;
        self
    }

    /// Embedded spatial features plus the time input.
    pub fn input_features(&self) -> usize {
        self.spatial.features() + 1
    }

    pub fn outputs(&self) -> usize {
        1
    }

    pub fn layout(&self) -> Vec<LayerShape> {
        let mut layout = Vec::with_capacity(self.depth + 1);
        layout.push(LayerShape::new(self.input_features(), self.width));
        for _ in 1..self.depth {
            layout.push(LayerShape::new(self.width, self.width));
        }
        layout.push(LayerShape::new(self.width, self.outputs()));
        layout
    }

    /// Input feature jets for a point. `x` is ignored for ODE networks.
    pub fn features<T: JetScalar>(&self, x: Option<&Jet<T>>, t: &Jet<T>) -> Vec<Jet<T>> {
        let mut out = Vec::with_capacity(self.input_features());
        match (self.spatial, x) {
            (SpatialInput::None, _) => {}
            (SpatialInput::Raw, Some(x)) => out.push(*x),
            (SpatialInput::Periodic(e), Some(x)) => out.extend(e.embed_jet(x)),
            (_, None) => panic!("spatial network evaluated without x"),
        }
        let t_in = if self.time.is_raw() {
            *t
        } else {
            t.shift(-self.time.shift).scale(self.time.scale)
        };
        out.push(t_in);
        out
    }
}

/// Glorot-normal weights (variance `2/(fan_in+fan_out)`), zero biases.
pub fn glorot_init(config: &NetworkConfig, rng_seed: u64) -> ParameterVector {
    let layout = config.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut values = Vec::with_capacity(crate::diffengine::layout_len(&layout));
    for shape in &layout {
        let std = (2.0 / (shape.fan_in + shape.fan_out) as f64).sqrt();
        for _ in 0..shape.weight_len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(std * z);
        }
        values.extend(std::iter::repeat_n(0.0, shape.fan_out));
    }
    ParameterVector::new(layout, values).expect("layout length")
}

/// Scalar-times-jet, coefficientwise.
fn scale_jet<T: JetScalar>(a: &Jet<T>, w: T) -> Jet<T> {
    let mut c = [T::from_f64(0.0); crate::diffengine::MAX_ORDER + 1];
    for (k, ak) in a.coeffs().iter().enumerate() {
        c[k] = *ak * w;
    }
    Jet::from_coeffs(&c[..=a.order()])
}

/// Generic forward pass; `theta` may be plain values or tape variables.
pub fn forward_generic<T: JetScalar>(
    layout: &[LayerShape],
    theta: &[T],
    features: &[Jet<T>],
) -> Result<Jet<T>> {
    let first = layout
        .first()
        .ok_or_else(|| Error::contract("empty network layout"))?;
    if features.len() != first.fan_in {
        return Err(Error::contract(format!(
            "network expects {} input features, got {}",
            first.fan_in,
            features.len()
        )));
    }
    let order = features[0].order();
    if features.iter().any(|f| f.order() != order) {
        return Err(Error::contract("input jets of differing orders"));
    }
    if theta.len() != crate::diffengine::layout_len(layout) {
        return Err(Error::contract("parameter length does not match layout"));
    }
    let views = layer_views(layout, theta);
    let last = views.len() - 1;
    let mut act: Vec<Jet<T>> = features.to_vec();
    for (l, view) in views.iter().enumerate() {
        let fan_in = view.shape.fan_in;
        let mut next = Vec::with_capacity(view.shape.fan_out);
        for i in 0..view.shape.fan_out {
            let row = &view.weights[i * fan_in..(i + 1) * fan_in];
            let mut z = Jet::constant(view.biases[i], order);
            for (w, a) in row.iter().zip(&act) {
                z = z + scale_jet(a, *w);
            }
            next.push(if l < last { z.tanh() } else { z });
        }
        act = next;
    }
    Ok(act[0])
}

/// Forward pass with plain parameter values.
pub fn forward(params: &ParameterVector, features: &[Jet]) -> Result<Jet> {
    forward_generic(params.layout(), params.values(), features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cfg() -> NetworkConfig {
        NetworkConfig::new(
            2,
            8,
            SpatialInput::Periodic(PeriodicEmbedding::new(1.0, 1).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn glorot_is_deterministic_with_zero_biases() {
        let a = glorot_init(&cfg(), 17);
        let b = glorot_init(&cfg(), 17);
        assert_eq!(a, b);
        assert_ne!(a, glorot_init(&cfg(), 18));
        for layer in a.layers() {
            assert!(layer.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn glorot_variance_for_square_layers() {
        let net = NetworkConfig::new(4, 32, SpatialInput::Raw).unwrap();
        let p = glorot_init(&net, 3);
        let layers = p.layers();
        let w = layers[1].weights;
        assert!(w.len() >= 1024);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var - 1.0 / 32.0).abs() < 0.2 / 32.0, "variance {var}");
    }

    #[test]
    fn embedding_examples() {
        let e = PeriodicEmbedding::new(1.0, 1).unwrap();
        assert_eq!(e.embed(0.0), vec![0.0, 1.0]);
        let v = e.embed(PI / 2.0);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        for x in [0.3, -2.0, 5.5] {
            let a = e.embed(x);
            let b = e.embed(x + 2.0 * PI);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        assert!(PeriodicEmbedding::new(0.0, 1).is_err());
        assert!(PeriodicEmbedding::new(1.0, 0).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let net = cfg();
        let p = ParameterVector::zeros(net.layout());
        let x = Jet::lift(0.4, 1.0, 3).unwrap();
        let t = Jet::constant(0.2, 3);
        let out = forward(&p, &net.features(Some(&x), &t)).unwrap();
        assert_eq!(out.coeffs(), &[0.0; 4]);
    }

    #[test]
    fn hand_chain_rule_single_unit() {
        // one hidden unit, scalar input: w1=1, b1=0, w2=2, b2=0.5
        let layout = vec![LayerShape::new(1, 1), LayerShape::new(1, 1)];
        let p = ParameterVector::new(layout, vec![1.0, 0.0, 2.0, 0.5]).unwrap();
        let out = forward(&p, &[Jet::lift(0.3, 1.0, 1).unwrap()]).unwrap();
        let y = 0.3f64.tanh();
        assert_abs_diff_eq!(out.coeff(0), 2.0 * y + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.coeff(1), 2.0 * (1.0 - y * y), epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = glorot_init(&cfg(), 1);
        let f = [Jet::lift(0.0, 1.0, 1).unwrap()];
        assert!(matches!(forward(&p, &f), Err(Error::Contract(_))));
    }

    #[test]
    fn output_is_linear_in_last_layer_weights() {
        let net = cfg();
        let p = glorot_init(&net, 5);
        let feats = net.features(Some(&Jet::constant(0.7, 0)), &Jet::constant(0.1, 0));
        let base = forward(&p, &feats).unwrap().value();
        let mut q = p.clone();
        let n = q.len();
        let width = net.width;
        for v in &mut q.values_mut()[n - 1 - width..n - 1] {
            *v *= 2.0;
        }
        let doubled = forward(&q, &feats).unwrap().value();
        // last bias is zero at init
        assert_abs_diff_eq!(doubled, 2.0 * base, epsilon = 1e-14);
    }
}
