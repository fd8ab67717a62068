use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Shape of one dense layer: `fan_in` inputs, `fan_out` outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl LayerShape {
    pub fn new(fan_in: usize, fan_out: usize) -> Self {
        LayerShape { fan_in, fan_out }
    }

    pub fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.fan_out
    }
}

/// Flat parameter storage with per-layer layout.
///
/// Each layer occupies a contiguous block: the row-major `fan_out × fan_in`
/// weight matrix followed by `fan_out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Vec<LayerShape>,
}

/// Borrowed view of one layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a, T = f64> {
    pub shape: LayerShape,
    pub weights: &'a [T],
    pub biases: &'a [T],
}

pub fn layout_len(layout: &[LayerShape]) -> usize {
    layout.iter().map(LayerShape::len).sum()
}

/// Split a flat slice into per-layer views.
pub fn layer_views<'a, T>(layout: &[LayerShape], values: &'a [T]) -> Vec<LayerView<'a, T>> {
    assert_eq!(values.len(), layout_len(layout), "parameter length mismatch");
    let mut views = Vec::with_capacity(layout.len());
    let mut offset = 0;
    for &shape in layout {
        let w = shape.weight_len();
        views.push(LayerView {
            shape,
            weights: &values[offset..offset + w],
            biases: &values[offset + w..offset + w + shape.fan_out],
        });
        offset += shape.len();
    }
    views
}

impl ParameterVector {
    pub fn new(layout: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let expected = layout_len(&layout);
        if values.len() != expected {
            return Err(Error::contract(format!(
                "parameter vector of length {} for a layout needing {expected}",
                values.len()
            )));
        }
        Ok(ParameterVector { values, layout })
    }

    pub fn zeros(layout: Vec<LayerShape>) -> Self {
        let n = layout_len(&layout);
        ParameterVector {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layers(&self) -> Vec<LayerView<'_>> {
        layer_views(&self.layout, &self.values)
    }

    /// Same layout, different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParameterVector::new(self.layout.clone(), values)
    }

    /// Per-layer `(weights, biases)` copies.
    pub fn unflatten(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.layers()
            .into_iter()
            .map(|l| (l.weights.to_vec(), l.biases.to_vec()))
            .collect()
    }

    pub fn flatten(layers: &[(Vec<f64>, Vec<f64>)], layout: Vec<LayerShape>) -> Result<Self> {
        if layers.len() != layout.len() {
            return Err(Error::contract("layer count does not match layout"));
        }
        let mut values = Vec::with_capacity(layout_len(&layout));
        for ((w, b), shape) in layers.iter().zip(&layout) {
            if w.len() != shape.weight_len() || b.len() != shape.fan_out {
                return Err(Error::contract(format!(
                    "layer block ({}, {}) does not match shape {}x{}",
                    w.len(),
                    b.len(),
                    shape.fan_in,
                    shape.fan_out
                )));
            }
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        ParameterVector::new(layout, values)
    }

    /// Text form: a header naming the layer shapes and seed, then one value
    /// per line in shortest round-trip notation.
    pub fn to_text(&self, seed: u64) -> String {
        let shapes: Vec<String> = self
            .layout
            .iter()
            .map(|s| format!("{}x{}", s.fan_in, s.fan_out))
            .collect();
        let mut out = format!("# params layers={} seed={seed}\n", shapes.join(","));
        for v in &self.values {
            writeln!(out, "{v:e}").unwrap();
        }
        out
    }

    /// Inverse of [`ParameterVector::to_text`]; returns the vector and seed.
    pub fn from_text(text: &str) -> Result<(Self, u64)> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty parameter file".into(),
        })?;
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let header = header
            .strip_prefix("# params ")
            .ok_or_else(|| bad(1, "missing '# params' header".into()))?;
        let mut layout = None;
        let mut seed = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("layers=") {
                let mut shapes = Vec::new();
                for s in v.split(',') {
                    let (a, b) = s
                        .split_once('x')
                        .ok_or_else(|| bad(1, format!("bad layer shape '{s}'")))?;
                    let fan_in = a.parse().map_err(|_| bad(1, format!("bad fan_in '{a}'")))?;
                    let fan_out = b.parse().map_err(|_| bad(1, format!("bad fan_out '{b}'")))?;
                    shapes.push(LayerShape::new(fan_in, fan_out));
                }
                layout = Some(shapes);
            } else if let Some(v) = field.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| bad(1, format!("bad seed '{v}'")))?);
            }
        }
        let layout = layout.ok_or_else(|| bad(1, "header lacks layers=".into()))?;
        let seed = seed.ok_or_else(|| bad(1, "header lacks seed=".into()))?;
        let mut values = Vec::with_capacity(layout_len(&layout));
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| bad(i + 1, format!("not a number: '{line}'")))?;
            if !v.is_finite() {
                return Err(bad(i + 1, "non-finite parameter".into()));
            }
            values.push(v);
        }
        let expected = layout_len(&layout);
        if values.len() != expected {
            return Err(bad(
                text.lines().count(),
                format!("{} values for a layout needing {expected}", values.len()),
            ));
        }
        Ok((ParameterVector { values, layout }, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> Vec<LayerShape> {
        vec![LayerShape::new(3, 4), LayerShape::new(4, 4), LayerShape::new(4, 1)]
    }

    #[test]
    fn length_matches_layout() {
        let p = ParameterVector::zeros(layout());
        assert_eq!(p.len(), 3 * 4 + 4 + 4 * 4 + 4 + 4 + 1);
        assert!(ParameterVector::new(layout(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn text_rejects_short_body() {
        let p = ParameterVector::zeros(layout());
        let text = p.to_text(9);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            ParameterVector::from_text(&truncated),
            Err(Error::Parse { .. })
        ));
    }

    proptest! {
        #[test]
        fn flatten_unflatten_and_text_round_trip(
            values in proptest::collection::vec(-1e3f64..1e3, 41),
            seed in any::<u64>(),
        ) {
            let p = ParameterVector::new(layout(), values).unwrap();
            let q = ParameterVector::flatten(&p.unflatten(), layout()).unwrap();
            prop_assert_eq!(&p, &q);
            let (r, s) = ParameterVector::from_text(&p.to_text(seed)).unwrap();
            prop_assert_eq!(p, r);
            prop_assert_eq!(seed, s);
        }
    }
}
