//! Forward-mode Taylor jets layered under a reverse-mode tape.
//!
//! Input derivatives (up to third order, one direction at a time) come from
//! [`Jet`]; parameter gradients of anything built from jet coefficients come
//! from recording the same arithmetic on a [`Tape`] through [`Var`].

mod jet;
mod params;
mod tape;

pub use jet::{jet_arithmetic, Jet, JetOp, JetScalar, MAX_ORDER};
pub use params::{layer_views, layout_len, LayerShape, LayerView, ParameterVector};
pub use tape::{Adjoints, Op, Tape, Var};

use crate::error::{Error, Result};

/// Lift a value into a jet along one seed direction.
pub fn jet_lift(value: f64, seed: f64, order: usize) -> Result<Jet> {
    Jet::lift(value, seed, order)
}

/// Record every parameter as an independent tape variable.
pub fn params_on_tape<'t>(tape: &'t Tape, params: &ParameterVector) -> Vec<Var<'t>> {
    tape.vars(params.values())
}

/// `∂loss/∂θ` for a loss recorded on `tape` from the variables `theta`.
///
/// The loss must be a scalar, i.e. an order-0 jet.
pub fn loss_gradient(
    tape: &Tape,
    loss: &Jet<Var<'_>>,
    theta: &[Var<'_>],
    params: &ParameterVector,
) -> Result<ParameterVector> {
    if loss.order() != 0 {
        return Err(Error::contract(format!(
            "loss must be a scalar, got an order-{} jet",
            loss.order()
        )));
    }
    if theta.len() != params.len() {
        return Err(Error::contract("tape variables do not cover the parameters"));
    }
    let adj = tape.gradient(loss.value());
    params.with_values(theta.iter().map(|v| adj.of(v)).collect())
}
