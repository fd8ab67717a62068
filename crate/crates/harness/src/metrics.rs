use hcspinn::problems::ReferenceSolution;
use hcspinn::{Error, Result};

/// `‖pred − ref‖₂ / ‖ref‖₂` over every grid value.
pub fn relative_l2(pred: &[f64], reference: &ReferenceSolution) -> Result<f64> {
    relative_l2_values(pred, &reference.values)
}

pub fn relative_l2_values(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Contract(format!(
            "prediction has {} values, reference {}",
            pred.len(),
            reference.len()
        )));
    }
    let norm: f64 = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::UndefinedMetric("reference has zero norm".into()));
    }
    let diff: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// Relative L² restricted to time rows with `t ≤ t_max`.
pub fn relative_l2_until(pred: &[f64], reference: &ReferenceSolution, t_max: f64) -> Result<f64> {
    if pred.len() != reference.values.len() {
        return relative_l2(pred, reference);
    }
    let n = reference.row_len();
    let rows = reference.grid_t.iter().take_while(|&&t| t <= t_max).count();
    relative_l2_values(&pred[..rows * n], &reference.values[..rows * n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use hcspinn::problems::Provenance;

    fn reference() -> ReferenceSolution {
        ReferenceSolution::new("wave", vec![0.0, 1.0], vec![0.0, 0.5], vec![1.0, -2.0, 0.5, 3.0], Provenance::Analytic)
            .unwrap()
    }

    #[test]
    fn trivial_values() {
        let r = reference();
        assert_eq!(relative_l2(&r.values, &r).unwrap(), 0.0);
        assert_eq!(relative_l2(&[0.0; 4], &r).unwrap(), 1.0);
        let doubled: Vec<f64> = r.values.iter().map(|v| 2.0 * v).collect();
        assert!((relative_l2(&doubled, &r).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_is_undefined() {
        let r = ReferenceSolution::new("wave", vec![0.0], vec![0.0], vec![0.0], Provenance::Analytic).unwrap();
        assert!(matches!(relative_l2(&[1.0], &r), Err(Error::UndefinedMetric(_))));
        assert!(matches!(relative_l2(&[1.0, 2.0], &reference()), Err(Error::Contract(_))));
    }

    #[test]
    fn truncation_keeps_leading_rows() {
        let r = reference();
        let pred = [1.0, -2.0, 100.0, 100.0];
        assert_eq!(relative_l2_until(&pred, &r, 0.1).unwrap(), 0.0);
        assert!(relative_l2_until(&pred, &r, 0.5).unwrap() > 1.0);
    }
}
