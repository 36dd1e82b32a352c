use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::CorrelatedField;
use crate::partition::{m_of_t, ComplexTemperature};

/// Shifted leaf positions `x_k - m(t)`, sorted decreasing, each with the
/// unit-circle mark `e^{i (sqrt(1 - rho^2) tau z_k - rho tau m(t))}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalSample {
    pub points: Vec<f64>,
    pub marks: Vec<Complex64>,
    pub t: f64,
    pub rho: f64,
    pub tau: f64,
}

impl ExtremalSample {
    pub fn from_field(field: &CorrelatedField<'_>, tau: f64) -> Result<Self> {
        let t = field.horizon();
        let m = m_of_t(t)?;
        let rho = field.rho();
        let w = (1.0 - rho * rho).max(0.0).sqrt();
        let x = field.x();
        let mut order: Vec<usize> = (0..x.len()).collect();
        // Decreasing position; equal positions keep leaf order.
        order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        let points = order.iter().map(|&k| x[k] - m).collect();
        let marks = order
            .iter()
            .map(|&k| {
                let zk = field.z().map_or(0.0, |z| z[k]);
                Complex64::from_polar(1.0, w * tau * zk - rho * tau * m)
            })
            .collect();
        Ok(Self {
            points,
            marks,
            t,
            rho,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn extremal_sample(field: &CorrelatedField<'_>, tau: f64) -> Result<ExtremalSample> {
    ExtremalSample::from_field(field, tau)
}

/// `sum_{p > -A} e^{beta p}`.
pub fn phi_functional(points: &[f64], beta: ComplexTemperature, a: f64) -> Result<Complex64> {
    if !(a > 0.0) {
        return Err(invalid(format!("A must be positive, got {a}")));
    }
    let b = beta.as_complex();
    Ok(points
        .iter()
        .filter(|&&p| p > -a)
        .map(|&p| (b * p).exp())
        .sum())
}

/// `sum_{p > -A} e^{(sigma + i rho tau) p} mark`.
pub fn phi_tilde_functional(
    sample: &ExtremalSample,
    beta: ComplexTemperature,
    rho: f64,
    a: f64,
) -> Result<Complex64> {
    if !(a > 0.0) {
        return Err(invalid(format!("A must be positive, got {a}")));
    }
    if sample.points.len() != sample.marks.len() {
        return Err(Error::State(format!(
            "{} points but {} marks",
            sample.points.len(),
            sample.marks.len()
        )));
    }
    let lambda = beta.lambda(rho);
    Ok(sample
        .points
        .iter()
        .zip(&sample.marks)
        .filter(|(&p, _)| p > -a)
        .map(|(&p, &mark)| (lambda * p).exp() * mark)
        .sum())
}
