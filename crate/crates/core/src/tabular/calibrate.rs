//! Platt scaling: a one-dimensional logistic fit over classifier margins.

use super::model::Calibration;
use crate::datamodel::Label;
use crate::error::{Error, Result};
use crate::scalar::{softplus, Scalar};

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-9;
const HESS_RIDGE: f64 = 1e-12;

/// Fits `p = σ(a·margin + b)` by Newton's method with backtracking.
///
/// Targets are Platt's smoothed values `(N₊+1)/(N₊+2)` and `1/(N₋+2)`, which
/// keep the fit finite when the margins separate the classes perfectly.
pub fn calibrate<T: Scalar>(margins: &[T], labels: &[Label]) -> Result<Calibration<T>> {
    if margins.len() != labels.len() {
        return Err(Error::validation("margins and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|l| l.is_asd()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Training("calibration needs both classes".into()));
    }
    let m: Vec<f64> = margins.iter().map(|v| v.as_f64()).collect();
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let t: Vec<f64> = labels.iter().map(|l| if l.is_asd() { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        m.iter()
            .zip(&t)
            .map(|(&mi, &ti)| {
                let z = a * mi + b;
                softplus(z) - ti * z
            })
            .sum()
    };

    let mut a = 0.0_f64;
    let mut b = ((n_pos as f64 + 1.0) / (n_neg as f64 + 1.0)).ln();
    let mut f = objective(a, b);
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb) = (0.0, 0.0);
        let (mut haa, mut hab, mut hbb) = (HESS_RIDGE, 0.0, HESS_RIDGE);
        for (&mi, &ti) in m.iter().zip(&t) {
            let p = crate::scalar::sigmoid(a * mi + b);
            let r = p - ti;
            let w = p * (1.0 - p);
            ga += r * mi;
            gb += r;
            haa += w * mi * mi;
            hab += w * mi;
            hbb += w;
        }
        if ga.abs() < GRAD_TOL && gb.abs() < GRAD_TOL {
            break;
        }
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf <= f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(Calibration {
        a: T::lit(a),
        b: T::lit(b),
    })
}
