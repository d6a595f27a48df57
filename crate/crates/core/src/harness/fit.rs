use crate::error::{KornError, Result};

/// `log K = β log h + intercept` by ordinary least squares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_exponent(rows: &[(f64, f64)]) -> Result<ExponentFit> {
    if rows.len() < 3 {
        return Err(KornError::Data(format!("need at least 3 rows to fit, got {}", rows.len())));
    }
    if let Some(&(h, k)) = rows.iter().find(|(h, k)| !(*k > 0.0) || !(*h > 0.0)) {
        return Err(KornError::Data(format!("non-positive row (h = {h}, K = {k})")));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(KornError::Data("all h values coincide".into()));
    }
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - beta * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ExponentFit {
        beta,
        intercept,
        r_squared,
    })
}

/// Slopes between consecutive rows, in the order given.
pub fn local_slopes(rows: &[(f64, f64)]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_power_laws() {
        let f = fit_exponent(&[(0.1, 0.7), (0.05, 0.35), (0.025, 0.175)]).unwrap();
        assert!((f.beta - 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
        let rows: Vec<_> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h: &f64| (h, 3.0 * h.powf(1.5))).collect();
        let f = fit_exponent(&rows).unwrap();
        assert!((f.beta - 1.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_data_and_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let hs = crate::harness::geometric(0.1, 0.0167, 8);
        for _ in 0..100 {
            let rows: Vec<_> = hs
                .iter()
                .map(|&h| (h, 2.0 * h.powf(1.5) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))))
                .collect();
            assert!((fit_exponent(&rows).unwrap().beta - 1.5).abs() <= 0.05);
        }
        assert!(fit_exponent(&[(0.1, 1.0), (0.05, 0.0), (0.02, 1.0)]).is_err());
        assert!(fit_exponent(&[(0.1, 1.0), (0.05, 1.0)]).is_err());
        let s = local_slopes(&[(0.1, 0.01), (0.01, 0.001)]);
        assert!((s[0] - 1.0).abs() < 1e-12);
    }
}
