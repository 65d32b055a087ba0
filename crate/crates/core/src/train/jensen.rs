use crate::error::{domain_err, size_err, Result};

/// Outcome of [`jensen_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct JensenReport {
    /// `B ln(P/B) - sum ln S` per vector; never negative when the bound holds.
    pub gaps: Vec<f64>,
    /// Largest amount by which any vector exceeds the bound (0 if none).
    pub max_violation: f64,
    /// Vectors whose gap is below `-tolerance`.
    pub violations: usize,
}

/// Checks `sum_b ln S_b <= B ln(P / B)` for positive spectra sharing the
/// total power `P`, with equality exactly for the flat spectrum.
pub fn jensen_check(spectra: &[Vec<f64>], tolerance: f64) -> Result<JensenReport> {
    let Some(first) = spectra.first() else {
        return size_err("no spectra supplied");
    };
    let b = first.len();
    if b == 0 {
        return size_err("spectra must have at least one bin");
    }
    let total: f64 = first.iter().sum();
    let mut gaps = Vec::with_capacity(spectra.len());
    for (i, s) in spectra.iter().enumerate() {
        if s.len() != b {
            return size_err(format!("spectrum {i} has {} bins, expected {b}", s.len()));
        }
        if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return domain_err(format!("spectrum {i} has non-positive entry {v}"));
        }
        let p: f64 = s.iter().sum();
        if (p - total).abs() > 1e-9 * total {
            return domain_err(format!("spectrum {i} has power {p}, expected {total}"));
        }
        let lhs: f64 = s.iter().map(|v| v.ln()).sum();
        gaps.push(b as f64 * (p / b as f64).ln() - lhs);
    }
    let max_violation = gaps.iter().fold(0.0f64, |m, &g| m.max(-g));
    let violations = gaps.iter().filter(|&&g| g < -tolerance).count();
    Ok(JensenReport {
        gaps,
        max_violation,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn flat_vector_meets_bound() {
        let r = jensen_check(&[vec![0.25; 8]], 1e-12).unwrap();
        assert!(r.gaps[0].abs() < 1e-12);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn concentrated_vector_has_large_gap() {
        let b = 16;
        let p = 4.0;
        let tiny = 1e-12;
        let mut s: Vec<f64> = (0..b)
            .map(|i| if i < b / 2 { 2.0 * p / b as f64 } else { tiny })
            .collect();
        let excess: f64 = s.iter().sum::<f64>() - p;
        s[0] -= excess;
        let r = jensen_check(&[s], 1e-12).unwrap();
        assert!(r.gaps[0] > 100.0);
    }

    #[test]
    fn random_vectors_never_violate() {
        let mut rng = Rng::new(8);
        let p = 3.0;
        let spectra: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let raw: Vec<f64> = (0..12).map(|_| rng.next_f64() + 1e-6).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v * p / s).collect()
            })
            .collect();
        let r = jensen_check(&spectra, 1e-12).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_violation <= 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(jensen_check(&[vec![1.0, 0.0]], 1e-12).is_err());
        assert!(jensen_check(&[vec![1.0, 1.0], vec![1.0, 2.0]], 1e-12).is_err());
        assert!(jensen_check(&[], 1e-12).is_err());
    }
}
