//! Affine parametric coefficients `a(x, y) = a0(x) + sum_j y_j a_j(x)` and
//! `b(x, y) = b0(x) + sum_j y_j b_j(x)`, with a fixed `c(x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Smallest decay exponent accepted by the built-in problems.
pub const MIN_DECAY: f64 = 4.0 / 3.0;

/// Zeroth-term scale used whenever a decay exponent is below 2.
pub const ZEROTH_TERM_SCALE: f64 = PI * FRAC_1_SQRT_2;

/// A point of the parameter domain `[-1/2, 1/2]^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(-0.5..=0.5).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "parameter value {v} outside [-1/2, 1/2]"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(s: usize) -> Self {
        Self(vec![0.0; s])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Keeps the first `s` entries; the tail is implicitly zero.
    pub fn truncate(&self, s: usize) -> ParamVector {
        ParamVector(self.0[..s.min(self.0.len())].to_vec())
    }
}

/// Sum of `k^{-p}` over `k >= 1` for `p > 1`.
///
/// A direct partial sum up to `K` plus the Euler-Maclaurin tail; the first
/// omitted correction is far below `1e-10` for `K = 64`.
pub fn riemann_zeta(p: f64) -> f64 {
    assert!(p > 1.0, "zeta is only summed here for p > 1");
    const K: usize = 64;
    let head: f64 = (1..K).rev().map(|k| (k as f64).powf(-p)).sum();
    let n = K as f64;
    // tail sum_{k >= K} k^-p
    let b2 = 1.0 / 6.0;
    let b4 = -1.0 / 30.0;
    let b6 = 1.0 / 42.0;
    let d1 = p * n.powf(-p - 1.0);
    let d3 = p * (p + 1.0) * (p + 2.0) * n.powf(-p - 3.0);
    let d5 = p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) * n.powf(-p - 5.0);
    let tail = n.powf(1.0 - p) / (p - 1.0)
        + 0.5 * n.powf(-p)
        + b2 / 2.0 * d1
        + b4 / 24.0 * d3
        + b6 / 720.0 * d5;
    head + tail
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeriesKind {
    /// Constant coefficients without any parametric terms.
    Constant { a: f64, b: f64, c: f64 },
    /// `a_j(x) = j^{-p} sin(j pi x1) sin((j + 1) pi x2)`, `b = 0`, `c = 1`.
    Problem1 { decay: f64, a0: f64 },
    /// Four square islands with their own diffusion and absorption.
    Problem2(IslandParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandParams {
    /// Decays for the island and exterior diffusion, island and exterior absorption.
    pub decay_a: f64,
    pub decay_a_exterior: f64,
    pub decay_b: f64,
    pub decay_b_exterior: f64,
    pub sigma_a: f64,
    pub sigma_a_exterior: f64,
    pub sigma_b: f64,
    pub sigma_b_exterior: f64,
    /// Scale factors applied to the zeroth terms (1 or pi/sqrt(2)).
    pub scale_a: f64,
    pub scale_a_exterior: f64,
    pub scale_b: f64,
    pub scale_b_exterior: f64,
}

/// The full coefficient family together with its uniform bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSeries {
    pub kind: SeriesKind,
    pub a_min: f64,
    pub a_max: f64,
}

pub fn constant(a: f64, b: f64, c: f64) -> Result<CoefficientSeries> {
    if !(a > 0.0) || !(c > 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "constant coefficients need a > 0, b >= 0, c > 0 (got a={a}, b={b}, c={c})"
        )));
    }
    Ok(CoefficientSeries {
        kind: SeriesKind::Constant { a, b, c },
        a_min: a.min(c),
        a_max: a.max(b).max(c),
    })
}

pub fn problem1(decay: f64) -> Result<CoefficientSeries> {
    check_decay(decay)?;
    let a0 = if decay < 2.0 { ZEROTH_TERM_SCALE } else { 1.0 };
    problem1_with_a0(decay, a0)
}

/// Problem 1 with an explicit zeroth term.
pub fn problem1_with_a0(decay: f64, a0: f64) -> Result<CoefficientSeries> {
    if !(decay > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay {decay} must exceed 1"
        )));
    }
    let zeta = riemann_zeta(decay);
    let a_min = a0 - zeta / 2.0;
    if a_min <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "a_min = {a_min} <= 0 for decay {decay} and a0 = {a0}"
        )));
    }
    Ok(CoefficientSeries {
        kind: SeriesKind::Problem1 { decay, a0 },
        a_min: a_min.min(1.0),
        a_max: (a0 + zeta / 2.0).max(1.0),
    })
}

pub fn problem2(
    decay_a: f64,
    decay_a_exterior: f64,
    decay_b: f64,
    decay_b_exterior: f64,
) -> Result<CoefficientSeries> {
    for d in [decay_a, decay_a_exterior, decay_b, decay_b_exterior] {
        check_decay(d)?;
    }
    let scale = |d: f64| if d < 2.0 { ZEROTH_TERM_SCALE } else { 1.0 };
    let params = IslandParams {
        decay_a,
        decay_a_exterior,
        decay_b,
        decay_b_exterior,
        sigma_a: 0.01,
        sigma_a_exterior: 0.011,
        sigma_b: 2.0,
        sigma_b_exterior: 0.3,
        scale_a: scale(decay_a),
        scale_a_exterior: scale(decay_a_exterior),
        scale_b: scale(decay_b),
        scale_b_exterior: scale(decay_b_exterior),
    };
    let lower = |sigma: f64, scale: f64, decay: f64| sigma * (scale - riemann_zeta(decay) / 2.0);
    let upper = |sigma: f64, scale: f64, decay: f64| sigma * (scale + riemann_zeta(decay) / 2.0);
    let p = &params;
    let a_min = lower(p.sigma_a, p.scale_a, p.decay_a).min(lower(
        p.sigma_a_exterior,
        p.scale_a_exterior,
        p.decay_a_exterior,
    ));
    let b_min = lower(p.sigma_b, p.scale_b, p.decay_b).min(lower(
        p.sigma_b_exterior,
        p.scale_b_exterior,
        p.decay_b_exterior,
    ));
    if a_min <= 0.0 || b_min < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "island coefficients violate positivity (a_min = {a_min}, b_min = {b_min})"
        )));
    }
    let a_max = upper(p.sigma_a, p.scale_a, p.decay_a)
        .max(upper(
            p.sigma_a_exterior,
            p.scale_a_exterior,
            p.decay_a_exterior,
        ))
        .max(upper(p.sigma_b, p.scale_b, p.decay_b))
        .max(upper(
            p.sigma_b_exterior,
            p.scale_b_exterior,
            p.decay_b_exterior,
        ))
        .max(1.0);
    Ok(CoefficientSeries {
        kind: SeriesKind::Problem2(params),
        a_min: a_min.min(1.0),
        a_max,
    })
}

fn check_decay(decay: f64) -> Result<()> {
    if !(decay >= MIN_DECAY) {
        return Err(Error::InvalidParameter(format!(
            "decay {decay} below the minimum 4/3"
        )));
    }
    Ok(())
}

/// Closed-set membership in the union of the four islands.
pub fn in_islands(x: Point) -> bool {
    let band = |t: f64| (0.125..=0.375).contains(&t) || (0.625..=0.875).contains(&t);
    band(x[0]) && band(x[1])
}

/// Writes `sin(k theta)` for `k = 1..=out.len()` by repeated rotation.
fn sines(theta: f64, out: &mut [f64]) {
    let (s1, c1) = theta.sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    for v in out.iter_mut() {
        let next_s = s * c1 + c * s1;
        c = c * c1 - s * s1;
        s = next_s;
        *v = s;
    }
}

impl CoefficientSeries {
    pub fn name(&self) -> &'static str {
        match self.kind {
            SeriesKind::Constant { .. } => "constant",
            SeriesKind::Problem1 { .. } => "problem1",
            SeriesKind::Problem2(_) => "problem2",
        }
    }

    pub fn a0(&self, x: Point) -> f64 {
        match &self.kind {
            SeriesKind::Constant { a, .. } => *a,
            SeriesKind::Problem1 { a0, .. } => *a0,
            SeriesKind::Problem2(p) => {
                if in_islands(x) {
                    p.sigma_a * p.scale_a
                } else {
                    p.sigma_a_exterior * p.scale_a_exterior
                }
            }
        }
    }

    pub fn b0(&self, x: Point) -> f64 {
        match &self.kind {
            SeriesKind::Constant { b, .. } => *b,
            SeriesKind::Problem1 { .. } => 0.0,
            SeriesKind::Problem2(p) => {
                if in_islands(x) {
                    p.sigma_b * p.scale_b
                } else {
                    p.sigma_b_exterior * p.scale_b_exterior
                }
            }
        }
    }

    pub fn c(&self, _x: Point) -> f64 {
        match &self.kind {
            SeriesKind::Constant { c, .. } => *c,
            _ => 1.0,
        }
    }

    /// Whether any `b_j`, `j >= 1`, is non-zero.
    pub fn has_parametric_absorption(&self) -> bool {
        matches!(self.kind, SeriesKind::Problem2(_))
    }

    pub fn has_parametric_diffusion(&self) -> bool {
        !matches!(self.kind, SeriesKind::Constant { .. })
    }

    /// Writes `a_j(x)` into `a[j - 1]` and `b_j(x)` into `b[j - 1]` for
    /// `j = 1..=a.len()`. `b` may be empty when absorption is not parametric.
    pub fn fill_terms(&self, x: Point, a: &mut [f64], b: &mut [f64]) {
        let s = a.len();
        debug_assert!(b.is_empty() || b.len() == s);
        match &self.kind {
            SeriesKind::Constant { .. } => {
                a.fill(0.0);
                b.fill(0.0);
            }
            SeriesKind::Problem1 { decay, .. } => {
                let mut s1 = vec![0.0; s];
                let mut s2 = vec![0.0; s + 1];
                sines(PI * x[0], &mut s1);
                sines(PI * x[1], &mut s2);
                for j in 1..=s {
                    a[j - 1] = (j as f64).powf(-decay) * s1[j - 1] * s2[j];
                }
                b.fill(0.0);
            }
            SeriesKind::Problem2(p) => {
                let inside = in_islands(x);
                let kmax = s.div_ceil(2) + 1;
                let mut s1 = vec![0.0; kmax];
                let mut s2 = vec![0.0; kmax + 1];
                sines(8.0 * PI * x[0], &mut s1);
                sines(8.0 * PI * x[1], &mut s2);
                for j in 1..=s {
                    let odd = j % 2 == 1;
                    if odd != inside {
                        a[j - 1] = 0.0;
                        if !b.is_empty() {
                            b[j - 1] = 0.0;
                        }
                        continue;
                    }
                    let k = if odd { j.div_ceil(2) } else { j / 2 };
                    let wave = s1[k - 1] * s2[k];
                    let (sa, da, sb, db) = if odd {
                        (p.sigma_a, p.decay_a, p.sigma_b, p.decay_b)
                    } else {
                        (
                            p.sigma_a_exterior,
                            p.decay_a_exterior,
                            p.sigma_b_exterior,
                            p.decay_b_exterior,
                        )
                    };
                    let kf = k as f64;
                    a[j - 1] = sa * kf.powf(-da) * wave;
                    if !b.is_empty() {
                        b[j - 1] = sb * kf.powf(-db) * wave;
                    }
                }
            }
        }
    }

    /// Truncated `(a(x, y), b(x, y))` with `s = y.dim()` terms.
    pub fn eval(&self, x: Point, y: &ParamVector) -> Result<(f64, f64)> {
        let s = y.dim();
        let mut at = vec![0.0; s];
        let mut bt = vec![0.0; s];
        self.fill_terms(x, &mut at, &mut bt);
        let ys = y.as_slice();
        let a = self.a0(x) + ys.iter().zip(&at).map(|(y, t)| y * t).sum::<f64>();
        let b = self.b0(x) + ys.iter().zip(&bt).map(|(y, t)| y * t).sum::<f64>();
        if !(a > 0.0) {
            return Err(Error::NonPositiveCoefficient {
                name: "a",
                value: a,
                x: x[0],
                y: x[1],
            });
        }
        Ok((a, b))
    }
}

/// Convenience wrapper matching the coefficient evaluation contract.
pub fn eval_coeffs(series: &CoefficientSeries, x: Point, y: &ParamVector) -> Result<(f64, f64)> {
    series.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zeta_matches_closed_forms() {
        assert_relative_eq!(riemann_zeta(2.0), PI * PI / 6.0, epsilon = 1e-12);
        assert_relative_eq!(riemann_zeta(4.0), PI.powi(4) / 90.0, epsilon = 1e-12);
    }

    #[test]
    fn zeta_matches_brute_force_at_slow_decay() {
        // direct partial sum to 10^6 plus the integral tail bracket
        let p = 4.0 / 3.0;
        let n = 1_000_000usize;
        let partial: f64 = (1..=n).rev().map(|k| (k as f64).powf(-p)).sum();
        let lo = partial + ((n + 1) as f64).powf(1.0 - p) / (p - 1.0);
        let hi = partial + (n as f64).powf(1.0 - p) / (p - 1.0);
        let z = riemann_zeta(p);
        assert!(z > lo - 1e-9 && z < hi + 1e-9, "{lo} {z} {hi}");
    }

    #[test]
    fn problem1_bounds() {
        let p = problem1(2.0).unwrap();
        // partial sums of 1/k^2 to 10^6 (tail < 1e-6)
        let z: f64 = (1..=1_000_000u64)
            .rev()
            .map(|k| 1.0 / (k as f64 * k as f64))
            .sum();
        assert!((p.a_min - (1.0 - z / 2.0)).abs() < 1e-6);
        assert!((p.a_min - 0.17753).abs() < 1e-5);
        let slow = problem1(4.0 / 3.0).unwrap();
        assert_eq!(
            slow.kind,
            SeriesKind::Problem1 {
                decay: 4.0 / 3.0,
                a0: ZEROTH_TERM_SCALE
            }
        );
        assert!(slow.a_min > 0.0);
        assert!(problem1(1.2).is_err());
        assert!(problem1_with_a0(1.2, 1.0).is_err());
    }

    #[test]
    fn problem1_term_sup_norm() {
        let p = problem1(2.0).unwrap();
        let mut max = 0.0f64;
        let mut terms = [0.0; 3];
        for i in 0..=512 {
            for k in 0..=512 {
                let x = [i as f64 / 512.0, k as f64 / 512.0];
                p.fill_terms(x, &mut terms, &mut []);
                max = max.max(terms[2].abs());
            }
        }
        assert!((max - 1.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn evaluation_examples() {
        let p = problem1(2.0).unwrap();
        let x = [0.3, 0.7];
        assert_eq!(p.eval(x, &ParamVector::zeros(10)).unwrap(), (1.0, 0.0));

        let y = ParamVector::new(vec![0.5]).unwrap();
        let (a, _) = p.eval([0.5, 0.5], &y).unwrap();
        assert!((a - 1.0).abs() < 1e-15);

        let y = ParamVector::new(vec![0.5, 0.5]).unwrap();
        let x = [0.25, 0.25];
        let direct = 1.0
            + 0.5 * (PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
            + 0.5 / 4.0 * (2.0 * PI * x[0]).sin() * (3.0 * PI * x[1]).sin();
        let (a, b) = p.eval(x, &y).unwrap();
        assert!((a - direct).abs() < 1e-14);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn truncation() {
        let y = ParamVector::new(vec![0.1, -0.2, 0.3]).unwrap();
        assert_eq!(y.truncate(3), y);
        assert_eq!(y.truncate(1).as_slice(), &[0.1]);
        let p = problem1(2.0).unwrap();
        let padded = ParamVector::new(vec![0.1, 0.0, 0.0]).unwrap();
        let x = [0.31, 0.47];
        assert_eq!(
            p.eval(x, &y.truncate(1)).unwrap(),
            p.eval(x, &padded).unwrap()
        );
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(ParamVector::new(vec![0.6]).is_err());
        assert!(ParamVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn problem2_zeroth_terms() {
        let p = problem2(2.0, 2.0, 2.0, 2.0).unwrap();
        let inside = [0.25, 0.25];
        let outside = [0.5, 0.5];
        assert!(in_islands(inside) && !in_islands(outside));
        assert_eq!((p.a0(inside), p.b0(inside)), (0.01, 2.0));
        assert_eq!((p.a0(outside), p.b0(outside)), (0.011, 0.3));
        let scaled = problem2(4.0 / 3.0, 2.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(scaled.a0(inside), 0.01 * ZEROTH_TERM_SCALE);
        assert_eq!(scaled.a0(outside), 0.011);
        assert!(problem2(1.0, 2.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn problem2_term_supports() {
        let p = problem2(2.0, 2.0, 2.0, 2.0).unwrap();
        let mut a = vec![0.0; 12];
        let mut b = vec![0.0; 12];
        // generic points strictly inside / outside the islands
        p.fill_terms([0.2013, 0.3107], &mut a, &mut b);
        for j in 1..=12 {
            if j % 2 == 0 {
                assert_eq!(a[j - 1], 0.0);
                assert_eq!(b[j - 1], 0.0);
            } else {
                assert!(a[j - 1] != 0.0);
            }
        }
        p.fill_terms([0.5013, 0.0607], &mut a, &mut b);
        for j in 1..=12 {
            if j % 2 == 1 {
                assert_eq!(a[j - 1], 0.0);
            } else {
                assert!(b[j - 1] != 0.0);
            }
        }
        // odd term j = 3 -> k = 2 on the island, sigma 0.01, decay 2
        let x = [0.2013, 0.3107];
        p.fill_terms(x, &mut a, &mut b);
        let w = 0.25 * (16.0 * PI * x[0]).sin() * (24.0 * PI * x[1]).sin();
        assert!((a[2] - 0.01 * w).abs() < 1e-16);
        assert!((b[2] - 2.0 * w).abs() < 1e-14);
    }

    #[test]
    fn rotation_sines_match_libm() {
        let mut out = vec![0.0; 70];
        for &t in &[1e-3, 0.3, 1.7, 3.1] {
            sines(t, &mut out);
            for (k, v) in out.iter().enumerate() {
                assert!((v - ((k + 1) as f64 * t).sin()).abs() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn problem1_respects_a_min(
            x1 in 0.0f64..1.0, x2 in 0.0f64..1.0,
            ys in proptest::collection::vec(-0.5f64..=0.5, 64),
        ) {
            for decay in [4.0 / 3.0, 2.0, 3.0] {
                let p = problem1(decay).unwrap();
                let (a, _) = p.eval([x1, x2], &ParamVector::new(ys.clone()).unwrap()).unwrap();
                prop_assert!(a >= p.a_min - 1e-12);
            }
        }

        #[test]
        fn evaluation_is_affine_in_y(
            x1 in 0.0f64..1.0, x2 in 0.0f64..1.0,
            y1 in proptest::collection::vec(-0.5f64..=0.5, 16),
            y2 in proptest::collection::vec(-0.5f64..=0.5, 16),
        ) {
            let mid: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 0.5 * (a + b)).collect();
            for p in [problem1(2.0).unwrap(), problem2(2.0, 2.0, 4.0 / 3.0, 2.0).unwrap()] {
                let x = [x1, x2];
                let e1 = p.eval(x, &ParamVector::new(y1.clone()).unwrap()).unwrap();
                let e2 = p.eval(x, &ParamVector::new(y2.clone()).unwrap()).unwrap();
                let em = p.eval(x, &ParamVector::new(mid.clone()).unwrap()).unwrap();
                prop_assert!((em.0 - 0.5 * (e1.0 + e2.0)).abs() < 1e-13);
                prop_assert!((em.1 - 0.5 * (e1.1 + e2.1)).abs() < 1e-13);
            }
        }
    }
}
