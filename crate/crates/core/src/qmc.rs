//! Randomly shifted rank-1 lattice rules and small point-set diagnostics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::ParamVector;

/// Default maximum number of points when a file does not state one.
pub const DEFAULT_MAX_N: u64 = 1 << 20;
pub const EMBEDDED_LABEL: &str = "lattice-39102-1024-1048576.3600";
const EMBEDDED: &str = include_str!("../data/lattice-39102-1024-1048576.3600.txt");

/// Tag separating i.i.d. sampling streams from shift streams.
pub const MC_STREAM_TAG: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingVector {
    z: Vec<u64>,
    max_n: u64,
    label: String,
}

impl GeneratingVector {
    /// Parses one component per line; lines starting with `#` are comments,
    /// except `# max_n: <N>` which sets the largest supported point count.
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut z = Vec::new();
        let mut max_n = DEFAULT_MAX_N;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("max_n:") {
                    max_n = value.trim().parse().map_err(|_| {
                        Error::GeneratingVector(format!(
                            "line {}: bad max_n {:?}",
                            lineno + 1,
                            value.trim()
                        ))
                    })?;
                }
                continue;
            }
            let value: u64 = line.parse().map_err(|_| {
                Error::GeneratingVector(format!(
                    "line {}: not a positive integer: {line:?}",
                    lineno + 1
                ))
            })?;
            z.push(value);
        }
        if z.is_empty() {
            return Err(Error::GeneratingVector(format!("{label}: no components")));
        }
        if !max_n.is_power_of_two() {
            return Err(Error::GeneratingVector(format!(
                "max_n {max_n} is not a power of 2"
            )));
        }
        if let Some((j, &bad)) = z
            .iter()
            .enumerate()
            .find(|(_, &v)| v % 2 == 0 || v >= max_n)
        {
            return Err(Error::GeneratingVector(format!(
                "component {} = {bad} must be odd and below {max_n}",
                j + 1
            )));
        }
        Ok(Self {
            z,
            max_n,
            label: label.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, &label)
    }

    /// The vendored 3600-dimensional embedded rule for up to `2^20` points.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED, EMBEDDED_LABEL).expect("vendored generating vector is valid")
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn components(&self) -> &[u64] {
        &self.z
    }

    pub fn max_n(&self) -> u64 {
        self.max_n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The first `s` components.
    pub fn truncated(&self, s: usize) -> Result<Self> {
        if s > self.dim() {
            return Err(Error::GeneratingVector(format!(
                "dimension {s} requested but {} has only {}",
                self.label,
                self.dim()
            )));
        }
        Ok(Self {
            z: self.z[..s].to_vec(),
            max_n: self.max_n,
            label: self.label.clone(),
        })
    }

    fn check(&self, n: u64, k: u64) -> Result<()> {
        if !n.is_power_of_two() || n > self.max_n {
            return Err(Error::InvalidParameter(format!(
                "lattice size {n} must be a power of 2 not above {}",
                self.max_n
            )));
        }
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, bound: n });
        }
        Ok(())
    }

    /// Writes the first `out.len()` coordinates of point `k` of the `n`-point rule.
    pub fn point_into(&self, n: u64, k: u64, out: &mut [f64]) -> Result<()> {
        self.check(n, k)?;
        if out.len() > self.dim() {
            return Err(Error::GeneratingVector(format!(
                "dimension {} requested but only {} available",
                out.len(),
                self.dim()
            )));
        }
        let inv = 1.0 / n as f64;
        for (x, &zj) in out.iter_mut().zip(&self.z) {
            *x = ((k * zj) % n) as f64 * inv;
        }
        Ok(())
    }
}

/// Point `k` of the `n`-point rule in all dimensions of `z`.
pub fn lattice_point(z: &GeneratingVector, n: u64, k: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; z.dim()];
    z.point_into(n, k, &mut out)?;
    Ok(out)
}

/// All `n` points of the rule in the first `s` dimensions.
pub fn lattice_points(z: &GeneratingVector, n: u64, s: usize) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|k| {
            let mut p = vec![0.0; s];
            z.point_into(n, k, &mut p)?;
            Ok(p)
        })
        .collect()
}

/// Stream id of shift `r` on `level`.
pub fn shift_stream(level: usize, r: usize) -> u64 {
    ((level as u64) << 32) | r as u64
}

/// Seeded generator for one stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `R` independent uniform shifts in `[0,1)^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet {
    pub seed: u64,
    pub level: usize,
    shifts: Vec<Vec<f64>>,
}

impl ShiftSet {
    /// Shift `r` is drawn from stream `(level, r)` of `seed`, so any subset of
    /// shifts can be regenerated independently.
    pub fn generate(seed: u64, level: usize, r_count: usize, s: usize) -> Self {
        let shifts = (0..r_count)
            .map(|r| {
                let mut rng = stream_rng(seed, shift_stream(level, r));
                (0..s).map(|_| rng.random::<f64>()).collect()
            })
            .collect();
        Self {
            seed,
            level,
            shifts,
        }
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn shift(&self, r: usize) -> &[f64] {
        &self.shifts[r]
    }
}

/// `{t + shift} - 1/2`, a parameter vector in `[-1/2, 1/2)^s`.
pub fn shift_and_center(t: &[f64], shift: &[f64]) -> Result<ParamVector> {
    if t.len() != shift.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: shift.len(),
        });
    }
    let y = t
        .iter()
        .zip(shift)
        .map(|(&a, &b)| {
            let v = a + b;
            let frac = if v >= 1.0 { v - 1.0 } else { v };
            frac - 0.5
        })
        .collect();
    ParamVector::new(y)
}

/// Mean over shifts and the sample variance of that mean.
pub fn shift_average_and_variance(per_shift: &[f64]) -> Result<(f64, f64)> {
    let r = per_shift.len();
    if r < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: r,
        });
    }
    let rf = r as f64;
    let mean = per_shift.iter().sum::<f64>() / rf;
    let ss: f64 = per_shift.iter().map(|q| (mean - q).powi(2)).sum();
    Ok((mean, ss / (rf * (rf - 1.0))))
}

/// Largest sup-norm distance from a point to its nearest other point.
pub fn max_nn_distance(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: points.len(),
        });
    }
    let mut worst = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let mut nearest = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let d = p
                    .iter()
                    .zip(q)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                nearest = nearest.min(d);
            }
        }
        worst = worst.max(nearest);
    }
    Ok(worst)
}

pub const DISCREPANCY_MAX_DIM: usize = 3;
pub const DISCREPANCY_MAX_POINTS: usize = 64;

/// Star discrepancy by enumerating all boxes `[0, b)` whose corner `b` has
/// coordinates taken from the points or `1`; open and closed counts cover the
/// one-sided limits of the supremum.
pub fn star_discrepancy_bruteforce(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            found: 0,
        });
    }
    let s = points[0].len();
    if s == 0 || s > DISCREPANCY_MAX_DIM || n > DISCREPANCY_MAX_POINTS {
        return Err(Error::DiagnosticLimit(format!(
            "brute-force discrepancy supports s <= {DISCREPANCY_MAX_DIM} and N <= {DISCREPANCY_MAX_POINTS} (got s = {s}, N = {n})"
        )));
    }
    if points.iter().any(|p| p.len() != s) {
        return Err(Error::DimensionMismatch {
            expected: s,
            found: points.iter().map(Vec::len).find(|&l| l != s).unwrap_or(s),
        });
    }
    let grids: Vec<Vec<f64>> = (0..s)
        .map(|j| {
            let mut g: Vec<f64> = points.iter().map(|p| p[j]).collect();
            g.push(1.0);
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let nf = n as f64;
    let mut worst = 0.0f64;
    let mut index = vec![0usize; s];
    let mut corner = vec![0.0; s];
    loop {
        for j in 0..s {
            corner[j] = grids[j][index[j]];
        }
        let volume: f64 = corner.iter().product();
        let open = points
            .iter()
            .filter(|p| p.iter().zip(&corner).all(|(x, b)| x < b))
            .count() as f64;
        let closed = points
            .iter()
            .filter(|p| p.iter().zip(&corner).all(|(x, b)| x <= b))
            .count() as f64;
        worst = worst.max(volume - open / nf).max(closed / nf - volume);

        let mut j = 0;
        loop {
            index[j] += 1;
            if index[j] < grids[j].len() {
                break;
            }
            index[j] = 0;
            j += 1;
            if j == s {
                return Ok(worst);
            }
        }
    }
}
