//! Subtractive clustering with an independent radius per input dimension.
//!
//! The potential of point `i` is
//! `P_i = Σ_j exp(-4 Σ_d ((x_id - x_jd) / r_d)²)`. The highest-potential
//! point becomes a center, potentials near it are reduced with the radii
//! stretched by the squash factor, and selection repeats until the best
//! remaining candidate falls under the reject ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SQUASH: f64 = 1.25;
pub const DEFAULT_ACCEPT: f64 = 0.9;
pub const DEFAULT_REJECT: f64 = 0.7;

/// Search bounds for radii on `[0, 1]`-normalized inputs.
pub const RADIUS_MIN: f64 = 0.05;
pub const RADIUS_MAX: f64 = 1.0;

/// Per-dimension cluster radii, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RadiusVector(Vec<f64>);

impl RadiusVector {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::domain("radius vector is empty"));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::domain(format!("cluster radius {r} must be > 0")));
        }
        Ok(Self(radii))
    }

    pub fn uniform(dim: usize, r: f64) -> Result<Self> {
        Self::new(vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Whether every component lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.0.iter().all(|r| (lo..=hi).contains(r))
    }
}

impl TryFrom<Vec<f64>> for RadiusVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RadiusVector> for Vec<f64> {
    fn from(r: RadiusVector) -> Self {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub squash_factor: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            squash_factor: DEFAULT_SQUASH,
            accept_ratio: DEFAULT_ACCEPT,
            reject_ratio: DEFAULT_REJECT,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.squash_factor > 0.0) {
            return Err(Error::domain("squash factor must be > 0"));
        }
        if !(0.0 < self.reject_ratio
            && self.reject_ratio < self.accept_ratio
            && self.accept_ratio <= 1.0)
        {
            return Err(Error::domain(format!(
                "need 0 < reject ({}) < accept ({}) <= 1",
                self.reject_ratio, self.accept_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    /// Index of each center in the input point list.
    pub center_indices: Vec<usize>,
    /// Potential of each center when it was selected.
    pub chosen_potentials: Vec<f64>,
    pub radii: RadiusVector,
    pub squash_factor: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
}

impl ClusterModel {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

fn check_points<P: AsRef<[f64]>>(points: &[P], radii: &RadiusVector) -> Result<()> {
    if points.is_empty() {
        return Err(Error::domain("clustering needs at least one point"));
    }
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != radii.dim()) {
        return Err(Error::domain(format!(
            "point dimension {} does not match {} radii",
            p.as_ref().len(),
            radii.dim()
        )));
    }
    Ok(())
}

/// `Σ_d ((a_d - b_d) * inv_r_d)²`.
#[inline]
fn scaled_sq_dist(a: &[f64], b: &[f64], inv_r: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_r)
        .map(|((x, y), s)| {
            let t = (x - y) * s;
            t * t
        })
        .sum()
}

fn inverse(radii: &RadiusVector, stretch: f64) -> Vec<f64> {
    radii.as_slice().iter().map(|r| 1.0 / (stretch * r)).collect()
}

/// `exp(-a)` is exactly 0 in `f64` past this point.
const EXP_UNDERFLOW: f64 = 746.0;

/// Points rescaled by `2 / r_d` with dimensions ordered by decreasing scale,
/// so `4 Σ_d ((a_d - b_d) / r_d)²` is a plain squared distance and large
/// terms come first.
fn kernel_coordinates<P: AsRef<[f64]>>(points: &[P], radii: &RadiusVector) -> Vec<Vec<f64>> {
    let r = radii.as_slice();
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
    points
        .iter()
        .map(|p| {
            let p = p.as_ref();
            order.iter().map(|&d| 2.0 * p[d] / r[d]).collect()
        })
        .collect()
}

/// `exp(-|a - b|²)`, stopping early once the result is certain to be 0.
#[inline]
fn kernel(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
        if s > EXP_UNDERFLOW {
            return 0.0;
        }
    }
    (-s).exp()
}

/// Potential of every point. Each is at least 1 from its own term.
pub fn compute_potentials<P: AsRef<[f64]> + Sync>(
    points: &[P],
    radii: &RadiusVector,
) -> Result<Vec<f64>> {
    check_points(points, radii)?;
    let y = kernel_coordinates(points, radii);
    let mut out = vec![1.0; y.len()];
    // Each pair once; the kernel is symmetric.
    for i in 0..y.len() {
        for j in (i + 1)..y.len() {
            let k = kernel(&y[i], &y[j]);
            if k != 0.0 {
                out[i] += k;
                out[j] += k;
            }
        }
    }
    Ok(out)
}

fn subtract_in_place<P: AsRef<[f64]> + Sync>(
    potentials: &mut [f64],
    center: &[f64],
    center_potential: f64,
    points: &[P],
    inv_squashed: &[f64],
) {
    potentials
        .iter_mut()
        .zip(points)
        .for_each(|(p, x)| {
            let reduction =
                center_potential * (-4.0 * scaled_sq_dist(x.as_ref(), center, inv_squashed)).exp();
            *p = (*p - reduction).max(0.0);
        });
}

/// Potentials after removing the influence of the center at `center_index`.
pub fn subtract_potential<P: AsRef<[f64]> + Sync>(
    potentials: &[f64],
    center_index: usize,
    points: &[P],
    radii: &RadiusVector,
    squash: f64,
) -> Result<Vec<f64>> {
    check_points(points, radii)?;
    if potentials.len() != points.len() {
        return Err(Error::domain("one potential is required per point"));
    }
    if center_index >= points.len() {
        return Err(Error::domain(format!(
            "center index {center_index} out of bounds for {} points",
            points.len()
        )));
    }
    let mut out = potentials.to_vec();
    let center = points[center_index].as_ref();
    subtract_in_place(
        &mut out,
        center,
        potentials[center_index],
        points,
        &inverse(radii, squash),
    );
    Ok(out)
}

/// Highest value and its index; ties go to the lowest index.
fn max_with_index(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Cluster with the default squash, accept and reject values.
pub fn subclust<P: AsRef<[f64]> + Sync>(points: &[P], radii: &RadiusVector) -> Result<ClusterModel> {
    subclust_with(points, radii, ClusterParams::default())
}

/// Candidates between the reject and accept ratios are kept when
/// `d_min + p / P1 >= 1`, where `d_min` is the radius-scaled distance to the
/// nearest existing center; otherwise their potential is zeroed and the next
/// candidate is tried.
pub fn subclust_with<P: AsRef<[f64]> + Sync>(
    points: &[P],
    radii: &RadiusVector,
    params: ClusterParams,
) -> Result<ClusterModel> {
    params.validate()?;
    let mut potentials = compute_potentials(points, radii)?;
    let inv_r = inverse(radii, 1.0);
    let inv_squashed = inverse(radii, params.squash_factor);

    let (first, first_potential) = max_with_index(&potentials);
    let mut center_indices = vec![first];
    let mut chosen_potentials = vec![first_potential];
    subtract_in_place(
        &mut potentials,
        points[first].as_ref(),
        first_potential,
        points,
        &inv_squashed,
    );

    while center_indices.len() < points.len() {
        let (k, p) = max_with_index(&potentials);
        if p <= 0.0 {
            break;
        }
        let ratio = p / first_potential;
        if ratio < params.reject_ratio {
            break;
        }
        if ratio <= params.accept_ratio {
            let candidate = points[k].as_ref();
            let d_min = center_indices
                .iter()
                .map(|&c| scaled_sq_dist(candidate, points[c].as_ref(), &inv_r))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if d_min + ratio < 1.0 {
                potentials[k] = 0.0;
                continue;
            }
        }
        center_indices.push(k);
        chosen_potentials.push(p);
        subtract_in_place(&mut potentials, points[k].as_ref(), p, points, &inv_squashed);
    }

    Ok(ClusterModel {
        centers: center_indices
            .iter()
            .map(|&i| points[i].as_ref().to_vec())
            .collect(),
        center_indices,
        chosen_potentials,
        radii: radii.clone(),
        squash_factor: params.squash_factor,
        accept_ratio: params.accept_ratio,
        reject_ratio: params.reject_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Straight double loop, kept apart from the library path.
    fn brute_potentials(points: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; points.len()];
        for i in 0..points.len() {
            for j in 0..points.len() {
                let mut s = 0.0;
                for d in 0..r.len() {
                    s += ((points[i][d] - points[j][d]) / r[d]).powi(2);
                }
                out[i] += (-4.0 * s).exp();
            }
        }
        out
    }

    fn three_points() -> Vec<Vec<f64>> {
        vec![vec![0.1, 0.2], vec![0.3, 0.25], vec![0.9, 0.8]]
    }

    #[test]
    fn single_point_has_unit_potential() {
        let p = compute_potentials(&[vec![0.4, 0.1]], &RadiusVector::uniform(2, 0.5).unwrap()).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn identical_points_share_potential() {
        let pts = vec![vec![0.4, 0.1], vec![0.4, 0.1]];
        let p = compute_potentials(&pts, &RadiusVector::uniform(2, 0.5).unwrap()).unwrap();
        assert_eq!(p, vec![2.0, 2.0]);
    }

    #[test]
    fn potentials_match_double_loop() {
        let pts = three_points();
        let r = RadiusVector::new(vec![0.5, 0.5]).unwrap();
        let got = compute_potentials(&pts, &r).unwrap();
        let want = brute_potentials(&pts, &[0.5, 0.5]);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{g} vs {w}");
        }
        // Frozen from the double loop: 1 + exp(-4 * (0.16 + 0.01) / 0.25) + ...
        let p0 = 1.0 + (-4.0f64 * (0.04 + 0.0025) / 0.25).exp() + (-4.0f64 * (0.64 + 0.36) / 0.25).exp();
        assert!((got[0] - p0).abs() < 1e-14);
    }

    #[test]
    fn zero_radius_is_rejected() {
        assert!(RadiusVector::new(vec![0.5, 0.0]).is_err());
        assert!(RadiusVector::new(vec![-0.1]).is_err());
        assert!(RadiusVector::new(vec![]).is_err());
    }

    #[test]
    fn subtraction_zeroes_center_and_spares_far_points() {
        let mut pts = three_points();
        pts.push(vec![1e6, 1e6]);
        let r = RadiusVector::new(vec![0.5, 0.5]).unwrap();
        let p = compute_potentials(&pts, &r).unwrap();
        let after = subtract_potential(&p, 0, &pts, &r, 1.25).unwrap();
        assert_eq!(after[0], 0.0);
        assert_eq!(after[3], p[3]);
        // Brute-force subtraction for the remaining points.
        for i in 1..3 {
            let s: f64 = (0..2).map(|d| ((pts[i][d] - pts[0][d]) / (1.25 * 0.5)).powi(2)).sum();
            let want = (p[i] - p[0] * (-4.0 * s).exp()).max(0.0);
            assert!((after[i] - want).abs() < 1e-14);
        }
        assert!(subtract_potential(&p, 9, &pts, &r, 1.25).is_err());
    }

    #[test]
    fn one_point_one_center() {
        let m = subclust(&[vec![0.3, 0.7]], &RadiusVector::uniform(2, 0.5).unwrap()).unwrap();
        assert_eq!(m.centers, vec![vec![0.3, 0.7]]);
    }

    #[test]
    fn identical_points_give_one_cluster() {
        let pts = vec![vec![0.2, 0.2]; 12];
        let m = subclust(&pts, &RadiusVector::uniform(2, 0.3).unwrap()).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn distant_points_are_separate_centers() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let m = subclust(&pts, &RadiusVector::uniform(2, 0.1).unwrap()).unwrap();
        assert_eq!(m.center_indices, vec![0, 1]);
    }

    fn blobs(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = crate::rng::stream(seed, 0);
        (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 0.2 } else { 0.8 };
                vec![c + rng.gen_range(-0.05..0.05), c + rng.gen_range(-0.05..0.05)]
            })
            .collect()
    }

    #[test]
    fn two_blobs_two_centers() {
        let pts = blobs(5, 50);
        let m = subclust(&pts, &RadiusVector::uniform(2, 0.3).unwrap()).unwrap();
        assert_eq!(m.len(), 2);
        let mut sides: Vec<bool> = m.centers.iter().map(|c| c[0] > 0.5).collect();
        sides.sort();
        assert_eq!(sides, vec![false, true]);
    }

    #[test]
    fn chosen_potentials_never_increase() {
        let mut rng = crate::rng::stream(8, 0);
        let pts: Vec<Vec<f64>> = (0..120).map(|_| vec![rng.gen(), rng.gen(), rng.gen()]).collect();
        for r in [0.1, 0.2, 0.35] {
            let m = subclust(&pts, &RadiusVector::uniform(3, r).unwrap()).unwrap();
            assert!(m.chosen_potentials.windows(2).all(|w| w[1] <= w[0]));
            assert!(m.chosen_potentials.iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn center_set_ignores_point_order() {
        let mut rng = crate::rng::stream(12, 0);
        let pts: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let r = RadiusVector::uniform(2, 0.25).unwrap();
        let a = subclust(&pts, &r).unwrap();
        let mut reversed = pts.clone();
        reversed.reverse();
        let b = subclust(&reversed, &r).unwrap();
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let pts = vec![vec![0.0]];
        let r = RadiusVector::uniform(1, 0.5).unwrap();
        let params = ClusterParams {
            accept_ratio: 0.5,
            reject_ratio: 0.7,
            ..Default::default()
        };
        assert!(subclust_with(&pts, &r, params).is_err());
        assert!(subclust(&[vec![0.0, 1.0]], &r).is_err());
    }
}
