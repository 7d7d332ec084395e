//! Symmetric doubly stochastic compatibility matrices and their
//! `k(k-1)/2` free-parameter encoding.
//!
//! The free parameters are the entries of the leading `(k-1) × (k-1)`
//! block on and below the diagonal, row-major: `[H00, H10, H11, H20, ...]`.
//! The last row and column follow from row sums of one, and the corner
//! entry from the total.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum / symmetry tolerance accepted from external input.
pub const INPUT_TOL: f64 = 1e-6;

/// Free-parameter vector of a `k × k` compatibility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    k: usize,
    h: Vec<f64>,
}

/// Number of free parameters `k(k-1)/2`.
pub fn n_free(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

impl FreeParams {
    pub fn new(k: usize, h: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Dimension(format!("need k >= 2, got {k}")));
        }
        if h.len() != n_free(k) {
            return Err(Error::Dimension(format!(
                "k = {k} needs {} free parameters, got {}",
                n_free(k),
                h.len()
            )));
        }
        Ok(Self { k, h })
    }

    /// All parameters equal to `1/k`, which reconstructs the uniform matrix.
    pub fn uniform(k: usize) -> Self {
        Self {
            k,
            h: vec![1.0 / k as f64; n_free(k)],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.h
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.h
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.h
    }

    /// `(i, j)` entry addressed by every free index, in order.
    pub fn positions(k: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..k.saturating_sub(1)).flat_map(|i| (0..=i).map(move |j| (i, j)))
    }
}

/// `k × k` symmetric matrix with unit row sums.
///
/// Entries are not restricted to `[0, 1]`: matrices reconstructed from
/// unconstrained free parameters may go negative during optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityMatrix {
    entries: DMatrix<f64>,
}

impl CompatibilityMatrix {
    /// Validates symmetry and unit row sums to within `tol`.
    pub fn from_matrix(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let k = entries.nrows();
        if k < 2 || entries.ncols() != k {
            return Err(Error::InvalidCompatibility(format!(
                "expected a square matrix with k >= 2, got {}×{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCompatibility("non-finite entry".into()));
        }
        for i in 0..k {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > tol {
                    return Err(Error::InvalidCompatibility(format!(
                        "asymmetric at ({i},{j}): {} vs {}",
                        entries[(i, j)],
                        entries[(j, i)]
                    )));
                }
            }
            let s: f64 = entries.row(i).sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidCompatibility(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidCompatibility("rows of unequal length".into()));
        }
        let m = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
        Self::from_matrix(m, INPUT_TOL)
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            entries: DMatrix::from_element(k, k, 1.0 / k as f64),
        }
    }

    /// Skewed matrix with min/max ratio `1/h`.
    ///
    /// Classes are paired `(0,1), (2,3), ...`; paired classes get `h` on
    /// their shared entries and an unpaired last class gets `h` on its
    /// diagonal. For `k = 3` this is `[[1,h,1],[h,1,1],[1,1,h]] / (2+h)`.
    pub fn skew(k: usize, h: f64) -> Result<Self> {
        if k < 2 || !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidCompatibility(format!(
                "skew needs k >= 2 and h > 0, got k = {k}, h = {h}"
            )));
        }
        let mut m = DMatrix::from_element(k, k, 1.0);
        let mut c = 0;
        while c + 1 < k {
            m[(c, c + 1)] = h;
            m[(c + 1, c)] = h;
            c += 2;
        }
        if k % 2 == 1 {
            m[(k - 1, k - 1)] = h;
        }
        m /= k as f64 - 1.0 + h;
        Ok(Self { entries: m })
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }

    /// Frobenius distance to another matrix of the same size.
    pub fn l2_distance(&self, other: &CompatibilityMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CompatibilityJson {
            k: self.k(),
            h: self.rows(),
        })
        .expect("matrix serializes")
    }

    /// Parses `{"k": 3, "H": [[...], ...]}`, validating at [`INPUT_TOL`].
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CompatibilityJson = serde_json::from_str(s)?;
        if raw.h.len() != raw.k {
            return Err(Error::InvalidCompatibility(format!(
                "k = {} but {} rows",
                raw.k,
                raw.h.len()
            )));
        }
        Self::from_rows(&raw.h)
    }
}

#[derive(Serialize, Deserialize)]
struct CompatibilityJson {
    k: usize,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
}

/// Rebuilds the full matrix from its free parameters.
pub fn reconstruct_h(p: &FreeParams) -> CompatibilityMatrix {
    let k = p.k;
    let last = k - 1;
    let mut m = DMatrix::zeros(k, k);
    for (idx, (i, j)) in FreeParams::positions(k).enumerate() {
        m[(i, j)] = p.h[idx];
        m[(j, i)] = p.h[idx];
    }
    let mut block_total = 0.0;
    for i in 0..last {
        let row: f64 = (0..last).map(|j| m[(i, j)]).sum();
        block_total += row;
        m[(i, last)] = 1.0 - row;
        m[(last, i)] = 1.0 - row;
    }
    m[(last, last)] = 2.0 - k as f64 + block_total;
    CompatibilityMatrix { entries: m }
}

/// Inverse of [`reconstruct_h`]; rejects matrices that are not symmetric
/// row-stochastic to within [`INPUT_TOL`].
pub fn extract_free_params(h: &CompatibilityMatrix) -> Result<FreeParams> {
    let checked = CompatibilityMatrix::from_matrix(h.entries.clone(), INPUT_TOL)?;
    let k = checked.k();
    let params = FreeParams::positions(k)
        .map(|(i, j)| checked.entries[(i, j)])
        .collect();
    FreeParams::new(k, params)
}

/// Residual matrix `H - 1/k`; its rows and columns sum to zero.
pub fn center(h: &CompatibilityMatrix) -> DMatrix<f64> {
    let k = h.k() as f64;
    h.entries.map(|v| v - 1.0 / k)
}

/// `H^ℓ` by repeated multiplication.
pub fn matrix_power(h: &CompatibilityMatrix, ell: usize) -> DMatrix<f64> {
    assert!(ell >= 1, "matrix_power needs ell >= 1");
    dense_power(&h.entries, ell)
}

pub(crate) fn dense_power(m: &DMatrix<f64>, ell: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..ell {
        out = &out * m;
    }
    out
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_spectral_radius(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `∂H / ∂h_p`: the constant structure matrix of free parameter `p`.
///
/// For an off-diagonal parameter `(i, j)` this is
/// `J^ij + J^ji - J^ik - J^ki - J^jk - J^kj + 2 J^kk`, for a diagonal one
/// `J^ii - J^ik - J^ki + J^kk`, where `k` is the last index.
pub fn structure_matrix(k: usize, p: usize) -> DMatrix<f64> {
    let (i, j) = FreeParams::positions(k)
        .nth(p)
        .expect("free index in range");
    let last = k - 1;
    let mut s = DMatrix::zeros(k, k);
    if i == j {
        s[(i, i)] += 1.0;
        s[(i, last)] -= 1.0;
        s[(last, i)] -= 1.0;
        s[(last, last)] += 1.0;
    } else {
        s[(i, j)] += 1.0;
        s[(j, i)] += 1.0;
        s[(i, last)] -= 1.0;
        s[(last, i)] -= 1.0;
        s[(j, last)] -= 1.0;
        s[(last, j)] -= 1.0;
        s[(last, last)] += 2.0;
    }
    s
}

/// Maps a matrix-valued derivative `∂E/∂H` to the free-parameter gradient
/// by contracting it with each structure matrix.
pub(crate) fn chain_to_free(k: usize, g: &DMatrix<f64>) -> Vec<f64> {
    FreeParams::positions(k)
        .map(|(i, j)| {
            let last = k - 1;
            if i == j {
                g[(i, i)] - g[(i, last)] - g[(last, i)] + g[(last, last)]
            } else {
                g[(i, j)] + g[(j, i)] - g[(i, last)] - g[(last, i)] - g[(j, last)]
                    - g[(last, j)]
                    + 2.0 * g[(last, last)]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_layout(k: usize) -> bool {
        FreeParams::positions(k)
            .enumerate()
            .all(|(idx, (i, j))| i * (i + 1) / 2 + j == idx)
    }

    fn close(a: &DMatrix<f64>, b: &[[f64; 3]], tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a[(i, j)] - b[i][j]).abs() < tol))
    }

    fn h3() -> CompatibilityMatrix {
        reconstruct_h(&FreeParams::new(3, vec![0.2, 0.6, 0.2]).unwrap())
    }

    #[test]
    fn layout() {
        assert!((2..8).all(check_layout));
        assert_eq!(n_free(5), 10);
    }

    #[test]
    fn reconstruct_examples() {
        let u = reconstruct_h(&FreeParams::new(2, vec![0.5]).unwrap());
        assert!(u.matrix().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(close(
            h3().matrix(),
            &[[0.2, 0.6, 0.2], [0.6, 0.2, 0.2], [0.2, 0.2, 0.6]],
            1e-12
        ));
        let h8 = reconstruct_h(&FreeParams::new(3, vec![0.1, 0.8, 0.1]).unwrap());
        assert!(close(
            h8.matrix(),
            &[[0.1, 0.8, 0.1], [0.8, 0.1, 0.1], [0.1, 0.1, 0.8]],
            1e-12
        ));
    }

    #[test]
    fn skew_matches_reconstruct() {
        assert!(CompatibilityMatrix::skew(3, 3.0).unwrap().l2_distance(&h3()) < 1e-12);
        let h8 = CompatibilityMatrix::skew(3, 8.0).unwrap();
        assert!((h8.get(0, 1) - 0.8).abs() < 1e-12);
        for k in 2..7 {
            let s = CompatibilityMatrix::skew(k, 5.0).unwrap();
            CompatibilityMatrix::from_matrix(s.matrix().clone(), 1e-12).unwrap();
        }
    }

    #[test]
    fn extract_examples() {
        let u = CompatibilityMatrix::uniform(2);
        assert_eq!(extract_free_params(&u).unwrap().as_slice(), &[0.5]);
        let p = extract_free_params(&h3()).unwrap();
        for (a, b) in p.as_slice().iter().zip([0.2, 0.6, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_rejects_invalid() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.2, 0.8]);
        assert!(CompatibilityMatrix::from_matrix(bad, INPUT_TOL).is_err());
        let rows = vec![vec![0.5, 0.5], vec![0.5, 0.6]];
        assert!(CompatibilityMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn center_examples() {
        let c = center(&CompatibilityMatrix::uniform(3));
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let h8 = CompatibilityMatrix::skew(3, 8.0).unwrap();
        assert!((symmetric_spectral_radius(&center(&h8)) - 0.7).abs() < 1e-12);
        assert!((symmetric_spectral_radius(h8.matrix()) - 1.0).abs() < 1e-12);
        let c3 = center(&h3());
        for i in 0..3 {
            assert!(c3.row(i).sum().abs() < 1e-12);
            assert!(c3.column(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn power_examples() {
        let h = h3();
        let h2 = matrix_power(&h, 2);
        assert!(close(
            &h2,
            &[[0.44, 0.28, 0.28], [0.28, 0.44, 0.28], [0.28, 0.28, 0.44]],
            1e-12
        ));
        assert_eq!(&matrix_power(&h, 1), h.matrix());
        let maxes: Vec<f64> = (1..=4).map(|l| matrix_power(&h, l).max()).collect();
        for (got, want) in maxes.iter().zip([0.6, 0.44, 0.376, 0.3504]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn structure_matches_reconstruct_difference() {
        for k in 2..6 {
            let base = reconstruct_h(&FreeParams::new(k, vec![0.0; n_free(k)]).unwrap());
            for p in 0..n_free(k) {
                let mut e = vec![0.0; n_free(k)];
                e[p] = 1.0;
                let step = reconstruct_h(&FreeParams::new(k, e).unwrap());
                let diff = step.matrix() - base.matrix();
                assert!((diff - structure_matrix(k, p)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_to_free_is_structure_contraction() {
        let k = 4;
        let g = DMatrix::from_fn(k, k, |i, j| (i * 7 + j * 3) as f64 * 0.1 - 0.4);
        let fast = chain_to_free(k, &g);
        for (p, v) in fast.iter().enumerate() {
            let slow = structure_matrix(k, p).component_mul(&g).sum();
            assert!((v - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let h = h3();
        let back = CompatibilityMatrix::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        assert!(CompatibilityMatrix::from_json(r#"{"k":2,"H":[[0.5,0.5],[0.4,0.6]]}"#).is_err());
    }

    #[test]
    fn reconstruct_allows_negative_entries() {
        let h = reconstruct_h(&FreeParams::new(2, vec![1.3]).unwrap());
        assert!(h.get(0, 1) < 0.0);
        assert!((h.matrix().row(0).sum() - 1.0).abs() < 1e-15);
    }
}
