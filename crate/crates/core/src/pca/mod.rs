//! Two-dimensional PCA projection of embeddings.
//!
//! Components come from the SVD of the mean-centred data matrix. Each
//! component is sign-fixed so that its largest-magnitude entry is positive,
//! which makes projections reproducible across platforms.

mod scatter;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scatter::{scatter_emit, scatter_svg, ScatterPoint, Split, COORDS_FILE, SVG_FILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Row-orthonormal, one row per component.
    pub components: Vec<Vec<f64>>,
    /// Per-component variance (`s² / (n - 1)`), descending.
    pub explained_variance: Vec<f64>,
}

fn check_dims<V: AsRef<[f32]>>(vectors: &[V], dim: usize) -> Result<()> {
    match vectors.iter().find(|v| v.as_ref().len() != dim) {
        Some(v) => Err(Error::DimensionMismatch {
            expected: dim,
            found: v.as_ref().len(),
        }),
        None => Ok(()),
    }
}

pub fn pca_fit<V: AsRef<[f32]>>(vectors: &[V], n_components: usize) -> Result<PcaModel> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].as_ref().len();
    check_dims(vectors, dim)?;
    if n_components == 0 || n_components > dim {
        return Err(Error::InsufficientData(format!(
            "cannot extract {n_components} components from dim {dim}"
        )));
    }
    let n = vectors.len();

    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v.as_ref()) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centred = DMatrix::from_fn(n, dim, |r, c| f64::from(vectors[r].as_ref()[c]) - mean[c]);
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.expect("v_t was requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    for &i in order.iter().take(n_components) {
        components.push(v_t.row(i).iter().copied().collect());
        let s = svd.singular_values[i];
        explained_variance.push(s * s / (n - 1) as f64);
    }
    // Fewer singular directions than requested (n < n_components): pad with
    // zero-variance directions.
    while components.len() < n_components {
        components.push(vec![0.0; dim]);
        explained_variance.push(0.0);
    }
    orthonormalize(&mut components);
    for c in &mut components {
        fix_sign(c);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Modified Gram-Schmidt; rows that collapse are replaced with the first
/// basis vector that survives projection.
fn orthonormalize(rows: &mut [Vec<f64>]) {
    let dim = rows[0].len();
    for i in 0..rows.len() {
        let (done, rest) = rows.split_at_mut(i);
        let row = &mut rest[0];
        let mut basis = 0;
        loop {
            for prev in done.iter() {
                let d: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum();
                row.iter_mut().zip(prev).for_each(|(a, b)| *a -= d * b);
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                row.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            *row = vec![0.0; dim];
            row[basis] = 1.0;
            basis += 1;
        }
    }
}

fn fix_sign(component: &mut [f64]) {
    let mut best = 0;
    for (i, x) in component.iter().enumerate() {
        if x.abs() > component[best].abs() {
            best = i;
        }
    }
    if component[best] < 0.0 {
        component.iter_mut().for_each(|x| *x = -*x);
    }
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_one(&self, v: &[f32]) -> Result<Vec<f64>> {
        let v: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
        self.project(&v)
    }

    /// Same as [`transform_one`](Self::transform_one) for `f64` input.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(v)
                    .zip(&self.mean)
                    .map(|((w, x), m)| w * (x - m))
                    .sum()
            })
            .collect())
    }

    /// `(v - mean) · componentsᵀ` for every vector.
    pub fn transform<V: AsRef<[f32]>>(&self, vectors: &[V]) -> Result<Vec<Vec<f64>>> {
        vectors
            .iter()
            .map(|v| self.transform_one(v.as_ref()))
            .collect()
    }
}
