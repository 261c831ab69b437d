use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::{cmp_f64, SampleEmbedding};

/// Relative eigenvalue floor below which a component counts as absent.
const RANK_TOL: f64 = 1e-12;

/// Projects mean-centered samples onto their leading principal components.
///
/// The eigen-decomposition runs on whichever of the covariance (`d x d`) or
/// Gram (`n x n`) matrix is smaller. Each component is oriented so that its
/// largest-magnitude loading is positive; components beyond the data rank
/// are reported as zeros.
pub fn pca_project(samples: &[SampleEmbedding], dims: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let n = samples.len();
    if dims == 0 {
        return Err(Error::invalid("projection needs at least one dimension"));
    }
    if n < dims + 1 {
        return Err(Error::invalid(format!(
            "{n} samples cannot support {dims} components"
        )));
    }
    let d = samples[0].vector.dim();
    if let Some(s) = samples.iter().find(|s| s.vector.dim() != d) {
        return Err(Error::DimensionMismatch {
            id: s.sample_id.clone(),
            expected: d,
            found: s.vector.dim(),
        });
    }
    if let Some(s) = samples.iter().find(|s| !s.vector.is_finite()) {
        return Err(Error::NonFinite(s.sample_id.clone()));
    }

    let mut x = DMatrix::from_fn(n, d, |i, j| samples[i].vector.0[j]);
    for j in 0..d {
        let mean = x.column(j).sum() / n as f64;
        x.column_mut(j).add_scalar_mut(-mean);
    }

    let use_gram = n < d;
    let m = if use_gram {
        &x * x.transpose()
    } else {
        x.transpose() * &x
    };
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| cmp_f64(eig.eigenvalues[b], eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut coords = DMatrix::<f64>::zeros(n, dims);
    for (c, &k) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= RANK_TOL * top || lambda <= 0.0 {
            continue;
        }
        let vec = eig.eigenvectors.column(k);
        // Loadings in feature space.
        let loading = if use_gram {
            x.transpose() * vec / lambda.sqrt()
        } else {
            vec.into_owned()
        };
        let lead = loading
            .iter()
            .enumerate()
            .max_by(|a, b| cmp_f64(a.1.abs(), b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, v)| *v)
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        let proj = &x * loading * sign;
        coords.set_column(c, &proj);
    }

    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.sample_id.clone(), coords.row(i).iter().copied().collect()))
        .collect())
}
