//! Two-component PCA by power iteration on the sample covariance.

use crate::error::{Error, Result};
use crate::numerics::matrix::{axpy, dot};
use crate::numerics::{Matrix, Vector};

pub const MAX_ITERATIONS: usize = 1000;
pub const TOLERANCE: f64 = 1e-10;

/// Result of fitting the top two principal components.
#[derive(Debug, Clone)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
}

impl Pca2 {
    pub fn fit(points: &[Vector]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!(
                "PCA needs at least 3 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].dim();
        if dim < 2 {
            return Err(Error::Degenerate(format!("PCA needs dim >= 2, got {dim}")));
        }
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::shape("PCA points have differing dimensions"));
        }

        let n = points.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in points {
            axpy(1.0, p, &mut mean);
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = Matrix::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for p in points {
            for ((c, x), m) in centered.iter_mut().zip(p.iter()).zip(&mean) {
                *c = x - m;
            }
            cov.add_outer(&centered, &centered);
        }
        cov.as_mut_slice().iter_mut().for_each(|c| *c /= n);

        let trace: f64 = (0..dim).map(|i| cov.get(i, i)).sum();
        if !(trace > 0.0) || trace < f64::EPSILON * scale_of(&mean) {
            return Err(Error::Degenerate("point set has zero spread".into()));
        }

        let (v1, l1) = top_eigenpair(&cov, None);
        deflate(&mut cov, &v1, l1);
        let (v2, l2) = top_eigenpair(&cov, Some(&v1));

        Ok(Self {
            mean,
            components: [v1, v2],
            eigenvalues: [l1, l2.max(0.0)],
        })
    }

    pub fn project(&self, p: &[f64]) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, (&x, &m)) in p.iter().zip(&self.mean).enumerate() {
            let c = x - m;
            a += c * self.components[0][i];
            b += c * self.components[1][i];
        }
        (a, b)
    }
}

/// Projects every point onto the top two principal components of the
/// mean-centered set.
pub fn pca_2d(points: &[Vector]) -> Result<Vec<(f64, f64)>> {
    let pca = Pca2::fit(points)?;
    Ok(points.iter().map(|p| pca.project(p)).collect())
}

fn scale_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().max(1.0)
}

fn deflate(cov: &mut Matrix, v: &[f64], lambda: f64) {
    let scaled: Vec<f64> = v.iter().map(|x| -lambda * x).collect();
    cov.add_outer(&scaled, v);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Makes the largest-magnitude loading positive (lowest index wins ties).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn orthogonalize(v: &mut [f64], against: Option<&[f64]>) {
    if let Some(u) = against {
        let p = dot(v, u);
        axpy(-p, u, v);
    }
}

fn top_eigenpair(cov: &Matrix, against: Option<&[f64]>) -> (Vec<f64>, f64) {
    let dim = cov.rows();
    let mut v = start_vector(cov, against);
    let mut next = vec![0.0; dim];
    let mut lambda = 0.0;

    for _ in 0..MAX_ITERATIONS {
        cov.matvec_into(&v, &mut next);
        orthogonalize(&mut next, against);
        let norm = normalize(&mut next);
        if norm <= f64::MIN_POSITIVE {
            // remaining spectrum is zero; any orthogonal direction will do
            return (v, 0.0);
        }
        fix_sign(&mut next);
        lambda = norm;
        let change = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if change < TOLERANCE {
            break;
        }
    }
    // Rayleigh quotient is more accurate than the last norm ratio.
    cov.matvec_into(&v, &mut next);
    let rq = dot(&v, &next);
    if rq.is_finite() {
        lambda = rq;
    }
    (v, lambda)
}

/// Column of the (deflated) covariance with the largest norm; falls back to
/// the first basis vector orthogonal to `against`.
fn start_vector(cov: &Matrix, against: Option<&[f64]>) -> Vec<f64> {
    let dim = cov.rows();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..dim {
        let mut col: Vec<f64> = (0..dim).map(|i| cov.get(i, j)).collect();
        orthogonalize(&mut col, against);
        let n = dot(&col, &col);
        if best.as_ref().map_or(true, |(bn, _)| n > *bn) {
            best = Some((n, col));
        }
    }
    let (n, mut v) = best.expect("dim >= 2");
    if n <= f64::MIN_POSITIVE {
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            orthogonalize(&mut e, against);
            if normalize(&mut e) > 1e-6 {
                fix_sign(&mut e);
                return e;
            }
        }
    }
    normalize(&mut v);
    fix_sign(&mut v);
    v
}
