//! Closed-form manifolds for checking that projected updates stay closer to
//! the manifold than raw gradient updates.
//!
//! Points and gradients are flat vectors in the ambient space.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{svd, Mat, StateProjector};

/// Points farther than this from the manifold have no tangent frame.
pub const ON_MANIFOLD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    /// Span of the orthonormal columns of `basis` (d×m).
    LinearSubspace { basis: Mat },
    /// Sphere of the given radius centered at the origin of R^d.
    Sphere { radius: f64, dim: usize },
    /// Product of circles; circle `i` lives in coordinates `2i, 2i+1`.
    ProductTorus { radii: Vec<f64> },
}

impl Manifold {
    /// Orthonormalizes the columns of `spanning` (d×m, full column rank).
    pub fn linear_subspace(spanning: &Mat) -> Result<Self> {
        let (d, m) = spanning.shape();
        if m == 0 || m >= d {
            return Err(Error::InvalidParam(format!("need 0 < m < d, got m={m}, d={d}")));
        }
        let f = svd(spanning)?;
        if f.s[m - 1] <= 1e-12 * f.s[0] {
            return Err(Error::InvalidParam("spanning set is rank deficient".into()));
        }
        Ok(Self::LinearSubspace {
            basis: f.u.leading_cols(m),
        })
    }

    /// Matrices `U C Vᵀ` for fixed orthonormal `u` (n×r) and `v` (p×r),
    /// as a subspace of row-major flattened n×p matrices.
    pub fn matrix_subspace(u: &Mat, v: &Mat) -> Result<Self> {
        let r = u.cols();
        if v.cols() != r || r == 0 {
            return Err(Error::InvalidParam("bases must share a nonzero rank".into()));
        }
        let (n, p) = (u.rows(), v.rows());
        let mut basis = Mat::zeros(n * p, r * r);
        for a in 0..r {
            for b in 0..r {
                let col = a * r + b;
                for i in 0..n {
                    for j in 0..p {
                        basis[(i * p + j, col)] = u[(i, a)] * v[(j, b)];
                    }
                }
            }
        }
        if r * r >= n * p {
            return Err(Error::InvalidParam("subspace must be proper".into()));
        }
        Ok(Self::LinearSubspace { basis })
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 || !(radius > 0.0) {
            return Err(Error::InvalidParam("sphere needs d >= 2 and a positive radius".into()));
        }
        Ok(Self::Sphere { radius, dim })
    }

    pub fn product_torus(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParam("torus needs positive radii".into()));
        }
        Ok(Self::ProductTorus { radii })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::LinearSubspace { .. } => "linear_subspace",
            Self::Sphere { .. } => "sphere",
            Self::ProductTorus { .. } => "product_torus",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::LinearSubspace { basis } => basis.rows(),
            Self::Sphere { dim, .. } => *dim,
            Self::ProductTorus { radii } => 2 * radii.len(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Self::LinearSubspace { basis } => basis.cols(),
            Self::Sphere { dim, .. } => dim - 1,
            Self::ProductTorus { radii } => radii.len(),
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.ambient_dim() {
            return Err(Error::Shape {
                expected: (self.ambient_dim(), 1),
                got: (z.len(), 1),
            });
        }
        Ok(())
    }

    /// Exact Euclidean distance to the manifold.
    pub fn dist(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(match self {
            Self::LinearSubspace { basis } => {
                let coef = basis.t_matvec(z);
                let near = basis.matvec(&coef);
                norm(&sub(z, &near))
            }
            Self::Sphere { radius, .. } => (norm(z) - radius).abs(),
            Self::ProductTorus { radii } => radii
                .iter()
                .enumerate()
                .map(|(i, r)| (z[2 * i].hypot(z[2 * i + 1]) - r).powi(2))
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Nearest point on the manifold; for the sphere and torus the origin
    /// (or a circle center) maps to an arbitrary but fixed nearest point.
    pub fn nearest_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(match self {
            Self::LinearSubspace { basis } => basis.matvec(&basis.t_matvec(z)),
            Self::Sphere { radius, dim } => {
                let n = norm(z);
                if n == 0.0 {
                    let mut e = vec![0.0; *dim];
                    e[0] = *radius;
                    e
                } else {
                    z.iter().map(|v| v * radius / n).collect()
                }
            }
            Self::ProductTorus { radii } => {
                let mut out = vec![0.0; z.len()];
                for (i, r) in radii.iter().enumerate() {
                    let (a, b) = (z[2 * i], z[2 * i + 1]);
                    let n = a.hypot(b);
                    if n == 0.0 {
                        out[2 * i] = *r;
                    } else {
                        out[2 * i] = a * r / n;
                        out[2 * i + 1] = b * r / n;
                    }
                }
                out
            }
        })
    }

    /// Uniformly random point (Gaussian direction, then nearest point).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::LinearSubspace { basis } => basis.matvec(Mat::randn(basis.cols(), 1, rng).as_slice()),
            _ => {
                let g = Mat::randn(self.ambient_dim(), 1, rng);
                self.nearest_point(g.as_slice()).expect("dimension matches")
            }
        }
    }

    pub fn tangent_frame(&self, z: &[f64]) -> Result<TangentFrame> {
        let d = self.dist(z)?;
        if d > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold(d));
        }
        let basis = match self {
            Self::LinearSubspace { basis } => basis.clone(),
            Self::Sphere { dim, .. } => {
                let n = norm(z);
                let radial: Vec<f64> = z.iter().map(|v| v / n).collect();
                complement(&radial, *dim)
            }
            Self::ProductTorus { radii } => {
                let mut b = Mat::zeros(z.len(), radii.len());
                for (i, r) in radii.iter().enumerate() {
                    b[(2 * i, i)] = -z[2 * i + 1] / r;
                    b[(2 * i + 1, i)] = z[2 * i] / r;
                }
                b
            }
        };
        Ok(TangentFrame {
            point: z.to_vec(),
            basis,
        })
    }
}

/// Orthonormal basis of the complement of the unit vector `n` in R^d.
fn complement(n: &[f64], d: usize) -> Mat {
    let mut cols: Vec<Vec<f64>> = vec![n.to_vec()];
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        // Two passes of Gram-Schmidt keep the frame orthonormal to 1e-15.
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&e, c);
                for (ei, ci) in e.iter_mut().zip(c) {
                    *ei -= p * ci;
                }
            }
        }
        let len = norm(&e);
        if len > 1e-8 {
            cols.push(e.iter().map(|v| v / len).collect());
        }
        if cols.len() == d {
            break;
        }
    }
    let mut out = Mat::zeros(d, d - 1);
    for (j, c) in cols[1..].iter().enumerate() {
        out.set_col(j, c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub point: Vec<f64>,
    /// d×m with orthonormal columns spanning the tangent space.
    pub basis: Mat,
}

impl TangentFrame {
    pub fn tangent_part(&self, g: &[f64]) -> Vec<f64> {
        self.basis.matvec(&self.basis.t_matvec(g))
    }

    pub fn normal_part(&self, g: &[f64]) -> Vec<f64> {
        sub(g, &self.tangent_part(g))
    }
}

/// Approximate tangent projector applied to gradients.
#[derive(Debug, Clone)]
pub enum GradientProjector {
    /// Dense d×d map.
    Dense(Mat),
    /// Low-rank state projector acting on row-major flattened matrices.
    State {
        projector: StateProjector,
        shape: (usize, usize),
    },
}

impl GradientProjector {
    pub fn exact(frame: &TangentFrame) -> Self {
        Self::Dense(frame.basis.matmul_t(&frame.basis).expect("frame is d×m"))
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Dense(m) => {
                if m.cols() != g.len() {
                    return Err(Error::Shape {
                        expected: (m.cols(), 1),
                        got: (g.len(), 1),
                    });
                }
                Ok(m.matvec(g))
            }
            Self::State { projector, shape } => {
                let gm = Mat::from_vec(shape.0, shape.1, g.to_vec())?;
                Ok(projector.project(&gm)?.into_vec())
            }
        }
    }
}

/// Exact tangent projection plus a Gaussian perturbation rescaled to
/// spectral norm `epsilon_scale`.
pub fn perturbed_projector<R: Rng + ?Sized>(
    frame: &TangentFrame,
    epsilon_scale: f64,
    rng: &mut R,
) -> Result<GradientProjector> {
    if !(epsilon_scale >= 0.0) {
        return Err(Error::InvalidParam("epsilon_scale must be nonnegative".into()));
    }
    let GradientProjector::Dense(exact) = GradientProjector::exact(frame) else {
        unreachable!()
    };
    if epsilon_scale == 0.0 {
        return Ok(GradientProjector::Dense(exact));
    }
    let d = exact.rows();
    let e = Mat::randn(d, d, rng);
    let top = svd(&e)?.s[0];
    Ok(GradientProjector::Dense(exact.axpy(epsilon_scale / top, &e)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepComparison {
    /// Distance after the raw update `z − η g`.
    pub dist_std: f64,
    /// Distance after the projected update `z − η P g`.
    pub dist_proj: f64,
    pub margin: f64,
    /// `‖g^⊥‖`, the normal part of the gradient.
    pub normal_grad: f64,
    /// `‖ε^⊥‖` with `ε = P g − g^∥`.
    pub normal_error: f64,
}

impl StepComparison {
    /// Empirical `c' = ‖ε^⊥‖ / ‖g^⊥‖`; infinite when `g^⊥ = 0`.
    pub fn c_prime(&self) -> f64 {
        if self.normal_grad == 0.0 {
            f64::INFINITY
        } else {
            self.normal_error / self.normal_grad
        }
    }

    /// `dist_proj − η ‖ε^⊥‖`, the part of the projected distance beyond first order.
    pub fn curvature_residual(&self, eta: f64) -> f64 {
        self.dist_proj - eta * self.normal_error
    }
}

/// Compares one raw and one projected gradient step from an on-manifold `z`.
pub fn compare_steps(
    man: &Manifold,
    z: &[f64],
    g: &[f64],
    eta: f64,
    projector: &GradientProjector,
) -> Result<StepComparison> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam("eta must be positive".into()));
    }
    let frame = man.tangent_frame(z)?;
    if g.len() != z.len() {
        return Err(Error::Shape {
            expected: (z.len(), 1),
            got: (g.len(), 1),
        });
    }
    let pg = projector.apply(g)?;
    let step = |dir: &[f64]| -> Vec<f64> { z.iter().zip(dir).map(|(a, b)| a - eta * b).collect() };
    let dist_std = man.dist(&step(g))?;
    let dist_proj = man.dist(&step(&pg))?;
    let eps = sub(&pg, &frame.tangent_part(g));
    Ok(StepComparison {
        dist_std,
        dist_proj,
        margin: dist_std - dist_proj,
        normal_grad: norm(&frame.normal_part(g)),
        normal_error: norm(&frame.normal_part(&eps)),
    })
}

/// Distance of a matrix to the set of matrices of rank at most `r`.
pub fn rank_variety_dist(m: &Mat, r: usize) -> Result<f64> {
    let f = svd(m)?;
    Ok(f.s.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParam("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParam("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Smallest `K` with `margin ≥ (1 − c') η ‖g^⊥‖ − K η²` over all outcomes.
pub fn margin_constant(outcomes: &[(f64, StepComparison)]) -> f64 {
    outcomes
        .iter()
        .map(|(eta, o)| {
            let first_order = eta * (o.normal_grad - o.normal_error);
            (first_order - o.margin) / (eta * eta)
        })
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
