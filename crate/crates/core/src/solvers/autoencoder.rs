use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{most_square_shape, svd, Mat};
use crate::prior::{Component, Covariance, GmmPrior};

/// Encoder/decoder pair between image space and the diffusion state space.
#[derive(Debug, Clone, Default)]
pub enum Autoencoder {
    #[default]
    Identity,
    /// `E` is `k x n`, `D` is `n x k`, acting on row-major flattened states;
    /// `D E` is a projection.
    FixedLinear {
        encoder: Mat,
        decoder: Mat,
        image_shape: (usize, usize),
        latent_shape: (usize, usize),
    },
}

impl Autoencoder {
    /// Linear autoencoder from a basis with orthonormal columns (`n x k`):
    /// `E = Qᵀ`, `D = Q`.
    pub fn from_orthonormal(basis: Mat, image_shape: (usize, usize), latent_shape: (usize, usize)) -> Result<Self> {
        let (n, k) = basis.shape();
        if n != image_shape.0 * image_shape.1 || k != latent_shape.0 * latent_shape.1 {
            return Err(Error::Shape {
                expected: (image_shape.0 * image_shape.1, latent_shape.0 * latent_shape.1),
                got: basis.shape(),
            });
        }
        let gram = basis.t_matmul(&basis)?;
        if (&gram - &Mat::identity(k)).max_abs() > 1e-10 {
            return Err(Error::InvalidParam("basis columns must be orthonormal".into()));
        }
        Ok(Self::FixedLinear {
            encoder: basis.transpose(),
            decoder: basis,
            image_shape,
            latent_shape,
        })
    }

    /// Random `k`-dimensional orthonormal latent space; latents use the
    /// most-square factorization of `k`.
    pub fn random<R: Rng + ?Sized>(image_shape: (usize, usize), k: usize, rng: &mut R) -> Result<Self> {
        let n = image_shape.0 * image_shape.1;
        if k == 0 || k > n {
            return Err(Error::InvalidParam(format!("latent size {k} must be in 1..={n}")));
        }
        let g = Mat::randn(n, k, rng);
        let q = svd(&g)?.u;
        Self::from_orthonormal(q, image_shape, most_square_shape(k))
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity)
    }

    pub(crate) fn check_shapes(&self, latent: (usize, usize), image: (usize, usize)) -> Result<()> {
        match self {
            Self::Identity if latent != image => Err(Error::Shape {
                expected: image,
                got: latent,
            }),
            Self::FixedLinear {
                image_shape,
                latent_shape,
                ..
            } => {
                if *image_shape != image {
                    return Err(Error::Shape {
                        expected: *image_shape,
                        got: image,
                    });
                }
                if *latent_shape != latent {
                    return Err(Error::Shape {
                        expected: *latent_shape,
                        got: latent,
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn encode(&self, x: &Mat) -> Result<Mat> {
        match self {
            Self::Identity => Ok(x.clone()),
            Self::FixedLinear {
                encoder,
                image_shape,
                latent_shape,
                ..
            } => {
                x.ensure_shape(*image_shape)?;
                Mat::from_vec(latent_shape.0, latent_shape.1, encoder.matvec(x.as_slice()))
            }
        }
    }

    pub fn decode(&self, z: &Mat) -> Result<Mat> {
        match self {
            Self::Identity => Ok(z.clone()),
            Self::FixedLinear {
                decoder,
                image_shape,
                latent_shape,
                ..
            } => {
                z.ensure_shape(*latent_shape)?;
                Mat::from_vec(image_shape.0, image_shape.1, decoder.matvec(z.as_slice()))
            }
        }
    }

    /// `Dᵀ g`.
    pub fn decode_adjoint(&self, g: &Mat) -> Result<Mat> {
        match self {
            Self::Identity => Ok(g.clone()),
            Self::FixedLinear {
                decoder,
                image_shape,
                latent_shape,
                ..
            } => {
                g.ensure_shape(*image_shape)?;
                Mat::from_vec(latent_shape.0, latent_shape.1, decoder.t_matvec(g.as_slice()))
            }
        }
    }

    /// `Eᵀ w`.
    pub fn encode_adjoint(&self, w: &Mat) -> Result<Mat> {
        match self {
            Self::Identity => Ok(w.clone()),
            Self::FixedLinear {
                encoder,
                image_shape,
                latent_shape,
                ..
            } => {
                w.ensure_shape(*latent_shape)?;
                Mat::from_vec(image_shape.0, image_shape.1, encoder.t_matvec(w.as_slice()))
            }
        }
    }

    /// Distribution of `E x` for `x` drawn from an image-space prior.
    pub fn push_forward(&self, prior: &GmmPrior) -> Result<GmmPrior> {
        let Self::FixedLinear { encoder, .. } = self else {
            return Ok(prior.clone());
        };
        let gram = encoder.matmul_t(encoder)?;
        let orthonormal_rows = (&gram - &Mat::identity(gram.rows())).max_abs() < 1e-10;
        let comps = prior
            .components()
            .iter()
            .map(|c| {
                let mean = self.encode(&c.mean)?;
                let cov = match (&c.cov, orthonormal_rows) {
                    (Covariance::Scalar(v), true) => Covariance::Scalar(*v),
                    (cov, _) => {
                        let full = cov.to_matrix(prior.dim());
                        Covariance::full(encoder.matmul(&full)?.matmul_t(encoder)?)?
                    }
                };
                Ok(Component {
                    weight: c.weight,
                    mean,
                    cov,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GmmPrior::new(comps)
    }
}
