//! Bayesian linear regression on second-order features.
//!
//! Non-intercept feature columns are standardized and `y` is centered before
//! fitting; coefficients are mapped back to raw features afterwards, with the
//! intercept absorbing the centering. Constant columns keep scale 1, so their
//! coefficients are drawn from the prior alone.
//!
//! The horseshoe sampler is the auxiliary-variable Gibbs scheme of Makalic and
//! Schmidt: `beta_j ~ N(0, sigma^2 tau^2 lambda_j^2)` with half-Cauchy local
//! and global scales expressed through inverse-gamma mixtures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::features::{featurize, n_features, SurrogateModel};
use super::linalg::{cholesky_jittered, solve_cholesky, solve_lower_transpose};
use super::SampleSet;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

const SCALE_MIN: f64 = 1e-10;
const SCALE_MAX: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior<T> {
    /// Sparse horseshoe prior; the last of `gibbs_steps` Gibbs sweeps is the draw.
    Horseshoe { gibbs_steps: usize },
    /// `beta ~ N(0, sigma^2 / precision)`, `sigma^2 ~ InvGamma(a0, b0)`.
    Ridge { precision: T, a0: T, b0: T },
}

impl<T: Scalar> Default for Prior<T> {
    fn default() -> Self {
        Prior::Horseshoe { gibbs_steps: 300 }
    }
}

impl<T: Scalar> Prior<T> {
    pub fn ridge() -> Self {
        Prior::Ridge {
            precision: lit(1e-3),
            a0: T::one(),
            b0: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Prior::Horseshoe { gibbs_steps: 0 } => {
                Err(Error::InvalidParameter("gibbs_steps must be >= 1".into()))
            }
            Prior::Ridge { precision, a0, b0 } if !(precision > T::zero() && a0 > T::zero() && b0 > T::zero()) => {
                Err(Error::InvalidParameter("ridge precision, a0 and b0 must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Standardized design with its Gram matrix.
struct Design<T> {
    n: usize,
    q: usize,
    mu: Vec<T>,
    scale: Vec<T>,
    y_mean: T,
    yty: T,
    ztz: Vec<T>,
    zty: Vec<T>,
}

impl<T: Scalar> Design<T> {
    fn new(data: &SampleSet<T>) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::InvalidParameter("cannot fit a surrogate to zero samples".into()));
        }
        let m = data.m();
        let q = n_features(m) - 1;
        let rows: Vec<Vec<T>> = data.iter().map(|r| featurize::<T>(r.s.bits())[1..].to_vec()).collect();
        let ys: Vec<T> = data.iter().map(|r| r.y).collect();
        let nf = from_usize::<T>(n);
        let y_mean = ys.iter().copied().sum::<T>() / nf;

        let mut mu = vec![T::zero(); q];
        for row in &rows {
            for (m, &f) in mu.iter_mut().zip(row) {
                *m += f;
            }
        }
        mu.iter_mut().for_each(|m| *m /= nf);
        let mut scale = vec![T::zero(); q];
        for row in &rows {
            for j in 0..q {
                let d = row[j] - mu[j];
                scale[j] += d * d;
            }
        }
        for s in scale.iter_mut() {
            let sd = (*s / nf).sqrt();
            *s = if sd > lit(1e-12) { sd } else { T::one() };
        }

        let mut ztz = vec![T::zero(); q * q];
        let mut zty = vec![T::zero(); q];
        let mut yty = T::zero();
        let mut z = vec![T::zero(); q];
        for (row, &y) in rows.iter().zip(&ys) {
            let yc = y - y_mean;
            yty += yc * yc;
            for j in 0..q {
                z[j] = (row[j] - mu[j]) / scale[j];
            }
            for i in 0..q {
                if z[i] == T::zero() {
                    continue;
                }
                zty[i] += z[i] * yc;
                for j in i..q {
                    ztz[i * q + j] += z[i] * z[j];
                }
            }
        }
        for i in 0..q {
            for j in 0..i {
                ztz[i * q + j] = ztz[j * q + i];
            }
        }
        Ok(Self {
            n,
            q,
            mu,
            scale,
            y_mean,
            yty,
            ztz,
            zty,
        })
    }

    /// Raw-feature coefficients from standardized ones.
    fn to_alpha(&self, beta: &[T]) -> Vec<T> {
        let mut alpha = Vec::with_capacity(self.q + 1);
        alpha.push(self.y_mean);
        for j in 0..self.q {
            let a = beta[j] / self.scale[j];
            alpha[0] -= self.mu[j] * a;
            alpha.push(a);
        }
        alpha
    }

    /// `||y - Z beta||^2` via the Gram matrix.
    fn rss(&self, beta: &[T]) -> T {
        let q = self.q;
        let mut quad = T::zero();
        let mut cross = T::zero();
        for i in 0..q {
            cross += beta[i] * self.zty[i];
            let mut row = T::zero();
            for j in 0..q {
                row += self.ztz[i * q + j] * beta[j];
            }
            quad += beta[i] * row;
        }
        (self.yty - (cross + cross) + quad).max(T::zero())
    }

    /// Precision `ZtZ + diag(prior_precision)`.
    fn precision(&self, prior_precision: &[T]) -> Vec<T> {
        let mut a = self.ztz.clone();
        for j in 0..self.q {
            a[j * self.q + j] += prior_precision[j];
        }
        a
    }

    /// Draw from `N(A^-1 Zty, sigma2 A^-1)`.
    fn gaussian_draw(&self, a: &[T], sigma2: T, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        let q = self.q;
        let l = cholesky_jittered(a, q)?;
        let mut mean = self.zty.clone();
        solve_cholesky(&l, q, &mut mean);
        let mut noise: Vec<T> = (0..q).map(|_| lit(StandardNormal.sample(rng))).collect();
        solve_lower_transpose(&l, q, &mut noise);
        let sd = sigma2.sqrt();
        Ok(mean.iter().zip(&noise).map(|(&m, &z)| m + sd * z).collect())
    }
}

fn clamp_scale<T: Scalar>(v: T) -> T {
    if !v.is_finite() {
        return lit(SCALE_MAX);
    }
    v.max(lit(SCALE_MIN)).min(lit(SCALE_MAX))
}

fn inv_gamma<T: Scalar>(shape: T, rate: T, rng: &mut ChaCha8Rng) -> T {
    let g = Gamma::new(to_f64(shape), 1.0).expect("positive gamma shape").sample(rng);
    clamp_scale(lit::<T>(to_f64(rate) / g))
}

struct HorseshoeState<T> {
    beta: Vec<T>,
    lambda2: Vec<T>,
    nu: Vec<T>,
    tau2: T,
    xi: T,
    sigma2: T,
}

impl<T: Scalar> HorseshoeState<T> {
    fn new(q: usize) -> Self {
        Self {
            beta: vec![T::zero(); q],
            lambda2: vec![T::one(); q],
            nu: vec![T::one(); q],
            tau2: T::one(),
            xi: T::one(),
            sigma2: T::one(),
        }
    }

    fn step(&mut self, d: &Design<T>, rng: &mut ChaCha8Rng) -> Result<()> {
        let q = d.q;
        let half = lit::<T>(0.5);
        let prior_precision: Vec<T> = self.lambda2.iter().map(|&l| T::one() / (self.tau2 * l)).collect();
        let a = d.precision(&prior_precision);
        self.beta = d.gaussian_draw(&a, self.sigma2, rng)?;

        let shrink: T = self
            .beta
            .iter()
            .zip(&prior_precision)
            .map(|(&b, &p)| b * b * p)
            .sum();
        self.sigma2 = inv_gamma(
            from_usize::<T>(d.n + q) * half,
            (d.rss(&self.beta) + shrink) * half,
            rng,
        );
        for j in 0..q {
            let b2 = self.beta[j] * self.beta[j];
            self.lambda2[j] = inv_gamma(
                T::one(),
                T::one() / self.nu[j] + b2 / (lit::<T>(2.0) * self.tau2 * self.sigma2),
                rng,
            );
        }
        let weighted: T = self.beta.iter().zip(&self.lambda2).map(|(&b, &l)| b * b / l).sum();
        self.tau2 = inv_gamma(
            from_usize::<T>(q + 1) * half,
            T::one() / self.xi + weighted / (lit::<T>(2.0) * self.sigma2),
            rng,
        );
        for j in 0..q {
            self.nu[j] = inv_gamma(T::one(), T::one() + T::one() / self.lambda2[j], rng);
        }
        self.xi = inv_gamma(T::one(), T::one() + T::one() / self.tau2, rng);
        Ok(())
    }
}

/// Ridge posterior: precision matrix, posterior mean and `(a_n, b_n)`.
fn ridge_posterior<T: Scalar>(d: &Design<T>, precision: T, a0: T, b0: T) -> Result<(Vec<T>, Vec<T>, T, T)> {
    let a = d.precision(&vec![precision; d.q]);
    let l = cholesky_jittered(&a, d.q)?;
    let mut mean = d.zty.clone();
    solve_cholesky(&l, d.q, &mut mean);
    let explained: T = mean.iter().zip(&d.zty).map(|(&m, &z)| m * z).sum();
    let half = lit::<T>(0.5);
    let a_n = a0 + from_usize::<T>(d.n) * half;
    let b_n = b0 + ((d.yty - explained) * half).max(T::zero());
    Ok((a, mean, a_n, b_n))
}

/// One posterior draw of the surrogate coefficients.
pub fn fit_posterior_sample<T: Scalar>(data: &SampleSet<T>, prior: &Prior<T>, seed: u64) -> Result<SurrogateModel<T>> {
    prior.validate()?;
    let d = Design::new(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = match *prior {
        Prior::Horseshoe { gibbs_steps } => {
            let mut state = HorseshoeState::new(d.q);
            for _ in 0..gibbs_steps {
                state.step(&d, &mut rng)?;
            }
            state.beta
        }
        Prior::Ridge { precision, a0, b0 } => {
            let (a, _, a_n, b_n) = ridge_posterior(&d, precision, a0, b0)?;
            let sigma2 = inv_gamma(a_n, b_n, &mut rng);
            d.gaussian_draw(&a, sigma2, &mut rng)?
        }
    };
    SurrogateModel::new(data.m(), d.to_alpha(&beta))
}

/// Posterior mean of the coefficients: exact for the ridge prior, the average
/// of the second half of the Gibbs chain for the horseshoe.
pub fn posterior_mean<T: Scalar>(data: &SampleSet<T>, prior: &Prior<T>, seed: u64) -> Result<SurrogateModel<T>> {
    prior.validate()?;
    let d = Design::new(data)?;
    let beta = match *prior {
        Prior::Horseshoe { gibbs_steps } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = HorseshoeState::new(d.q);
            let burn = gibbs_steps / 2;
            let mut sum = vec![T::zero(); d.q];
            for step in 0..gibbs_steps {
                state.step(&d, &mut rng)?;
                if step >= burn {
                    for (s, &b) in sum.iter_mut().zip(&state.beta) {
                        *s += b;
                    }
                }
            }
            let kept = from_usize::<T>(gibbs_steps - burn);
            sum.into_iter().map(|s| s / kept).collect()
        }
        Prior::Ridge { precision, a0, b0 } => ridge_posterior(&d, precision, a0, b0)?.1,
    };
    SurrogateModel::new(data.m(), d.to_alpha(&beta))
}
