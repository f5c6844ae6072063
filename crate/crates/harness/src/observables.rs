//! Test observables: named ladder polynomials and seeded random Hermitian ones.
//!
//! Every observable is a polynomial of degree at most 2 in `a` and `a^dagger`
//! with exact Fock matrix elements, so the same seed gives the same operator
//! at every truncation dimension.

use cutlab_core::linop::{power, OperatorMatrix, C64};
use cutlab_core::models::galerkin;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HarnessError, Result};

const PAD: usize = 2;

/// `sum_{i+j<=2} c_ij a^dagger^i a^j`, Hermitian part, `c_ij ~ N(0,1) + i N(0,1)`,
/// divided by the number of terms.
pub fn random_polynomial(dim: usize, seed: u64, index: u64) -> Result<OperatorMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut coeffs = Vec::new();
    for i in 0..=2u32 {
        for j in 0..=(2 - i) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            coeffs.push((i, j, C64::new(re, im)));
        }
    }
    let terms = coeffs.len() as f64;
    let x = galerkin(dim, PAD, |a, ad| {
        let mut acc = OperatorMatrix::zeros(a.dim());
        for &(i, j, c) in &coeffs {
            acc += &(power(ad, i) * power(a, j)).scale(c);
        }
        acc
    })?;
    Ok((&x + &x.adjoint()).scale_real(0.5 / terms))
}

/// `q`, `p`, `a`, `number`, or `random` (seeded).
pub fn named(name: &str, dim: usize, seed: u64) -> Result<OperatorMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::new(0.0, 1.0);
    Ok(match name {
        "q" => galerkin(dim, PAD, |a, ad| (a + ad).scale_real(s))?,
        "p" => galerkin(dim, PAD, |a, ad| (ad - a).scale(i * s))?,
        "a" => galerkin(dim, PAD, |a, _| a.clone())?,
        "number" => galerkin(dim, PAD, |a, ad| ad * a)?,
        "random" => random_polynomial(dim, seed, 0)?,
        other => return Err(HarnessError::Config(format!("unknown observable `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_is_hermitian_and_seeded() {
        let x = random_polynomial(12, 7, 3).unwrap();
        assert!(x.is_hermitian());
        assert_eq!(x, random_polynomial(12, 7, 3).unwrap());
        assert_ne!(x, random_polynomial(12, 7, 4).unwrap());
        assert_ne!(x, random_polynomial(12, 8, 3).unwrap());
    }

    #[test]
    fn random_is_dimension_independent() {
        let small = random_polynomial(10, 1, 0).unwrap();
        let big = random_polynomial(20, 1, 0).unwrap();
        assert_eq!(big.compress(10), small);
    }

    #[test]
    fn named_observables() {
        let q = named("q", 6, 0).unwrap();
        assert!(q.is_hermitian());
        assert!((q[(0, 1)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let n = named("number", 6, 0).unwrap();
        assert!(n.max_abs_diff(&OperatorMatrix::from_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])) < 1e-14);
        assert!(named("x", 6, 0).is_err());
    }
}
