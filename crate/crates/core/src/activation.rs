//! Holomorphic activation functions.
//!
//! Every activation here has real Taylor coefficients, so `g(z̄) = conj(g(z))`.
//! The Hessian recursions depend on that symmetry.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `1 / (1 + exp(-z))`, with poles at `iπ(2k+1)`.
    Sigmoid,
    /// Third-degree Taylor polynomial of the sigmoid, `1/2 + z/4 - z³/48`.
    Taylor3,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 3] = [
        Activation::Sigmoid,
        Activation::Taylor3,
        Activation::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Taylor3 => "taylor3",
            Activation::Identity => "identity",
        }
    }

    /// Value at `z`. Near the sigmoid poles the result may be non-finite;
    /// callers check for that.
    pub fn eval(self, z: C64) -> C64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Taylor3 => 0.5 + z / 4.0 - z * z * z / 48.0,
            Activation::Identity => z,
        }
    }

    pub fn d1(self, z: C64) -> C64 {
        match self {
            Activation::Sigmoid => {
                let g = sigmoid(z);
                g * (1.0 - g)
            }
            Activation::Taylor3 => 0.25 - z * z / 16.0,
            Activation::Identity => C64::new(1.0, 0.0),
        }
    }

    pub fn d2(self, z: C64) -> C64 {
        match self {
            Activation::Sigmoid => {
                let g = sigmoid(z);
                g * (1.0 - g) * (1.0 - 2.0 * g)
            }
            Activation::Taylor3 => -z / 8.0,
            Activation::Identity => C64::new(0.0, 0.0),
        }
    }

    /// Distance from `z` to the nearest pole; infinite for entire functions.
    pub fn pole_distance(self, z: C64) -> f64 {
        match self {
            Activation::Sigmoid => {
                // Poles sit on the imaginary axis at odd multiples of π.
                let k = ((z.im / PI - 1.0) / 2.0).round();
                let nearest = PI * (2.0 * k + 1.0);
                let lower = nearest - 2.0 * PI;
                let upper = nearest + 2.0 * PI;
                [lower, nearest, upper]
                    .iter()
                    .map(|&p| C64::new(z.re, z.im - p).norm())
                    .fold(f64::INFINITY, f64::min)
            }
            Activation::Taylor3 | Activation::Identity => f64::INFINITY,
        }
    }
}

fn sigmoid(z: C64) -> C64 {
    1.0 / (1.0 + (-z).exp())
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown activation `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-12)
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(Activation::Sigmoid.eval(c(0.0, 0.0)), c(0.5, 0.0));
        assert_eq!(Activation::Taylor3.eval(c(0.0, 0.0)), c(0.5, 0.0));
        assert_eq!(Activation::Sigmoid.d1(c(0.0, 0.0)), c(0.25, 0.0));
        assert_eq!(Activation::Taylor3.d2(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(Activation::Sigmoid.d2(c(0.0, 0.0)), c(0.0, 0.0));
    }

    #[test]
    fn taylor3_at_one() {
        let v = Activation::Taylor3.eval(c(1.0, 0.0));
        assert!((v.re - (0.5 + 0.25 - 1.0 / 48.0)).abs() < 1e-15);
        assert!((v.re - 0.729_166_666_666_666_7).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn identity_derivatives() {
        for z in [c(0.0, 0.0), c(3.0, -2.0), c(-1e6, 4.0)] {
            assert_eq!(Activation::Identity.eval(z), z);
            assert_eq!(Activation::Identity.d1(z), c(1.0, 0.0));
            assert_eq!(Activation::Identity.d2(z), c(0.0, 0.0));
        }
    }

    #[test]
    fn sigmoid_pole_is_non_finite() {
        let v = Activation::Sigmoid.eval(c(0.0, PI));
        // exp(-iπ) = -1 up to rounding, so 1 + exp(-z) is tiny and the result is huge or infinite.
        assert!(!v.is_finite() || v.norm() > 1e14);
        assert!(Activation::Sigmoid.pole_distance(c(0.0, PI)) < 1e-12);
        assert!((Activation::Sigmoid.pole_distance(c(0.0, 0.0)) - PI).abs() < 1e-12);
        assert!((Activation::Sigmoid.pole_distance(c(1.0, -3.0 * PI)) - 1.0).abs() < 1e-12);
        assert_eq!(Activation::Taylor3.pole_distance(c(0.0, PI)), f64::INFINITY);
    }

    #[test]
    fn names_round_trip() {
        for a in Activation::ALL {
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                format!("\"{}\"", a.name())
            );
        }
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn conjugation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let r = rng.gen_range(0.0..2.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            let z = C64::from_polar(r, phi);
            for a in Activation::ALL {
                assert!(
                    (a.eval(z.conj()) - a.eval(z).conj()).norm() <= 1e-14,
                    "{a} at {z}"
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Holomorphic functions: the derivative along the real axis is the complex derivative.
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0;
        while checked < 100 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if Activation::Sigmoid.pole_distance(z) <= 0.5 {
                continue;
            }
            for a in Activation::ALL {
                let fd1 = (a.eval(z + h) - a.eval(z - h)) / (2.0 * h);
                let fd2 = (a.d1(z + h) - a.d1(z - h)) / (2.0 * h);
                // Also along the imaginary axis: f'(z) = (f(z+ih) - f(z-ih)) / (2ih).
                let ih = c(0.0, h);
                let fd1i = (a.eval(z + ih) - a.eval(z - ih)) / (2.0 * ih);
                let abs_floor = 1e-9;
                for (fd, exact) in [(fd1, a.d1(z)), (fd1i, a.d1(z)), (fd2, a.d2(z))] {
                    let err = (fd - exact).norm();
                    assert!(err <= 1e-6 * exact.norm() + abs_floor, "{a} at {z}: {err}");
                }
                if a.d1(z).norm() > 1e-3 {
                    assert!(rel(fd1, a.d1(z)) <= 1e-6);
                }
            }
            checked += 1;
        }
    }
}
