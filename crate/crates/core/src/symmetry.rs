//! Reflection-symmetry sectors shared by torus maps and spin chains.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Eigenvalue sector of an involutive reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Sign of the reflection eigenvalue.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(Error::invalid(format!("unknown parity `{other}`"))),
        }
    }
}

/// Orthonormal basis of one sector of a reflection `i ↦ r(i)` acting on
/// basis indices `0..n`.
///
/// Each sector vector is listed as at most two `(index, coefficient)` pairs:
/// fixed points give `|i⟩` (even sector only), pairs give
/// `(|i⟩ ± |r(i)⟩)/√2` with `i < r(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSector {
    pub parity: Parity,
    pub vectors: Vec<Vec<(usize, f64)>>,
}

impl ReflectionSector {
    pub fn new(n: usize, reflect: impl Fn(usize) -> usize, parity: Parity) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut vectors = Vec::new();
        for i in 0..n {
            let j = reflect(i);
            debug_assert!(j < n && reflect(j) == i, "reflection must be an involution");
            if j == i {
                if parity == Parity::Even {
                    vectors.push(vec![(i, 1.0)]);
                }
            } else if i < j {
                vectors.push(vec![(i, h), (j, parity.sign() * h)]);
            }
        }
        ReflectionSector { parity, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// `⟨a|M|b⟩` for sector vectors `a`, `b` and a matrix accessor `M(i, j)`.
    pub fn element<T>(&self, a: usize, b: usize, m: impl Fn(usize, usize) -> T) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let mut acc = T::default();
        for &(i, ci) in &self.vectors[a] {
            for &(j, cj) in &self.vectors[b] {
                acc = acc + m(i, j) * (ci * cj);
            }
        }
        acc
    }
}
