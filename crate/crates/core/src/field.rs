use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};

/// Tensor type of a section of `K^a ⊗ K̄^b`: coefficients of `dz^a dz̄^b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Weight(pub i32, pub i32);

impl Weight {
    pub const FUNCTION: Weight = Weight(0, 0);
    pub const ONE_FORM: Weight = Weight(1, 0);
    pub const QUADRATIC: Weight = Weight(2, 0);
    pub const DENSITY: Weight = Weight(1, 1);

    pub fn holomorphic(m: i32) -> Weight {
        Weight(m, 0)
    }

    /// Total degree `a + b`, the exponent governing metric scaling of norms.
    pub fn degree(self) -> i32 {
        self.0 + self.1
    }

    pub fn conj(self) -> Weight {
        Weight(self.1, self.0)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

impl std::ops::Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0, self.1 + rhs.1)
    }
}

/// Samples of a smooth section at the surface's chart samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionField {
    pub weight: Weight,
    pub values: Vec<Complex64>,
}

impl SectionField {
    pub fn new(weight: Weight, values: Vec<Complex64>) -> Self {
        Self { weight, values }
    }

    pub fn zeros(weight: Weight, n: usize) -> Self {
        Self::new(weight, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn constant(weight: Weight, n: usize, c: Complex64) -> Self {
        Self::new(weight, vec![c; n])
    }

    pub fn from_real(weight: Weight, values: &[f64]) -> Self {
        Self::new(weight, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::new(self.weight, self.values.iter().map(|v| v * c).collect())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.weight.conj(), self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn expect_weight(&self, w: Weight) -> Result<()> {
        if self.weight != w {
            return Err(HcscError::WeightMismatch { expected: w, found: self.weight });
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &SectionField, weight: Weight, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self::new(weight, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &SectionField) -> Result<Self> {
        other.expect_weight(self.weight)?;
        Ok(self.zip_map(other, self.weight, |a, b| a + b))
    }

    pub fn sub(&self, other: &SectionField) -> Result<Self> {
        other.expect_weight(self.weight)?;
        Ok(self.zip_map(other, self.weight, |a, b| a - b))
    }

    /// Writes the text table `weight a b` / `grid n m` / rows `i j re im`.
    pub fn write_dump<W: Write>(&self, out: &mut W, grid: (usize, usize), lattice: &[(i32, i32)]) -> Result<()> {
        if lattice.len() != self.values.len() {
            return Err(HcscError::LengthMismatch { expected: lattice.len(), found: self.values.len() });
        }
        writeln!(out, "weight {} {}", self.weight.0, self.weight.1)?;
        writeln!(out, "grid {} {}", grid.0, grid.1)?;
        for (&(i, j), v) in lattice.iter().zip(&self.values) {
            writeln!(out, "{} {} {:e} {:e}", i, j, v.re, v.im)?;
        }
        Ok(())
    }

    /// Parses a field dump. Rows are returned in file order together with
    /// their lattice indices and the declared grid shape.
    pub fn read_dump<R: BufRead>(input: R) -> Result<FieldDump> {
        let mut weight = None;
        let mut grid = None;
        let mut lattice = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| HcscError::Parse { line: lineno + 1, msg: msg.to_string() };
            match toks[0] {
                "weight" => {
                    if toks.len() != 3 {
                        return Err(err("expected `weight a b`"));
                    }
                    let a = toks[1].parse().map_err(|_| err("bad weight"))?;
                    let b = toks[2].parse().map_err(|_| err("bad weight"))?;
                    weight = Some(Weight(a, b));
                }
                "grid" => {
                    if toks.len() != 3 {
                        return Err(err("expected `grid n m`"));
                    }
                    let n = toks[1].parse().map_err(|_| err("bad grid"))?;
                    let m = toks[2].parse().map_err(|_| err("bad grid"))?;
                    grid = Some((n, m));
                }
                _ => {
                    if toks.len() != 4 {
                        return Err(err("expected `i j re im`"));
                    }
                    let i = toks[0].parse().map_err(|_| err("bad index"))?;
                    let j = toks[1].parse().map_err(|_| err("bad index"))?;
                    let re = toks[2].parse().map_err(|_| err("bad value"))?;
                    let im = toks[3].parse().map_err(|_| err("bad value"))?;
                    lattice.push((i, j));
                    values.push(Complex64::new(re, im));
                }
            }
        }
        let weight = weight.ok_or(HcscError::Parse { line: 0, msg: "missing weight header".into() })?;
        let grid = grid.ok_or(HcscError::Parse { line: 0, msg: "missing grid header".into() })?;
        Ok(FieldDump { field: SectionField::new(weight, values), grid, lattice })
    }
}

#[derive(Debug, Clone)]
pub struct FieldDump {
    pub field: SectionField,
    pub grid: (usize, usize),
    pub lattice: Vec<(i32, i32)>,
}
