use num_complex::Complex64;

/// Disk automorphism `z ↦ (a z + b) / (b̄ z + ā)` with `|a|² − |b|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius { a: Complex64 { re: 1.0, im: 0.0 }, b: Complex64 { re: 0.0, im: 0.0 } };

    pub fn rotation(theta: f64) -> Self {
        Mobius { a: Complex64::from_polar(1.0, theta / 2.0), b: Complex64::new(0.0, 0.0) }
    }

    /// Hyperbolic translation along the real diameter moving `0` to `t`.
    pub fn real_translation(t: f64) -> Self {
        let s = 1.0 / (1.0 - t * t).sqrt();
        Mobius { a: Complex64::new(s, 0.0), b: Complex64::new(s * t, 0.0) }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = self.b.conj() * z + self.a.conj();
        1.0 / (d * d)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.a.conj(), b: -self.b }
    }

    /// Distance to the identity as a projective map (`±` identified).
    pub fn distance_to_identity(&self) -> f64 {
        let p = (self.a - 1.0).norm().max(self.b.norm());
        let m = (self.a + 1.0).norm().max(self.b.norm());
        p.min(m)
    }
}

/// `cosh` of the curvature −1 hyperbolic distance in the unit disk.
pub fn cosh_distance(z: Complex64, w: Complex64) -> f64 {
    1.0 + 2.0 * (z - w).norm_sqr() / ((1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr()))
}

pub fn distance(z: Complex64, w: Complex64) -> f64 {
    cosh_distance(z, w).acosh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_and_composition() {
        let t = Mobius::real_translation(0.4);
        assert!((t.apply(Complex64::new(0.0, 0.0)) - 0.4).norm() < 1e-15);
        let r = Mobius::rotation(0.7);
        let z = Complex64::new(0.2, -0.3);
        let lhs = r.compose(&t).apply(z);
        assert!((lhs - r.apply(t.apply(z))).norm() < 1e-15);
        assert!(t.compose(&t.inverse()).distance_to_identity() < 1e-15);
        let det = t.a.norm_sqr() - t.b.norm_sqr();
        assert!((det - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distance_is_invariant() {
        let g = Mobius::rotation(1.1).compose(&Mobius::real_translation(0.6));
        let (z, w) = (Complex64::new(0.1, 0.5), Complex64::new(-0.3, 0.2));
        assert!((distance(g.apply(z), g.apply(w)) - distance(z, w)).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let g = Mobius::rotation(0.3).compose(&Mobius::real_translation(-0.5));
        let z = Complex64::new(0.15, 0.25);
        let h = 1e-6;
        let fd = (g.apply(z + h) - g.apply(z - h)) / (2.0 * h);
        assert!((fd - g.derivative(z)).norm() < 1e-8);
    }
}
