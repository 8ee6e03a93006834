//! Genus-2 Bolza surface: the regular hyperbolic octagon with interior
//! angles π/4 in the unit disk, opposite sides glued by the standard
//! Fuchsian generators.
//!
//! Samples live on a uniform Cartesian grid restricted to the octagon.
//! Stencils that leave the octagon read ghost values. A ghost value at `z`
//! is a least-squares polynomial fit over an unstructured cloud made of the
//! interior samples and their images under nearby group elements, each
//! image carrying the automorphy factor of its weight. Ghost rows are
//! therefore sparse combinations of interior samples and every operator is
//! a sparse matrix on the interior samples.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;

use crate::field::Weight;
use crate::mobius::{cosh_distance, Mobius};
use crate::par;
use crate::sparse::CsrMatrix;

use super::DiffOp;

/// Octagon side count.
pub const SIDES: usize = 8;

/// Discretization parameters of the octagon chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BolzaParams {
    /// Polynomial degree of the ghost-value fits.
    pub fit_degree: usize,
    /// Cloud points per ghost fit.
    pub fit_points: usize,
    /// Hyperbolic radius of the support of the quadrature cutoff around the
    /// octagon center; must exceed the circumradius.
    pub support_radius: f64,
}

impl Default for BolzaParams {
    fn default() -> Self {
        BolzaParams { fit_degree: 6, fit_points: 80, support_radius: 2.8 }
    }
}

/// Sixth-order centered stencils at offsets −3..=3.
const FIRST: [f64; 7] = [-1.0 / 60.0, 9.0 / 60.0, -45.0 / 60.0, 0.0, 45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
const SECOND: [f64; 7] = [2.0 / 180.0, -27.0 / 180.0, 270.0 / 180.0, -490.0 / 180.0, 270.0 / 180.0, -27.0 / 180.0, 2.0 / 180.0];
const REACH: i32 = 3;

/// Exact geometry of the regular octagon and its side pairings.
#[derive(Debug, Clone)]
pub struct Octagon {
    /// Euclidean radius of the vertices, `2^{-1/4}`.
    pub vertex_radius: f64,
    /// Euclidean radius of the side midpoints.
    pub midpoint_radius: f64,
    /// Distance from the origin to the centers of the side circles.
    pub circle_center: f64,
    pub circle_radius: f64,
    /// `generators[k]` translates across the diameter at angle `kπ/4`,
    /// moving the side at angle `(k+4)π/4` onto the side at angle `kπ/4`.
    pub generators: [Mobius; SIDES],
}

impl Octagon {
    pub fn regular() -> Self {
        let cos_mid = (PI / 8.0).cos() / (PI / 8.0).sin();
        let d_mid = cos_mid.acosh();
        let m = (d_mid / 2.0).tanh();
        let t = d_mid.tanh();
        let translation = Mobius::real_translation(t);
        let generators = std::array::from_fn(|k| {
            let th = k as f64 * PI / 4.0;
            Mobius::rotation(th).compose(&translation).compose(&Mobius::rotation(-th))
        });
        Self {
            vertex_radius: 2f64.powf(-0.25),
            midpoint_radius: m,
            circle_center: (1.0 + m * m) / (2.0 * m),
            circle_radius: (1.0 - m * m) / (2.0 * m),
            generators,
        }
    }

    pub fn vertices(&self) -> [Complex64; SIDES] {
        std::array::from_fn(|k| Complex64::from_polar(self.vertex_radius, (2 * k + 1) as f64 * PI / 8.0))
    }

    /// Signed Euclidean distance to side circle `k`; positive on the octagon side.
    pub fn side_distance(&self, z: Complex64, k: usize) -> f64 {
        let c = Complex64::from_polar(self.circle_center, k as f64 * PI / 4.0);
        (z - c).norm() - self.circle_radius
    }

    pub fn min_side_distance(&self, z: Complex64) -> f64 {
        (0..SIDES).map(|k| self.side_distance(z, k)).fold(f64::INFINITY, f64::min)
    }

    /// Signed hyperbolic distance to the geodesic carrying side `k`.
    pub fn side_hyperbolic_distance(&self, z: Complex64, k: usize) -> f64 {
        let c = Complex64::from_polar(self.circle_center, k as f64 * PI / 4.0);
        let rho = self.circle_radius;
        (((z - c).norm_sqr() - rho * rho) / (rho * (1.0 - z.norm_sqr()))).asinh()
    }

    pub fn min_side_hyperbolic_distance(&self, z: Complex64) -> f64 {
        (0..SIDES).map(|k| self.side_hyperbolic_distance(z, k)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() < 1.0 && self.min_side_distance(z) > 0.0
    }

    /// Maps `z` into the closed octagon, returning the image and the group
    /// element used.
    pub fn reduce(&self, z: Complex64) -> (Complex64, Mobius) {
        let mut w = z;
        let mut g = Mobius::IDENTITY;
        for _ in 0..64 {
            let (k, d) = (0..SIDES).map(|k| (k, self.side_distance(w, k))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if d >= 0.0 {
                break;
            }
            let step = self.generators[(k + 4) % SIDES];
            w = step.apply(w);
            g = step.compose(&g);
        }
        (w, g)
    }

    /// The surface group relation `a B c D A b C d` in terms of the generators.
    pub fn relation_word(&self) -> Mobius {
        let inv = |m: &Mobius| m.inverse();
        let g = &self.generators;
        let word = [g[0], inv(&g[1]), g[2], inv(&g[3]), inv(&g[0]), g[1], inv(&g[2]), g[3]];
        word.iter().fold(Mobius::IDENTITY, |acc, m| acc.compose(m))
    }

    /// Group elements `γ` with `cosh d(0, γ0) ≤ cosh(radius)`, identity first.
    pub fn group_ball(&self, radius: f64) -> Vec<Mobius> {
        let origin = Complex64::new(0.0, 0.0);
        let vertex_dist = cosh_distance(origin, self.vertices()[0]).acosh();
        let prune = (radius + 2.0 * vertex_dist).cosh();
        let keep = radius.cosh();
        let base = Complex64::new(0.0123, 0.0071);
        let key = |m: &Mobius| {
            let w = m.apply(base);
            ((w.re * 1e10).round() as i64, (w.im * 1e10).round() as i64)
        };
        let mut seen: HashMap<(i64, i64), ()> = HashMap::new();
        seen.insert(key(&Mobius::IDENTITY), ());
        let mut frontier = vec![Mobius::IDENTITY];
        let mut out = vec![Mobius::IDENTITY];
        let mut gens: Vec<Mobius> = self.generators.to_vec();
        gens.extend(self.generators.iter().map(|g| g.inverse()));
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for m in &frontier {
                for g in &gens {
                    let c = m.compose(g);
                    let cd = cosh_distance(origin, c.apply(origin));
                    if cd > prune {
                        continue;
                    }
                    if seen.insert(key(&c), ()).is_none() {
                        if cd <= keep {
                            out.push(c);
                        }
                        next.push(c);
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

/// Smooth step: 0 for `u ≤ −1`, 1 for `u ≥ 1`, C^∞ in between.
fn smooth_step(u: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let (a, b) = (h(1.0 + u), h(1.0 - u));
    if a + b == 0.0 {
        return if u > 0.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

#[derive(Debug, Clone)]
struct GhostRow {
    /// `(interior index, fit weight, γ'(source sample), (1−|γp|²)/(1−|z|²))`.
    entries: Vec<(usize, f64, Complex64, f64)>,
}

impl GhostRow {
    fn coefficients(&self, w: Weight) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.entries.iter().map(move |&(k, a, gp, ratio)| {
            let inv = 1.0 / gp;
            (k, a * ratio.powi(w.degree()) * inv.powi(w.0) * inv.conj().powi(w.1))
        })
    }
}

#[derive(Debug)]
pub struct BolzaChart {
    pub octagon: Octagon,
    pub params: BolzaParams,
    pub grid_n: usize,
    pub spacing: f64,
    pub points: Vec<Complex64>,
    pub lattice: Vec<(i32, i32)>,
    pub ghost_points: Vec<Complex64>,
    ghosts: Vec<GhostRow>,
    /// Extended indices at offsets `−3..=3` along x, then along y.
    stencil: Vec<[usize; 14]>,
    pub quadrature: Vec<f64>,
    pub background: Vec<f64>,
    pub background_dlog: Vec<Complex64>,
    op_cache: Mutex<HashMap<(DiffOp, Weight), Arc<CsrMatrix>>>,
}

impl BolzaChart {
    pub fn new(grid_n: usize) -> Self {
        Self::with_params(grid_n, BolzaParams::default())
    }

    pub fn with_params(grid_n: usize, params: BolzaParams) -> Self {
        let octagon = Octagon::regular();
        let r0 = octagon.vertex_radius;
        let h = 2.0 * r0 / grid_n as f64;
        let coord = |i: i32| -r0 + (i as f64 + 0.5) * h;
        let at = |i: i32, j: i32| Complex64::new(coord(i), coord(j));

        let mut points = Vec::new();
        let mut lattice = Vec::new();
        for j in 0..grid_n as i32 {
            for i in 0..grid_n as i32 {
                let z = at(i, j);
                if octagon.contains(z) {
                    points.push(z);
                    lattice.push((i, j));
                }
            }
        }
        let n = points.len();
        let mut ext_index: HashMap<(i32, i32), usize> = lattice.iter().enumerate().map(|(k, &ij)| (ij, k)).collect();

        // Ghosts: stencil halo plus the seam band of the quadrature.
        let mut ghost_lattice: Vec<(i32, i32)> = Vec::new();
        let mut add_ghost = |ij: (i32, i32), ext_index: &mut HashMap<(i32, i32), usize>| {
            if !ext_index.contains_key(&ij) {
                ext_index.insert(ij, n + ghost_lattice.len());
                ghost_lattice.push(ij);
            }
        };
        for &(i, j) in &lattice {
            for d in 1..=REACH {
                for ij in [(i - d, j), (i + d, j), (i, j - d), (i, j + d)] {
                    add_ghost(ij, &mut ext_index);
                }
            }
        }
        let margin = grid_n as i32 / 4;
        for j in -margin..grid_n as i32 + margin {
            for i in -margin..grid_n as i32 + margin {
                let z = at(i, j);
                if z.norm() < 1.0 && !octagon.contains(z) && crate::mobius::distance(Complex64::new(0.0, 0.0), z) < params.support_radius {
                    add_ghost((i, j), &mut ext_index);
                }
            }
        }
        let ghost_points: Vec<Complex64> = ghost_lattice.iter().map(|&(i, j)| at(i, j)).collect();
        assert!(ghost_points.iter().all(|z| z.norm() < 1.0), "grid {grid_n} too coarse for the octagon stencils");

        let reach = ghost_points.iter().map(|&z| -octagon.min_side_distance(z)).fold(0.0, f64::max);
        let cloud = Cloud::build(&octagon, &points, reach + 6.0 * h, h);
        let ghosts = par::map_slice(&ghost_points, |&z| cloud.fit_row(z, h, &params));

        let stencil = lattice
            .iter()
            .map(|&(i, j)| {
                std::array::from_fn(|m| {
                    let d = (m % 7) as i32 - REACH;
                    let ij = if m < 7 { (i + d, j) } else { (i, j + d) };
                    ext_index[&ij]
                })
            })
            .collect();

        let background: Vec<f64> = points.iter().map(|&z| hyperbolic_density(z)).collect();
        let background_dlog = points.iter().map(|&z| hyperbolic_dlog(z)).collect();

        let mut chart = BolzaChart {
            octagon,
            params,
            grid_n,
            spacing: h,
            points,
            lattice,
            ghost_points,
            ghosts,
            stencil,
            quadrature: Vec::new(),
            background,
            background_dlog,
            op_cache: Mutex::new(HashMap::new()),
        };
        chart.quadrature = chart.build_quadrature();
        chart
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ghost_count(&self) -> usize {
        self.ghosts.len()
    }

    /// Interior values followed by ghost values.
    pub fn extend(&self, w: Weight, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = v.to_vec();
        out.extend(self.ghosts.iter().map(|g| g.coefficients(w).map(|(k, c)| v[k] * c).sum::<Complex64>()));
        out
    }

    /// Sparse extension matrix `(n + ghosts) × n` for weight `w`.
    pub fn extension_matrix(&self, w: Weight) -> CsrMatrix {
        let n = self.len();
        let mut rows: Vec<Vec<(usize, Complex64)>> = (0..n).map(|k| vec![(k, Complex64::new(1.0, 0.0))]).collect();
        rows.extend(self.ghosts.iter().map(|g| g.coefficients(w).collect()));
        CsrMatrix::from_rows(n, rows)
    }

    fn stencil_matrix(&self, op: DiffOp) -> CsrMatrix {
        let h = self.spacing;
        let next = self.len() + self.ghost_count();
        let rows = self
            .stencil
            .iter()
            .map(|s| {
                let mut row = Vec::with_capacity(14);
                for m in 0..7 {
                    match op {
                        DiffOp::Dz | DiffOp::Dzbar => {
                            let sy = if op == DiffOp::Dz { -1.0 } else { 1.0 };
                            if FIRST[m] != 0.0 {
                                row.push((s[m], Complex64::new(0.5 * FIRST[m] / h, 0.0)));
                                row.push((s[7 + m], Complex64::new(0.0, 0.5 * sy * FIRST[m] / h)));
                            }
                        }
                        DiffOp::DzDzbar => {
                            let c = Complex64::new(0.25 * SECOND[m] / (h * h), 0.0);
                            row.push((s[m], c));
                            row.push((s[7 + m], c));
                        }
                    }
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(next, rows)
    }

    /// Operator matrix on interior samples of weight `w`.
    pub fn op_matrix(&self, op: DiffOp, w: Weight) -> Arc<CsrMatrix> {
        if let Some(m) = self.op_cache.lock().unwrap().get(&(op, w)) {
            return m.clone();
        }
        let m = Arc::new(self.stencil_matrix(op).matmul(&self.extension_matrix(w)));
        self.op_cache.lock().unwrap().insert((op, w), m.clone());
        m
    }

    pub fn apply(&self, op: DiffOp, w: Weight, v: &[Complex64]) -> Vec<Complex64> {
        self.op_matrix(op, w).matvec(v)
    }

    /// Stencil applied to a closed-form function evaluated at interior and
    /// ghost points, bypassing the ghost fits.
    pub fn apply_exact(&self, op: DiffOp, f: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        let ext: Vec<Complex64> = self.points.iter().chain(&self.ghost_points).map(|&z| f(z)).collect();
        self.stencil_matrix(op).matvec(&ext)
    }

    /// Radial cutoff, 1 at the octagon center and 0 beyond the support radius.
    fn cutoff(&self, z: Complex64) -> f64 {
        if z.norm() >= 1.0 {
            return 0.0;
        }
        let d = crate::mobius::distance(Complex64::new(0.0, 0.0), z);
        smooth_step(1.0 - 2.0 * d / self.params.support_radius)
    }

    /// Trapezoid rule on the Cartesian grid against the partition of unity
    /// `χ / Σ_γ χ∘γ`, folded back onto interior samples through the
    /// weight-(0,0) ghost rows.
    fn build_quadrature(&self) -> Vec<f64> {
        let ball = self.octagon.group_ball(2.0 * self.params.support_radius + 0.1);
        let partition = |z: Complex64| -> f64 {
            let c = self.cutoff(z);
            if c == 0.0 {
                return 0.0;
            }
            let total: f64 = ball.iter().map(|g| self.cutoff(g.apply(z))).sum();
            c / total
        };
        let h2 = self.spacing * self.spacing;
        let cell = |z: Complex64| 2.0 * hyperbolic_density(z) * h2 * partition(z);
        let mut weights: Vec<f64> = par::map_slice(&self.points, |&z| cell(z));
        let ghost_weights: Vec<f64> = par::map_slice(&self.ghost_points, |&z| cell(z));
        for (g, wg) in self.ghosts.iter().zip(&ghost_weights) {
            if *wg == 0.0 {
                continue;
            }
            for (k, c) in g.coefficients(Weight::FUNCTION) {
                weights[k] += wg * c.re;
            }
        }
        weights
    }
}

/// Background hyperbolic density `g = 2/(1−|z|²)²`, so `2g|dz|²` has Gauss curvature −1.
pub fn hyperbolic_density(z: Complex64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    2.0 / (s * s)
}

/// `∂_z log g` for the hyperbolic density.
pub fn hyperbolic_dlog(z: Complex64) -> Complex64 {
    2.0 * z.conj() / (1.0 - z.norm_sqr())
}

/// Interior samples and their images under nearby group elements.
struct Cloud {
    pos: Vec<Complex64>,
    src: Vec<usize>,
    deriv: Vec<Complex64>,
    buckets: HashMap<(i32, i32), Vec<usize>>,
    bucket: f64,
}

impl Cloud {
    fn build(oct: &Octagon, interior: &[Complex64], band: f64, h: f64) -> Self {
        let ball = oct.group_ball(7.5);
        let mut pos = interior.to_vec();
        let mut src: Vec<usize> = (0..interior.len()).collect();
        let mut deriv = vec![Complex64::new(1.0, 0.0); interior.len()];
        for g in ball.iter().skip(1) {
            for (k, &p) in interior.iter().enumerate() {
                let c = g.apply(p);
                if c.norm() < 1.0 && oct.min_side_distance(c) > -band {
                    pos.push(c);
                    src.push(k);
                    deriv.push(g.derivative(p));
                }
            }
        }
        let bucket = 2.0 * h;
        let mut buckets: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
        for (k, c) in pos.iter().enumerate() {
            buckets.entry(((c.re / bucket).floor() as i32, (c.im / bucket).floor() as i32)).or_default().push(k);
        }
        Self { pos, src, deriv, buckets, bucket }
    }

    fn nearest(&self, z: Complex64, k: usize) -> Vec<(f64, usize)> {
        let (bi, bj) = ((z.re / self.bucket).floor() as i32, (z.im / self.bucket).floor() as i32);
        let mut found: Vec<(f64, usize)> = Vec::new();
        let mut ring = 1;
        loop {
            found.clear();
            for dj in -ring..=ring {
                for di in -ring..=ring {
                    if let Some(v) = self.buckets.get(&(bi + di, bj + dj)) {
                        found.extend(v.iter().map(|&c| ((self.pos[c] - z).norm(), c)));
                    }
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                // Points within `ring * bucket` are complete.
                if found[k - 1].0 <= ring as f64 * self.bucket {
                    found.truncate(k);
                    return found;
                }
            }
            ring += 1;
            assert!(ring < 64, "ghost fit found too few cloud points near {z}");
        }
    }

    /// Weights reproducing the value at `z` of a weighted least-squares
    /// polynomial fit of `(1−|w|²)^{a+b} Φ(w)` over the nearest cloud points.
    fn fit_row(&self, z: Complex64, h: f64, params: &BolzaParams) -> GhostRow {
        let near = self.nearest(z, params.fit_points);
        let degree = params.fit_degree as i32;
        let monomials: Vec<(i32, i32)> = (0..=degree).flat_map(|d| (0..=d).map(move |py| (d - py, py))).collect();
        let np = monomials.len();
        let r_max = near.last().unwrap().0.max(h);
        let weight = |r: f64| (-(r / r_max).powi(2)).exp();
        let v = Mat::<f64>::from_fn(near.len(), np, |r, c| {
            let d = (self.pos[near[r].1] - z) / r_max;
            let (px, py) = monomials[c];
            d.re.powi(px) * d.im.powi(py) * weight(near[r].0).sqrt()
        });
        // Row of the pseudo-inverse selecting the constant coefficient.
        let vtv = v.transpose() * &v;
        let mut e0 = Mat::<f64>::zeros(np, 1);
        e0[(0, 0)] = 1.0;
        let y = vtv.partial_piv_lu().solve(&e0);
        let alpha = &v * &y;
        let base = 1.0 - z.norm_sqr();
        let entries = near
            .iter()
            .enumerate()
            .map(|(r, &(dist, c))| {
                let ratio = (1.0 - self.pos[c].norm_sqr()) / base;
                (self.src[c], alpha[(r, 0)] * weight(dist).sqrt(), self.deriv[c], ratio)
            })
            .collect();
        GhostRow { entries }
    }
}
